#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "dmin/tensor.hpp"

namespace dmin {

// Raw text, or a precomputed sample vector.
using Payload = std::variant<std::string, Tensor>;

struct Item {
  std::size_t label = 0;
  Payload payload;
};

// Labelled items with dense class ids in [0, num_classes). Immutable once
// built; all payloads share one kind (text or vectors of one length).
class Dataset {
 public:
  // Returns the id for `name`, creating it on first sight.
  std::size_t intern_class(const std::string& name);
  void add(std::size_t label, Payload payload);

  std::size_t size() const { return items_.size(); }
  std::size_t num_classes() const { return class_names_.size(); }
  const Item& item(std::size_t i) const { return items_[i]; }
  const std::vector<Item>& items() const { return items_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<std::size_t>& class_items(std::size_t label) const { return by_class_[label]; }

  bool is_text() const { return kind_ == Kind::Text; }
  bool is_vectors() const { return kind_ == Kind::Vectors; }
  // Length of vector payloads; 0 for text datasets.
  std::size_t vector_dim() const { return dim_; }

  // Throws DataError if some class has no items.
  void validate() const;

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  enum class Kind { Empty, Text, Vectors };
  Kind kind_ = Kind::Empty;
  std::size_t dim_ = 0;
  std::vector<Item> items_;
  std::vector<std::string> class_names_;
  std::vector<std::vector<std::size_t>> by_class_;
};

struct LoadStats {
  std::size_t records = 0;
  std::size_t skipped_blank_lines = 0;
};

// `label<TAB>text` per line. Labels get ids in order of first appearance.
Dataset load_tsv(const std::filesystem::path& path);
void save_tsv(const Dataset& dataset, const std::filesystem::path& path);

// `{"label": "...", "vector": [...]}` per line. Blank lines are skipped and
// counted in `stats`.
Dataset load_jsonl_vectors(const std::filesystem::path& path, LoadStats* stats = nullptr);
void save_jsonl_vectors(const Dataset& dataset, const std::filesystem::path& path);

// Dispatches on extension: .tsv / .txt are text, anything else JSONL.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

struct SyntheticSpec {
  std::size_t num_classes = 30;
  std::size_t per_class = 50;
  std::size_t dim = 32;
  double separation = 6.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  Dataset dataset;
  std::vector<Tensor> centers;
};

// Class centres uniform on the sphere of radius separation * noise_sigma;
// items are centre + N(0, noise_sigma^2 I).
SyntheticData generate_synthetic(const SyntheticSpec& spec);

struct BaseNovelSplit {
  Dataset base;
  Dataset novel;
};

// Shuffles class ids with `seed`; the first `num_base` become base classes.
BaseNovelSplit split_base_novel(const Dataset& dataset, std::size_t num_base, std::uint64_t seed);

// Keeps only the listed classes, relabelled 0..n-1 in the given order.
Dataset select_classes(const Dataset& dataset, const std::vector<std::size_t>& classes);

}  // namespace dmin
