#include "dmin/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "dmin/errors.hpp"
#include "dmin/rng.hpp"

namespace dmin {

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::size_t Dataset::intern_class(const std::string& name) {
  auto it = std::find(class_names_.begin(), class_names_.end(), name);
  if (it != class_names_.end()) return static_cast<std::size_t>(it - class_names_.begin());
  class_names_.push_back(name);
  by_class_.emplace_back();
  return class_names_.size() - 1;
}

void Dataset::add(std::size_t label, Payload payload) {
  if (label >= class_names_.size()) {
    throw DataError("dataset: label " + std::to_string(label) + " has no class");
  }
  if (const auto* text = std::get_if<std::string>(&payload)) {
    if (kind_ == Kind::Vectors) throw DataError("dataset: cannot mix text and vector items");
    if (text->empty()) throw DataError("dataset: empty text item");
    kind_ = Kind::Text;
  } else {
    const Tensor& v = std::get<Tensor>(payload);
    if (kind_ == Kind::Text) throw DataError("dataset: cannot mix text and vector items");
    if (v.rank() != 1 || v.empty()) throw DataError("dataset: vector item must be a non-empty vector");
    if (kind_ == Kind::Vectors && v.size() != dim_) {
      throw DataError("dataset: inconsistent vector dimension " + std::to_string(v.size()) +
                      " (expected " + std::to_string(dim_) + ")");
    }
    if (!v.all_finite()) throw DataError("dataset: non-finite vector entry");
    kind_ = Kind::Vectors;
    dim_ = v.size();
  }
  by_class_[label].push_back(items_.size());
  items_.push_back({label, std::move(payload)});
}

void Dataset::validate() const {
  if (items_.empty()) throw DataError("dataset is empty");
  for (std::size_t c = 0; c < by_class_.size(); ++c) {
    if (by_class_[c].empty()) throw DataError("dataset: class '" + class_names_[c] + "' has no items");
  }
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (a.class_names_ != b.class_names_ || a.items_.size() != b.items_.size()) return false;
  for (std::size_t i = 0; i < a.items_.size(); ++i) {
    if (a.items_[i].label != b.items_[i].label || a.items_[i].payload != b.items_[i].payload) return false;
  }
  return true;
}

Dataset load_tsv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(where(path, lineno) + "missing TAB between label and text");
    std::string label = line.substr(0, tab);
    std::string text = line.substr(tab + 1);
    if (label.empty()) throw DataError(where(path, lineno) + "empty label");
    if (text.empty()) throw DataError(where(path, lineno) + "empty text");
    ds.add(ds.intern_class(label), std::move(text));
  }
  if (ds.size() == 0) throw DataError(path.string() + ": empty file");
  return ds;
}

void save_tsv(const Dataset& dataset, const std::filesystem::path& path) {
  if (!dataset.is_text()) throw DataError("save_tsv: dataset does not hold text");
  std::ofstream out = open_output(path);
  for (const Item& item : dataset.items()) {
    const auto& text = std::get<std::string>(item.payload);
    if (text.find_first_of("\t\n") != std::string::npos) {
      throw DataError("save_tsv: text contains TAB or newline");
    }
    out << dataset.class_names()[item.label] << '\t' << text << '\n';
  }
}

Dataset load_jsonl_vectors(const std::filesystem::path& path, LoadStats* stats) {
  std::ifstream in = open_input(path);
  Dataset ds;
  LoadStats local;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) {
      ++local.skipped_blank_lines;
      continue;
    }
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where(path, lineno) + "invalid JSON: " + e.what());
    }
    if (!record.is_object() || !record.contains("label") || !record.contains("vector")) {
      throw DataError(where(path, lineno) + "expected {\"label\": ..., \"vector\": [...]}");
    }
    if (!record["label"].is_string()) throw DataError(where(path, lineno) + "label must be a string");
    const auto& arr = record["vector"];
    if (!arr.is_array() || arr.empty()) throw DataError(where(path, lineno) + "vector must be a non-empty array");
    std::vector<double> values;
    values.reserve(arr.size());
    for (std::size_t k = 0; k < arr.size(); ++k) {
      if (!arr[k].is_number()) {
        throw DataError(where(path, lineno) + "vector entry " + std::to_string(k) + " is not a number");
      }
      values.push_back(arr[k].get<double>());
    }
    if (ds.size() > 0 && values.size() != ds.vector_dim()) {
      throw DataError(where(path, lineno) + "vector has dimension " + std::to_string(values.size()) +
                      ", earlier records have " + std::to_string(ds.vector_dim()));
    }
    ds.add(ds.intern_class(record["label"].get<std::string>()), Tensor::vector(std::move(values)));
    ++local.records;
  }
  if (ds.size() == 0) throw DataError(path.string() + ": no records");
  if (stats) *stats = local;
  return ds;
}

void save_jsonl_vectors(const Dataset& dataset, const std::filesystem::path& path) {
  if (!dataset.is_vectors()) throw DataError("save_jsonl_vectors: dataset does not hold vectors");
  std::ofstream out = open_output(path);
  for (const Item& item : dataset.items()) {
    const Tensor& v = std::get<Tensor>(item.payload);
    nlohmann::json record;
    record["label"] = dataset.class_names()[item.label];
    record["vector"] = std::vector<double>(v.data().begin(), v.data().end());
    out << record.dump() << '\n';
  }
}

Dataset load_dataset(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".tsv" || ext == ".txt") return load_tsv(path);
  return load_jsonl_vectors(path);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  if (dataset.is_text()) {
    save_tsv(dataset, path);
  } else {
    save_jsonl_vectors(dataset, path);
  }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 1 || spec.per_class < 1 || spec.dim < 1) {
    throw ConfigError("synthetic: classes, per-class count and dimension must be positive");
  }
  if (!(spec.separation > 0.0)) throw ConfigError("synthetic: separation must be > 0");
  if (!(spec.noise_sigma > 0.0)) throw ConfigError("synthetic: noise sigma must be > 0");

  Rng rng(spec.seed);
  SyntheticData out;
  const double radius = spec.separation * spec.noise_sigma;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    std::vector<double> dir(spec.dim);
    double norm = 0.0;
    while (norm == 0.0) {
      for (double& v : dir) v = rng.normal();
      norm = l2_norm(dir);
    }
    for (double& v : dir) v *= radius / norm;
    out.centers.push_back(Tensor::vector(std::move(dir)));
    out.dataset.intern_class("class_" + std::to_string(c));
  }
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      Tensor x = out.centers[c];
      for (double& v : x.data()) v += spec.noise_sigma * rng.normal();
      out.dataset.add(c, std::move(x));
    }
  }
  return out;
}

Dataset select_classes(const Dataset& dataset, const std::vector<std::size_t>& classes) {
  Dataset out;
  std::vector<std::ptrdiff_t> remap(dataset.num_classes(), -1);
  for (std::size_t c : classes) {
    if (c >= dataset.num_classes()) throw DataError("select_classes: class id out of range");
    remap[c] = static_cast<std::ptrdiff_t>(out.intern_class(dataset.class_names()[c]));
  }
  for (const Item& item : dataset.items()) {
    if (remap[item.label] >= 0) out.add(static_cast<std::size_t>(remap[item.label]), item.payload);
  }
  return out;
}

BaseNovelSplit split_base_novel(const Dataset& dataset, std::size_t num_base, std::uint64_t seed) {
  if (num_base < 1 || num_base >= dataset.num_classes()) {
    throw ConfigError("split: num_base must be in [1, " + std::to_string(dataset.num_classes()) +
                      "), got " + std::to_string(num_base));
  }
  std::vector<std::size_t> order(dataset.num_classes());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::size_t> base(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(num_base));
  std::vector<std::size_t> novel(order.begin() + static_cast<std::ptrdiff_t>(num_base), order.end());
  return {select_classes(dataset, base), select_classes(dataset, novel)};
}

}  // namespace dmin
