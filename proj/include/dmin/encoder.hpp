#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dmin/dataset.hpp"
#include "dmin/ops.hpp"
#include "dmin/rng.hpp"

namespace dmin {

enum class EncoderKind { FeatureHash, Precomputed };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::Precomputed;
  std::size_t vocab_buckets = 1024;  // V, feature_hash only
  std::size_t embed_dim = 32;        // d

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

const char* to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);

// Lowercase (ASCII) and split on whitespace.
std::vector<std::string> tokenize(std::string_view text);

// FNV-1a 64 of the token bytes, modulo `buckets`.
std::size_t hash_bucket(std::string_view token, std::size_t buckets);

// L2-normalised bucket counts of the tokens of `text`, sorted by bucket.
std::vector<std::pair<std::size_t, double>> hashed_features(std::string_view text, std::size_t buckets);

// Maps a payload to a d-dimensional sample vector.
//
// feature_hash: tanh(P c) where c is the normalised hashed bag of words and
// P is the learned d x V projection.
// precomputed: vector payloads pass through (length must be d); text
// payloads are looked up as item ids in the table.
class Encoder {
 public:
  explicit Encoder(EncoderConfig config);
  static Encoder random(EncoderConfig config, Rng& rng, double init_std = 1.0);

  const EncoderConfig& config() const { return config_; }
  std::size_t dim() const { return config_.embed_dim; }
  bool trainable() const { return config_.kind == EncoderKind::FeatureHash; }

  const Tensor& projection() const { return projection_; }
  Tensor& projection() { return projection_; }

  void add_entry(std::string id, Tensor vector);
  std::size_t table_size() const { return table_.size(); }

  // `projection` must be the recorded projection for feature_hash encoders
  // and is ignored for precomputed ones.
  Var encode(Tape& tape, Var projection, const Payload& item) const;
  Tensor encode(const Payload& item) const;
  std::vector<Tensor> encode_batch(std::span<const Payload> items) const;

 private:
  Tensor lookup(const Payload& item) const;

  EncoderConfig config_;
  Tensor projection_;
  std::unordered_map<std::string, Tensor> table_;
};

}  // namespace dmin
