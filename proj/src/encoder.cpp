#include "dmin/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "dmin/errors.hpp"
#include "dmin/hash.hpp"

namespace dmin {

void EncoderConfig::validate() const {
  if (embed_dim < 2) throw ConfigError("encoder: embed_dim must be >= 2, got " + std::to_string(embed_dim));
  if (kind == EncoderKind::FeatureHash && vocab_buckets < embed_dim) {
    throw ConfigError("encoder: vocab_buckets (" + std::to_string(vocab_buckets) +
                      ") must be >= embed_dim (" + std::to_string(embed_dim) + ")");
  }
}

const char* to_string(EncoderKind kind) {
  return kind == EncoderKind::FeatureHash ? "feature_hash" : "precomputed";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "feature_hash") return EncoderKind::FeatureHash;
  if (name == "precomputed") return EncoderKind::Precomputed;
  throw ConfigError("unknown encoder kind '" + std::string(name) + "'");
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current += static_cast<char>(std::tolower(c));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::size_t hash_bucket(std::string_view token, std::size_t buckets) {
  return static_cast<std::size_t>(fnv1a64(token) % buckets);
}

std::vector<std::pair<std::size_t, double>> hashed_features(std::string_view text, std::size_t buckets) {
  std::map<std::size_t, double> counts;
  for (const auto& tok : tokenize(text)) counts[hash_bucket(tok, buckets)] += 1.0;
  if (counts.empty()) throw DataError("encode: text has no tokens");
  double norm = 0.0;
  for (const auto& [_, c] : counts) norm += c * c;
  norm = std::sqrt(norm);
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(counts.size());
  for (const auto& [bucket, c] : counts) out.emplace_back(bucket, c / norm);
  return out;
}

Encoder::Encoder(EncoderConfig config) : config_(config) {
  config_.validate();
  if (trainable()) projection_ = Tensor::zeros(config_.embed_dim, config_.vocab_buckets);
}

Encoder Encoder::random(EncoderConfig config, Rng& rng, double init_std) {
  Encoder enc(config);
  for (double& v : enc.projection_.data()) v = init_std * rng.normal();
  return enc;
}

void Encoder::add_entry(std::string id, Tensor vector) {
  if (vector.rank() != 1 || vector.size() != dim()) {
    throw ShapeError("encoder table: vector for '" + id + "' has length " + std::to_string(vector.size()) +
                     ", expected d=" + std::to_string(dim()));
  }
  table_.insert_or_assign(std::move(id), std::move(vector));
}

Tensor Encoder::lookup(const Payload& item) const {
  if (const auto* v = std::get_if<Tensor>(&item)) {
    if (v->size() != dim()) {
      throw ShapeError("encode: vector has dimension " + std::to_string(v->size()) + ", model expects d=" +
                       std::to_string(dim()));
    }
    return *v;
  }
  const auto& id = std::get<std::string>(item);
  auto it = table_.find(id);
  if (it == table_.end()) throw DataError("encode: unknown item id '" + id + "'");
  return it->second;
}

Var Encoder::encode(Tape& tape, Var projection, const Payload& item) const {
  if (!trainable()) return tape.constant(lookup(item));
  const auto* text = std::get_if<std::string>(&item);
  if (!text) throw DataError("encode: feature_hash encoder needs text input");
  if (text->empty()) throw DataError("encode: empty text");
  return tanh(project_columns(projection, hashed_features(*text, config_.vocab_buckets)));
}

Tensor Encoder::encode(const Payload& item) const {
  Tape tape;
  Var p = trainable() ? tape.constant(projection_) : Var{};
  return encode(tape, p, item).value();
}

std::vector<Tensor> Encoder::encode_batch(std::span<const Payload> items) const {
  std::vector<Tensor> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    try {
      out.push_back(encode(items[i]));
    } catch (const DataError& e) {
      throw DataError("item " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace dmin
