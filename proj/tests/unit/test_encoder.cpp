#include <doctest.h>

#include <cmath>
#include <map>

#include "dmin/encoder.hpp"
#include "dmin/errors.hpp"
#include "dmin/rng.hpp"
#include "support/oracles.hpp"

using namespace dmin;

namespace {

EncoderConfig hashing(std::size_t buckets, std::size_t d) {
  EncoderConfig cfg;
  cfg.kind = EncoderKind::FeatureHash;
  cfg.vocab_buckets = buckets;
  cfg.embed_dim = d;
  return cfg;
}

// tanh(P c) written out from the definition: bag of words over FNV buckets,
// L2-normalised counts, dense projection.
oracle::Vec encode_oracle(const Tensor& projection, const std::vector<std::string>& tokens, std::size_t buckets) {
  oracle::Vec counts(buckets, 0.0);
  for (const auto& t : tokens) counts[oracle::fnv_bucket(t, buckets)] += 1.0;
  const double n = oracle::norm(counts);
  oracle::Vec out(projection.rows(), 0.0);
  for (std::size_t r = 0; r < projection.rows(); ++r) {
    for (std::size_t c = 0; c < buckets; ++c) out[r] += projection(r, c) * counts[c] / n;
    out[r] = std::tanh(out[r]);
  }
  return out;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on any whitespace") {
  CHECK(tokenize("Hello  World\tFOO\nbar ") == std::vector<std::string>{"hello", "world", "foo", "bar"});
  CHECK(tokenize("   ").empty());
  CHECK(tokenize("").empty());
  CHECK(tokenize("x") == std::vector<std::string>{"x"});
}

TEST_CASE("hash buckets match FNV-1a golden values") {
  CHECK(hash_bucket("hello", 1024) == 267);
  CHECK(hash_bucket("world", 1024) == 755);
  CHECK(hash_bucket("a", 8) == 4);
  CHECK(hash_bucket("b", 8) == 5);
  for (const char* tok : {"few", "shot", "routing", "memory", "x"}) {
    CHECK(hash_bucket(tok, 1024) == oracle::fnv_bucket(tok, 1024));
    CHECK(hash_bucket(tok, 97) == oracle::fnv_bucket(tok, 97));
  }
}

TEST_CASE("hashed features are normalised counts") {
  const auto f = hashed_features("a b a", 8);
  REQUIRE(f.size() == 2);
  CHECK(f[0].first == 4);
  CHECK(f[1].first == 5);
  CHECK(std::abs(f[0].second - 2.0 / std::sqrt(5.0)) < 1e-15);
  CHECK(std::abs(f[1].second - 1.0 / std::sqrt(5.0)) < 1e-15);
  CHECK_THROWS_AS(hashed_features(" \t", 8), DataError);
}

TEST_CASE("feature_hash encoding matches the dense oracle") {
  Rng rng(7);
  const Encoder enc = Encoder::random(hashing(8, 4), rng);
  const Tensor got = enc.encode(Payload{std::string("a b a")});
  const oracle::Vec want = encode_oracle(enc.projection(), {"a", "b", "a"}, 8);
  REQUIRE(got.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(got[k] - want[k]) < 1e-12);

  Rng big(13);
  const Encoder wide = Encoder::random(hashing(256, 16), big);
  const std::string text = "The quick brown fox jumps over the lazy dog the end";
  const Tensor g2 = wide.encode(Payload{text});
  const oracle::Vec w2 = encode_oracle(wide.projection(), tokenize(text), 256);
  for (std::size_t k = 0; k < 16; ++k) CHECK(std::abs(g2[k] - w2[k]) < 1e-12);
}

TEST_CASE("feature_hash encoding properties") {
  const Encoder zero(hashing(32, 4));
  CHECK(zero.encode(Payload{std::string("anything at all")}) == Tensor::zeros(4));

  Rng rng(21);
  const Encoder enc = Encoder::random(hashing(64, 8), rng, 3.0);
  const Tensor a = enc.encode(Payload{std::string("Same Words here")});
  CHECK(a == enc.encode(Payload{std::string("same  words HERE")}));
  // token order does not matter for a bag of words
  CHECK(a == enc.encode(Payload{std::string("here words same")}));
  for (double v : a.data()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("encode_batch matches single calls and tags errors with the index") {
  Rng rng(3);
  const Encoder enc = Encoder::random(hashing(64, 8), rng);
  CHECK(enc.encode_batch({}).empty());
  const std::vector<Payload> items{std::string("one two"), std::string("three"), std::string("four five six")};
  const auto batch = enc.encode_batch(items);
  REQUIRE(batch.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(batch[i] == enc.encode(items[i]));

  const std::vector<Payload> bad{std::string("ok"), std::string("")};
  try {
    (void)enc.encode_batch(bad);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).rfind("item 1: ", 0) == 0);
  }
}

TEST_CASE("feature_hash encoder rejects unusable input") {
  const Encoder enc(hashing(16, 4));
  CHECK_THROWS_AS(enc.encode(Payload{std::string("")}), DataError);
  CHECK_THROWS_AS(enc.encode(Payload{std::string("   ")}), DataError);
  CHECK_THROWS_AS(enc.encode(Payload{Tensor::zeros(4)}), DataError);
}

TEST_CASE("precomputed encoder passes vectors through and looks up ids") {
  EncoderConfig cfg;
  cfg.embed_dim = 3;
  Encoder enc(cfg);
  CHECK_FALSE(enc.trainable());
  const Tensor v = Tensor::vector({0.5, -2.0, 7.0});
  CHECK(enc.encode(Payload{v}) == v);
  enc.add_entry("cat", Tensor::vector({1, 2, 3}));
  CHECK(enc.table_size() == 1);
  CHECK(enc.encode(Payload{std::string("cat")}) == Tensor::vector({1, 2, 3}));
  CHECK_THROWS_AS(enc.encode(Payload{std::string("dog")}), DataError);
  CHECK_THROWS_AS(enc.encode(Payload{Tensor::zeros(4)}), ShapeError);
  CHECK_THROWS_AS(enc.add_entry("bad", Tensor::zeros(2)), ShapeError);
}

TEST_CASE("encoder config validation") {
  CHECK_THROWS_AS(Encoder(hashing(16, 1)), ConfigError);
  CHECK_THROWS_AS(Encoder(hashing(4, 8)), ConfigError);
  CHECK_NOTHROW(Encoder(hashing(8, 8)));
  CHECK(parse_encoder_kind("feature_hash") == EncoderKind::FeatureHash);
  CHECK(parse_encoder_kind("precomputed") == EncoderKind::Precomputed);
  CHECK(std::string(to_string(EncoderKind::FeatureHash)) == "feature_hash");
  CHECK_THROWS_AS(parse_encoder_kind("bert"), ConfigError);
}
