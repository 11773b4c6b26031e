#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dmin/ops.hpp"
#include "dmin/rng.hpp"

namespace dmin {

struct RoutingConfig {
  std::size_t iterations = 3;     // r
  std::size_t capsule_count = 4;  // l
  std::size_t capsule_dim = 8;    // d_v
  std::size_t input_dim = 32;     // d_in

  std::size_t output_dim() const { return capsule_count * capsule_dim; }
  void validate() const;
  friend bool operator==(const RoutingConfig&, const RoutingConfig&) = default;
};

// One (W_j, b_j) per output capsule j, shared by every memory entry and by
// the query.
struct RoutingParams {
  std::vector<Tensor> weights;  // l matrices, d_v x d_in
  std::vector<Tensor> biases;   // l vectors, d_v

  static RoutingParams zeros(const RoutingConfig& cfg);
  // W_j starts as rows [j*d_v, (j+1)*d_v) of the identity (clipped to d_in)
  // plus N(0, noise_std^2) noise; b_j = 0.
  static RoutingParams init(const RoutingConfig& cfg, Rng& rng, double noise_std = 0.05);
  void validate(const RoutingConfig& cfg) const;

  // Rescales each W_j so that |W_j m_i + b_j| averages `target` over the
  // memory. Squash is quadratic near zero, so without this a small-normed
  // memory shrinks towards zero at every routing step.
  void scale_to_memory(std::span<const Tensor> memory, double target = 1.0);
};

struct RoutingVars {
  std::vector<Var> weights;
  std::vector<Var> biases;

  static RoutingVars record(Tape& tape, const RoutingParams& params, bool trainable);
};

// Transformed memory capsules squash(W_j m_i + b_j). They do not depend on
// the query, so one set can serve many routing calls. Entries are stored in
// lexicographic order of the input vectors, not in the caller's order.
struct MemoryCapsules {
  std::size_t entries = 0;
  std::size_t capsules = 0;
  std::vector<Var> caps;  // entry-major: caps[i * capsules + j]

  Var at(std::size_t i, std::size_t j) const { return caps[i * capsules + j]; }
};

MemoryCapsules transform_memory(const RoutingVars& vars, const RoutingConfig& cfg, std::span<const Var> memory);
// Memory entries are the rows of `matrix`.
MemoryCapsules transform_memory_rows(const RoutingVars& vars, const RoutingConfig& cfg, Var matrix);

// Per-iteration snapshots, all n x l except capsules (l x d_v). Rows follow
// the MemoryCapsules entry order.
struct RoutingTrace {
  std::vector<Tensor> coupling;  // d after softmax, one per iteration
  std::vector<Tensor> gates;     // p: initial value, then after each iteration
  std::vector<Tensor> logits;    // alpha after each iteration's update
  std::vector<Tensor> capsules;  // v, one per iteration
};

// Dynamic memory routing: adapts `query` against the memory and returns
// concat(v_1..v_l). With a trace the final iteration's alpha/q/p updates are
// recorded too; without one they are skipped since they cannot reach the
// output.
Var dmr(const RoutingVars& vars, const RoutingConfig& cfg, const MemoryCapsules& memory, Var query,
        RoutingTrace* trace = nullptr);
Var dmr(const RoutingVars& vars, const RoutingConfig& cfg, std::span<const Var> memory, Var query,
        RoutingTrace* trace = nullptr);
Tensor dmr(const RoutingParams& params, const RoutingConfig& cfg, std::span<const Tensor> memory,
           const Tensor& query, RoutingTrace* trace = nullptr);

// Dynamic memory module: e' = DMR(W_base rows, e).
Var dmm_adapt(const RoutingVars& vars, const RoutingConfig& cfg, const MemoryCapsules& base_memory, Var sample);
Tensor dmm_adapt(const RoutingParams& params, const RoutingConfig& cfg, const Tensor& w_base, const Tensor& sample);

// Query-guided induction: e_c = DMR({e'_{c,s}}, e_q).
Var qim_induce(const RoutingVars& vars, const RoutingConfig& cfg, const MemoryCapsules& adapted_support,
               Var query);
Tensor qim_induce(const RoutingParams& params, const RoutingConfig& cfg, std::span<const Tensor> adapted_support,
                  const Tensor& query);

}  // namespace dmin
