#include "dmin/routing.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "dmin/errors.hpp"

namespace dmin {

void RoutingConfig::validate() const {
  if (iterations < 1) throw ConfigError("routing: iterations must be >= 1");
  if (capsule_count < 1) throw ConfigError("routing: capsule_count must be >= 1");
  if (capsule_dim < 2) throw ConfigError("routing: capsule_dim must be >= 2 (PCCs needs two samples)");
  if (input_dim < 1) throw ConfigError("routing: input_dim must be >= 1");
}

RoutingParams RoutingParams::zeros(const RoutingConfig& cfg) {
  cfg.validate();
  RoutingParams p;
  for (std::size_t j = 0; j < cfg.capsule_count; ++j) {
    p.weights.push_back(Tensor::zeros(cfg.capsule_dim, cfg.input_dim));
    p.biases.push_back(Tensor::zeros(cfg.capsule_dim));
  }
  return p;
}

RoutingParams RoutingParams::init(const RoutingConfig& cfg, Rng& rng, double noise_std) {
  RoutingParams p = zeros(cfg);
  for (std::size_t j = 0; j < cfg.capsule_count; ++j) {
    Tensor& w = p.weights[j];
    for (std::size_t a = 0; a < cfg.capsule_dim; ++a) {
      const std::size_t col = j * cfg.capsule_dim + a;
      if (col < cfg.input_dim) w(a, col) = 1.0;
    }
    for (double& v : w.data()) v += noise_std * rng.normal();
  }
  return p;
}

void RoutingParams::scale_to_memory(std::span<const Tensor> memory, double target) {
  if (memory.empty()) return;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    double total = 0.0;
    for (const Tensor& m : memory) {
      Tensor y = matvec(weights[j], m);
      for (std::size_t k = 0; k < y.size(); ++k) y.data()[k] += biases[j][k];
      total += l2_norm(y.data());
    }
    const double mean = total / static_cast<double>(memory.size());
    if (mean <= kEpsilon) continue;
    for (double& v : weights[j].data()) v *= target / mean;
  }
}

void RoutingParams::validate(const RoutingConfig& cfg) const {
  if (weights.size() != cfg.capsule_count || biases.size() != cfg.capsule_count) {
    throw ShapeError("routing: expected " + std::to_string(cfg.capsule_count) + " capsule transforms, got " +
                     std::to_string(weights.size()));
  }
  for (std::size_t j = 0; j < cfg.capsule_count; ++j) {
    if (weights[j].rank() != 2 || weights[j].rows() != cfg.capsule_dim || weights[j].cols() != cfg.input_dim) {
      throw ShapeError("routing: W_" + std::to_string(j) + " has shape " + weights[j].shape_string() +
                       ", expected [" + std::to_string(cfg.capsule_dim) + "x" + std::to_string(cfg.input_dim) + "]");
    }
    if (biases[j].rank() != 1 || biases[j].size() != cfg.capsule_dim) {
      throw ShapeError("routing: b_" + std::to_string(j) + " has shape " + biases[j].shape_string());
    }
  }
}

RoutingVars RoutingVars::record(Tape& tape, const RoutingParams& params, bool trainable) {
  RoutingVars v;
  for (const auto& w : params.weights) v.weights.push_back(tape.leaf(w, trainable));
  for (const auto& b : params.biases) v.biases.push_back(tape.leaf(b, trainable));
  return v;
}

namespace {

Var capsule(const RoutingVars& vars, std::size_t j, Var x) {
  return squash(add(matvec(vars.weights[j], x), vars.biases[j]));
}

void check_input(const RoutingConfig& cfg, const Tensor& x, const char* what) {
  if (x.rank() != 1 || x.size() != cfg.input_dim) {
    throw ShapeError(std::string("dmr: ") + what + " has shape " + x.shape_string() + ", expected [" +
                     std::to_string(cfg.input_dim) + "]");
  }
}

Tensor gather(const std::vector<Var>& vars, std::size_t rows, std::size_t cols) {
  std::vector<double> out;
  out.reserve(rows * cols);
  for (Var v : vars) out.insert(out.end(), v.value().data().begin(), v.value().data().end());
  return Tensor::matrix(rows, cols, std::move(out));
}

}  // namespace

MemoryCapsules transform_memory(const RoutingVars& vars, const RoutingConfig& cfg, std::span<const Var> memory) {
  cfg.validate();
  if (memory.empty()) throw ShapeError("dmr: memory is empty");
  if (vars.weights.size() != cfg.capsule_count) throw ShapeError("dmr: parameter count does not match l");
  MemoryCapsules m;
  m.entries = memory.size();
  m.capsules = cfg.capsule_count;
  m.caps.reserve(m.entries * m.capsules);
  for (Var entry : memory) check_input(cfg, entry.value(), "memory entry");
  // Entries are routed in lexicographic order of their values so every sum
  // over i runs in the same order whatever order the caller used. That keeps
  // the output bit-identical under permutation of the memory.
  std::vector<std::size_t> order(memory.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto x = memory[a].value().data();
    const auto y = memory[b].value().data();
    return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
  });
  for (std::size_t i : order) {
    for (std::size_t j = 0; j < cfg.capsule_count; ++j) m.caps.push_back(capsule(vars, j, memory[i]));
  }
  return m;
}

MemoryCapsules transform_memory_rows(const RoutingVars& vars, const RoutingConfig& cfg, Var matrix) {
  const Tensor& m = matrix.value();
  if (m.rank() != 2) throw ShapeError("dmr: memory matrix must be rank 2, got " + m.shape_string());
  std::vector<Var> rows;
  rows.reserve(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(row(matrix, i));
  return transform_memory(vars, cfg, rows);
}

Var dmr(const RoutingVars& vars, const RoutingConfig& cfg, const MemoryCapsules& memory, Var query,
        RoutingTrace* trace) {
  cfg.validate();
  check_input(cfg, query.value(), "query");
  if (memory.entries == 0) throw ShapeError("dmr: memory is empty");
  Tape& tape = *query.tape();
  const std::size_t n = memory.entries;
  const std::size_t l = cfg.capsule_count;

  std::vector<Var> q_hat(l);
  for (std::size_t j = 0; j < l; ++j) q_hat[j] = capsule(vars, j, query);

  // gate[i*l + j] = tanh(PCCs(m_hat_ij, q_hat_j))
  auto compute_gates = [&] {
    std::vector<Var> gate(n * l);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < l; ++j) gate[i * l + j] = tanh(pccs(memory.at(i, j), q_hat[j]));
    }
    return gate;
  };

  std::vector<Var> logits(n, tape.constant(Tensor::zeros(l)));
  std::vector<Var> gate = compute_gates();
  if (trace) {
    *trace = RoutingTrace{};
    trace->gates.push_back(gather(gate, n, l));
  }

  std::vector<Var> v(l);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::vector<Var> coupling(n);
    for (std::size_t i = 0; i < n; ++i) coupling[i] = softmax(logits[i]);

    for (std::size_t j = 0; j < l; ++j) {
      std::vector<Var> terms(n);
      for (std::size_t i = 0; i < n; ++i) {
        terms[i] = scale(memory.at(i, j), add(element(coupling[i], j), gate[i * l + j]));
      }
      v[j] = squash(sum(terms));
    }
    if (trace) {
      trace->coupling.push_back(gather(coupling, n, l));
      trace->capsules.push_back(gather(v, l, cfg.capsule_dim));
    }

    const bool last = it + 1 == cfg.iterations;
    if (last && !trace) break;

    for (std::size_t i = 0; i < n; ++i) {
      std::vector<Var> delta(l);
      for (std::size_t j = 0; j < l; ++j) delta[j] = mul(gate[i * l + j], dot(memory.at(i, j), v[j]));
      logits[i] = add(logits[i], concat(delta));
    }
    for (std::size_t j = 0; j < l; ++j) q_hat[j] = scale(add(q_hat[j], v[j]), 0.5);
    gate = compute_gates();
    if (trace) {
      trace->logits.push_back(gather(logits, n, l));
      trace->gates.push_back(gather(gate, n, l));
    }
  }
  return concat(v);
}

Var dmr(const RoutingVars& vars, const RoutingConfig& cfg, std::span<const Var> memory, Var query,
        RoutingTrace* trace) {
  return dmr(vars, cfg, transform_memory(vars, cfg, memory), query, trace);
}

Tensor dmr(const RoutingParams& params, const RoutingConfig& cfg, std::span<const Tensor> memory,
           const Tensor& query, RoutingTrace* trace) {
  params.validate(cfg);
  Tape tape;
  RoutingVars vars = RoutingVars::record(tape, params, false);
  std::vector<Var> mem;
  mem.reserve(memory.size());
  for (const auto& m : memory) mem.push_back(tape.constant(m));
  return dmr(vars, cfg, std::span<const Var>(mem), tape.constant(query), trace).value();
}

Var dmm_adapt(const RoutingVars& vars, const RoutingConfig& cfg, const MemoryCapsules& base_memory, Var sample) {
  return dmr(vars, cfg, base_memory, sample);
}

Tensor dmm_adapt(const RoutingParams& params, const RoutingConfig& cfg, const Tensor& w_base, const Tensor& sample) {
  if (w_base.rank() != 2) throw ShapeError("dmm: W_base must be a matrix, got " + w_base.shape_string());
  std::vector<Tensor> rows;
  for (std::size_t i = 0; i < w_base.rows(); ++i) {
    rows.push_back(Tensor::vector(std::vector<double>(w_base.row(i).begin(), w_base.row(i).end())));
  }
  return dmr(params, cfg, rows, sample);
}

Var qim_induce(const RoutingVars& vars, const RoutingConfig& cfg, const MemoryCapsules& adapted_support,
               Var query) {
  return dmr(vars, cfg, adapted_support, query);
}

Tensor qim_induce(const RoutingParams& params, const RoutingConfig& cfg, std::span<const Tensor> adapted_support,
                  const Tensor& query) {
  return dmr(params, cfg, adapted_support, query);
}

}  // namespace dmin
