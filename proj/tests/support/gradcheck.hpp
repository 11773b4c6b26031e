#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dmin/tape.hpp"
#include "support/oracles.hpp"

namespace testing_support {

// Builds a scalar from leaves recorded on `tape`.
using ScalarFn = std::function<dmin::Var(dmin::Tape&, const std::vector<dmin::Var>&)>;

struct GradMismatch {
  std::size_t input = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares tape gradients with central differences for every coordinate of
// every input. Returns the mismatches (empty when all agree).
inline std::vector<GradMismatch> check_gradients(const ScalarFn& f, std::vector<dmin::Tensor> inputs,
                                                 double h = 1e-5) {
  std::vector<dmin::Tensor> analytic;
  {
    dmin::Tape tape;
    std::vector<dmin::Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.parameter(t));
    const dmin::Var root = f(tape, vars);
    const dmin::Gradients g = tape.backward(root);
    for (dmin::Var v : vars) analytic.push_back(g.of(v));
  }
  auto evaluate = [&] {
    dmin::Tape tape;
    std::vector<dmin::Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.constant(t));
    return f(tape, vars).value().item();
  };
  std::vector<GradMismatch> bad;
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    auto data = inputs[a].data();
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double numeric = oracle::central_difference(evaluate, &data[k], h);
      if (!oracle::gradient_close(analytic[a][k], numeric)) bad.push_back({a, k, analytic[a][k], numeric});
    }
  }
  return bad;
}

}  // namespace testing_support
