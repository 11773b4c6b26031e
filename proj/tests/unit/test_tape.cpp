#include <doctest.h>

#include <cmath>
#include <limits>

#include "dmin/errors.hpp"
#include "dmin/ops.hpp"
#include "dmin/rng.hpp"
#include "dmin/tape.hpp"
#include "support/gradcheck.hpp"

using namespace dmin;
using testing_support::check_gradients;

namespace {

Tensor random_tensor(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return Tensor::vector(std::move(v));
}

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.normal();
  return Tensor::matrix(r, c, std::move(v));
}

// Reduces a vector to a scalar through fixed random weights so every output
// coordinate receives a distinct adjoint.
Var reduce(Var x, const Tensor& weights) { return dot(x, x.tape()->constant(weights)); }

}  // namespace

TEST_CASE("backward: analytic examples") {
  {
    Tape tape;
    Var x = tape.parameter(Tensor::scalar(3.0));
    const Gradients g = tape.backward(mul(x, x));
    CHECK(g.of(x)[0] == 6.0);
  }
  {
    Tape tape;
    Var x = tape.parameter(Tensor::vector({0.0, 0.0}));
    const Gradients g = tape.backward(element(softmax(x), 0));
    CHECK(g.of(x)[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(g.of(x)[1] == doctest::Approx(-0.25).epsilon(1e-15));
  }
}

TEST_CASE("tape structure: topological ids and root adjoint") {
  Tape tape;
  Var a = tape.parameter(Tensor::vector({1.0, 2.0}));
  Var b = tape.constant(Tensor::vector({3.0, -1.0}));
  Var c = dot(squash(add(a, b)), a);
  for (NodeId id = 0; id < tape.size(); ++id) {
    for (NodeId in : tape.inputs(id)) CHECK(in < id);
  }
  CHECK(tape.kind(c.id()) == OpKind::Dot);
  const Gradients g = tape.backward(c);
  CHECK(g.of(c)[0] == 1.0);
  CHECK(g.of(b) == Tensor::zeros(2));  // constants get no gradient
}

TEST_CASE("backward errors") {
  Tape tape;
  Var v = tape.parameter(Tensor::vector({1.0, 2.0}));
  CHECK_THROWS_AS(tape.backward(v), ShapeError);
  Tape other;
  Var w = other.parameter(Tensor::scalar(1.0));
  CHECK_THROWS_AS(tape.backward(w), ConfigError);
  CHECK_THROWS_AS(add(v, other.parameter(Tensor::vector({1.0, 2.0}))), ConfigError);
}

TEST_CASE("ops reject bad shapes and non-finite results") {
  Tape tape;
  Var a = tape.parameter(Tensor::vector({1.0, 2.0}));
  Var b = tape.parameter(Tensor::vector({1.0, 2.0, 3.0}));
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(dot(a, b), ShapeError);
  CHECK_THROWS_AS(matvec(tape.constant(Tensor::zeros(2, 2)), b), ShapeError);
  CHECK_THROWS_AS(element(a, 2), ShapeError);
  Var huge = tape.constant(Tensor::vector({800.0}));
  CHECK_THROWS_AS(exp(huge), NumericError);
  CHECK_THROWS_AS(tape.constant(Tensor::vector({std::numeric_limits<double>::quiet_NaN()})), NumericError);
}

TEST_CASE("cross_entropy saturates without losing precision") {
  Tape tape;
  Var s = tape.constant(Tensor::vector({50.0, 0.0, 0.0}));
  const double loss = cross_entropy(s, 0).value().item();
  CHECK(loss > 0.0);
  CHECK(loss < 1e-20);
  CHECK_THROWS_AS(cross_entropy(s, 3), ConfigError);
}

TEST_CASE("property: gradients of every op match central differences") {
  Rng rng(2024);
  std::size_t checked = 0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t n = 2 + rng.below(5);
    const Tensor w = random_tensor(rng, n);
    const int op = static_cast<int>(rng.below(17));
    testing_support::ScalarFn f;
    std::vector<Tensor> inputs;
    switch (op) {
      case 0: {
        const std::size_t m = 2 + rng.below(4);
        inputs = {random_matrix(rng, n, m), random_tensor(rng, m)};
        f = [w](Tape&, const std::vector<Var>& v) { return reduce(matvec(v[0], v[1]), w); };
        break;
      }
      case 1:
        inputs = {random_tensor(rng, n), random_tensor(rng, n)};
        f = [w](Tape&, const std::vector<Var>& v) { return reduce(add(v[0], v[1]), w); };
        break;
      case 2:
        inputs = {random_tensor(rng, n), random_tensor(rng, n)};
        f = [w](Tape&, const std::vector<Var>& v) { return reduce(sub(v[0], v[1]), w); };
        break;
      case 3:
        inputs = {random_tensor(rng, n), random_tensor(rng, n)};
        f = [w](Tape&, const std::vector<Var>& v) { return reduce(mul(v[0], v[1]), w); };
        break;
      case 4:
        inputs = {random_tensor(rng, n), random_tensor(rng, 1)};
        f = [w](Tape&, const std::vector<Var>& v) { return reduce(scale(v[0], v[1]), w); };
        break;
      case 5: {
        const double k = rng.normal();
        inputs = {random_tensor(rng, n)};
        f = [w, k](Tape&, const std::vector<Var>& v) { return reduce(scale(v[0], k), w); };
        break;
      }
      case 6:
        inputs = {random_tensor(rng, n, std::exp(2.0 * rng.uniform() - 1.0))};
        f = [w](Tape&, const std::vector<Var>& v) { return reduce(squash(v[0]), w); };
        break;
      case 7:
        inputs = {random_tensor(rng, n)};
        f = [w](Tape&, const std::vector<Var>& v) { return reduce(tanh(v[0]), w); };
        break;
      case 8:
        inputs = {random_tensor(rng, n)};
        f = [w](Tape&, const std::vector<Var>& v) { return reduce(exp(v[0]), w); };
        break;
      case 9:
        inputs = {random_tensor(rng, n, 2.0)};
        f = [w](Tape&, const std::vector<Var>& v) { return reduce(softmax(v[0]), w); };
        break;
      case 10:
        inputs = {random_tensor(rng, n), random_tensor(rng, n)};
        f = [](Tape&, const std::vector<Var>& v) { return dot(v[0], v[1]); };
        break;
      case 11:
        inputs = {random_tensor(rng, n), random_tensor(rng, n)};
        f = [](Tape&, const std::vector<Var>& v) { return pccs(v[0], v[1]); };
        break;
      case 12:
        inputs = {random_tensor(rng, n), random_tensor(rng, n)};
        f = [](Tape&, const std::vector<Var>& v) { return cosine(v[0], v[1]); };
        break;
      case 13: {
        const Tensor w2 = random_tensor(rng, 2 * n);
        inputs = {random_tensor(rng, n), random_tensor(rng, n)};
        f = [w2](Tape&, const std::vector<Var>& v) {
          const std::vector<Var> parts{v[0], v[1]};
          return reduce(concat(parts), w2);
        };
        break;
      }
      case 14: {
        const std::size_t r = rng.below(3);
        inputs = {random_matrix(rng, 3, n)};
        f = [w, r](Tape&, const std::vector<Var>& v) { return reduce(row(v[0], r), w); };
        break;
      }
      case 15: {
        const std::size_t label = rng.below(n);
        inputs = {random_tensor(rng, n, 3.0)};
        f = [label](Tape&, const std::vector<Var>& v) { return cross_entropy(v[0], label); };
        break;
      }
      default: {
        const std::size_t cols = n + 3;
        std::vector<std::pair<std::size_t, double>> sparse{{0, 0.6}, {cols - 1, -0.8}};
        inputs = {random_matrix(rng, n, cols)};
        f = [w, sparse](Tape&, const std::vector<Var>& v) { return reduce(project_columns(v[0], sparse), w); };
        break;
      }
    }
    const auto bad = check_gradients(f, inputs);
    INFO("case " << c << " op " << op);
    CHECK(bad.empty());
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("sum, mean and element gradients") {
  Rng rng(5);
  const auto bad = check_gradients(
      [](Tape&, const std::vector<Var>& v) {
        const std::vector<Var> parts{v[0], v[1], v[0]};
        return element(mul(mean(parts), sum(parts)), 1);
      },
      {random_tensor(rng, 3), random_tensor(rng, 3)});
  CHECK(bad.empty());
}
