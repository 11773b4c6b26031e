#include "dmin/optimizer.hpp"

#include <cmath>

#include "dmin/errors.hpp"

namespace dmin {

void Adam::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter and gradient counts differ");
  if (m_.empty()) {
    for (Tensor* p : params) {
      m_.push_back(Tensor::zeros_like(*p));
      v_.push_back(Tensor::zeros_like(*p));
    }
  }
  if (m_.size() != params.size()) throw ShapeError("adam: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = grads[k];
    if (!p.same_shape(g)) throw ShapeError("adam: gradient shape " + g.shape_string() + " vs " + p.shape_string());
    if (!g.all_finite()) throw NumericError("adam: non-finite gradient");
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      p[i] -= config_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
    }
  }
}

}  // namespace dmin
