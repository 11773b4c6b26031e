#pragma once

#include <cstddef>
#include <span>

#include "dmin/ops.hpp"
#include "dmin/rng.hpp"

namespace dmin {

inline constexpr double kDefaultTau = 10.0;

// Cosine classifier with a learnable positive scale tau, stored as log(tau).
// Rows of w_base are the base-class weights and double as the routing memory.
struct CosineClassifier {
  Tensor w_base;   // C_base x d
  Tensor log_tau;  // scalar

  std::size_t base_classes() const { return w_base.rows(); }
  std::size_t dim() const { return w_base.cols(); }
  double tau() const;

  // Rows ~ N(0, row_std^2), tau = initial_tau.
  static CosineClassifier init(std::size_t base_classes, std::size_t dim, Rng& rng, double row_std = 0.02,
                               double initial_tau = kDefaultTau);
};

// s_k = tau * cos(e, w_k) for every base row.
Var base_scores(Var w_base, Var log_tau, Var e);
Tensor base_scores(const CosineClassifier& clf, const Tensor& e);

// s_c = tau * cos(e_q, e_c) over the episode's class vectors; needs C >= 2.
Var few_scores(Var log_tau, Var query, std::span<const Var> class_vectors);
Tensor few_scores(const CosineClassifier& clf, const Tensor& query, std::span<const Tensor> class_vectors);

// Cross-entropy of softmax(scores) against `label`.
Var loss_supervised(Var scores, std::size_t label);
double loss_supervised(const Tensor& scores, std::size_t label);

// Mean over classes of the mean cross-entropy of that class's queries.
Var loss_episode(std::span<const Var> query_scores, std::span<const std::size_t> labels);
double loss_episode(std::span<const Tensor> query_scores, std::span<const std::size_t> labels);

}  // namespace dmin
