#include "dmin/classifier.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "dmin/errors.hpp"

namespace dmin {

double CosineClassifier::tau() const { return std::exp(log_tau.item()); }

CosineClassifier CosineClassifier::init(std::size_t base_classes, std::size_t dim, Rng& rng, double row_std,
                                        double initial_tau) {
  if (base_classes < 1 || dim < 1) throw ConfigError("classifier: need at least one base class and d >= 1");
  if (!(initial_tau > 0.0)) throw ConfigError("classifier: tau must be positive");
  CosineClassifier clf{Tensor::zeros(base_classes, dim), Tensor::scalar(std::log(initial_tau))};
  for (double& v : clf.w_base.data()) v = row_std * rng.normal();
  return clf;
}

namespace {

void require_nonzero(const Tensor& e, const char* op) {
  if (l2_norm(e.data()) == 0.0) throw DataError(std::string(op) + ": zero input vector");
}

}  // namespace

Var base_scores(Var w_base, Var log_tau, Var e) {
  require_nonzero(e.value(), "base_scores");
  const Tensor& w = w_base.value();
  if (w.rank() != 2 || w.cols() != e.value().size()) {
    throw ShapeError("base_scores: W_base " + w.shape_string() + " does not match e " + e.value().shape_string());
  }
  std::vector<Var> cos(w.rows());
  for (std::size_t k = 0; k < w.rows(); ++k) cos[k] = cosine(e, row(w_base, k));
  return scale(concat(cos), exp(log_tau));
}

Tensor base_scores(const CosineClassifier& clf, const Tensor& e) {
  Tape tape;
  return base_scores(tape.constant(clf.w_base), tape.constant(clf.log_tau), tape.constant(e)).value();
}

Var few_scores(Var log_tau, Var query, std::span<const Var> class_vectors) {
  require_nonzero(query.value(), "few_scores");
  if (class_vectors.size() < 2) throw ConfigError("few_scores: need at least 2 classes");
  std::vector<Var> cos(class_vectors.size());
  for (std::size_t c = 0; c < class_vectors.size(); ++c) cos[c] = cosine(query, class_vectors[c]);
  return scale(concat(cos), exp(log_tau));
}

Tensor few_scores(const CosineClassifier& clf, const Tensor& query, std::span<const Tensor> class_vectors) {
  Tape tape;
  std::vector<Var> cv;
  for (const auto& c : class_vectors) cv.push_back(tape.constant(c));
  return few_scores(tape.constant(clf.log_tau), tape.constant(query), cv).value();
}

Var loss_supervised(Var scores, std::size_t label) { return cross_entropy(scores, label); }

double loss_supervised(const Tensor& scores, std::size_t label) {
  Tape tape;
  return loss_supervised(tape.constant(scores), label).value().item();
}

Var loss_episode(std::span<const Var> query_scores, std::span<const std::size_t> labels) {
  if (query_scores.empty()) throw DataError("loss_episode: empty query set");
  if (query_scores.size() != labels.size()) throw ShapeError("loss_episode: scores and labels differ in length");
  std::map<std::size_t, std::vector<Var>> per_class;
  for (std::size_t q = 0; q < query_scores.size(); ++q) {
    per_class[labels[q]].push_back(cross_entropy(query_scores[q], labels[q]));
  }
  std::vector<Var> class_means;
  class_means.reserve(per_class.size());
  for (auto& [_, losses] : per_class) class_means.push_back(mean(losses));
  return mean(class_means);
}

double loss_episode(std::span<const Tensor> query_scores, std::span<const std::size_t> labels) {
  Tape tape;
  std::vector<Var> qs;
  for (const auto& s : query_scores) qs.push_back(tape.constant(s));
  return loss_episode(qs, labels).value().item();
}

}  // namespace dmin
