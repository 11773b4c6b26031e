#include "dmin/silhouette.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "dmin/episodes.hpp"
#include "dmin/errors.hpp"
#include "dmin/training.hpp"

namespace dmin {

double silhouette_score(std::span<const Tensor> points, std::span<const std::size_t> labels) {
  const std::size_t n = points.size();
  if (n != labels.size()) throw ShapeError("silhouette: points and labels differ in length");
  std::map<std::size_t, std::size_t> index;
  for (std::size_t lab : labels) index.emplace(lab, index.size());
  if (index.size() < 2) throw DataError("silhouette: need at least two clusters");
  const std::size_t k = index.size();

  std::vector<std::size_t> cluster(n);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    cluster[i] = index[labels[i]];
    ++count[cluster[i]];
  }

  // Per point, summed distance to each cluster.
  std::vector<double> sums(n * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t t = 0; t < points[i].size(); ++t) {
        const double diff = points[i][t] - points[j][t];
        d2 += diff * diff;
      }
      const double d = std::sqrt(d2);
      sums[i * k + cluster[j]] += d;
      sums[j * k + cluster[i]] += d;
    }
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = cluster[i];
    const double a = count[own] > 1 ? sums[i * k + own] / static_cast<double>(count[own] - 1) : 0.0;
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != own) b = std::min(b, sums[i * k + c] / static_cast<double>(count[c]));
    }
    const double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

std::string SeparationReport::to_csv() const {
  std::string out = "stage,label";
  const std::size_t d = before.empty() ? 0 : before.front().size();
  for (std::size_t t = 0; t < d; ++t) out += ",x" + std::to_string(t);
  out += '\n';
  char buf[32];
  auto emit = [&](const char* stage, const std::vector<Tensor>& rows) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out += stage;
      out += ',';
      out += labels[i];
      for (double v : rows[i].data()) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        out += buf;
      }
      out += '\n';
    }
  };
  emit("before", before);
  emit("after", after);
  return out;
}

SeparationReport separation_report(const Model& model, const Dataset& data, const SeparationConfig& cfg) {
  data.validate();
  check_compatible(model.config, data);
  const Episode ep = sample_episode(data, EpisodeConfig{cfg.way, cfg.shot, 1, cfg.seed}, 0);
  SeparationReport r;
  if (model.trained_stages < 2) {
    r.warning = "model has completed " + std::to_string(model.trained_stages) +
                " training stage(s); the DMM memory may be untrained";
  }
  for (const auto& it : ep.support) {
    r.before.push_back(model.encoder.encode(data.item(it.source).payload));
    r.local_labels.push_back(it.label);
    r.labels.push_back(data.class_names()[ep.classes[it.label]]);
  }
  r.after = apply_dmm(model, r.before);
  r.silhouette_before = silhouette_score(r.before, r.local_labels);
  r.silhouette_after = silhouette_score(r.after, r.local_labels);
  return r;
}

}  // namespace dmin
