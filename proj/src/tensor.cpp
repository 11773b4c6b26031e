#include "dmin/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dmin/errors.hpp"

namespace dmin {

Tensor Tensor::vector(std::vector<double> values) {
  Tensor t;
  t.rank_ = 1;
  t.dims_ = {values.size(), 1};
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return vector(std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (rows * cols != values.size()) {
    throw ShapeError("matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " needs " + std::to_string(rows * cols) + " values, got " +
                     std::to_string(values.size()));
  }
  Tensor t;
  t.rank_ = 2;
  t.dims_ = {rows, cols};
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::scalar(double value) { return vector(std::vector<double>{value}); }

Tensor Tensor::zeros(std::size_t n) { return vector(std::vector<double>(n, 0.0)); }

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return matrix(rows, cols, std::vector<double>(rows * cols, 0.0));
}

Tensor Tensor::zeros_like(const Tensor& other) {
  Tensor t;
  t.rank_ = other.rank_;
  t.dims_ = other.dims_;
  t.data_.assign(other.data_.size(), 0.0);
  return t;
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  return std::span<const double>(data_).subspan(r * c, c);
}

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t c = cols();
  return std::span<double>(data_).subspan(r * c, c);
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_string());
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  if (rank_ == 1) return "[" + std::to_string(dims_[0]) + "]";
  return "[" + std::to_string(dims_[0]) + "x" + std::to_string(dims_[1]) + "]";
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Tensor matvec(const Tensor& w, const Tensor& x) {
  if (w.rank() != 2 || x.rank() != 1 || w.cols() != x.size()) {
    throw ShapeError("matvec: cannot multiply " + w.shape_string() + " by " + x.shape_string());
  }
  Tensor y = Tensor::zeros(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) y[r] = dot(w.row(r), x.data());
  return y;
}

// squash(x) = (|x|^2 / (1 + |x|^2)) * x / |x|, written as x * |x| / (1 + |x|^2)
// so the zero vector needs no special case.
Tensor squash(const Tensor& x) {
  const double n = l2_norm(x.data());
  const double f = n / (1.0 + n * n);
  Tensor y = x;
  for (double& v : y.data()) v *= f;
  return y;
}

Tensor softmax(const Tensor& x) {
  Tensor y = x;
  if (y.empty()) return y;
  const double m = *std::max_element(x.data().begin(), x.data().end());
  double total = 0.0;
  for (double& v : y.data()) {
    v = std::exp(v - m);
    total += v;
  }
  for (double& v : y.data()) v /= total;
  return y;
}

double pccs(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw ShapeError("pccs: length mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  const std::size_t n = a.size();
  if (n < 2) throw ShapeError("pccs: needs at least 2 samples, got " + std::to_string(n));
  double mean_a = 0.0;
  double mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double cov = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  const double na = std::sqrt(var_a);
  const double nb = std::sqrt(var_b);
  if (na <= kEpsilon || nb <= kEpsilon) return 0.0;
  return std::clamp(cov / (na * nb), -1.0, 1.0);
}

double cosine(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine: length mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  const double na = l2_norm(a.data());
  const double nb = l2_norm(b.data());
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a.data(), b.data()) / (std::max(na, kEpsilon) * std::max(nb, kEpsilon)),
                    -1.0, 1.0);
}

}  // namespace dmin
