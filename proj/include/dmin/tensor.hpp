#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dmin {

// Dense row-major array of doubles, rank 1 or 2. Scalars are rank-1 tensors
// of length 1.
class Tensor {
 public:
  Tensor() = default;

  static Tensor vector(std::vector<double> values);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor scalar(double value);
  static Tensor zeros(std::size_t n);
  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor zeros_like(const Tensor& other);

  std::size_t rank() const { return rank_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t dim(std::size_t axis) const { return dims_[axis]; }
  std::size_t rows() const { return dims_[0]; }
  std::size_t cols() const { return rank_ == 2 ? dims_[1] : 1; }
  bool is_scalar() const { return rank_ == 1 && data_.size() == 1; }
  bool same_shape(const Tensor& other) const {
    return rank_ == other.rank_ && dims_ == other.dims_;
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  std::span<const double> row(std::size_t r) const;
  std::span<double> row(std::size_t r);

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * dims_[1] + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * dims_[1] + c]; }

  double item() const;
  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.rank_ == b.rank_ && a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  std::size_t rank_ = 1;
  std::array<std::size_t, 2> dims_{0, 1};
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

// Plain (untaped) kernels. The taped versions in ops.hpp call these for the
// forward pass.
Tensor matvec(const Tensor& w, const Tensor& x);
Tensor squash(const Tensor& x);
Tensor softmax(const Tensor& x);
double pccs(const Tensor& a, const Tensor& b);
double cosine(const Tensor& a, const Tensor& b);

// Guard for every norm and variance denominator.
inline constexpr double kEpsilon = 1e-12;

}  // namespace dmin
