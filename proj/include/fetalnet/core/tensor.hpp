#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fetalnet/core/error.hpp"

namespace fetalnet {

/// Dimensions of a batch of feature maps, NCHW order.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  constexpr std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  constexpr std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  constexpr std::size_t sample() const { return static_cast<std::size_t>(c) * h * w; }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << s.n << "x" << s.c << "x" << s.h << "x" << s.w;
  return os.str();
}

/// Dense NCHW double-precision tensor. Also used for 1-D and 2-D parameters
/// by leaving the leading dimensions at 1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(int n, int c, int h, int w, double fill = 0.0) : Tensor(Shape{n, c, h, w}, fill) {}

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }
  double at(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }

  double* sample(int n) { return data_.data() + static_cast<std::size_t>(n) * shape_.sample(); }
  const double* sample(int n) const {
    return data_.data() + static_cast<std::size_t>(n) * shape_.sample();
  }
  double* plane(int n, int c) { return sample(n) + static_cast<std::size_t>(c) * shape_.plane(); }
  const double* plane(int n, int c) const {
    return sample(n) + static_cast<std::size_t>(c) * shape_.plane();
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(0.0); }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o, "tensor +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Tensor& operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  void require_same_shape(const Tensor& o, const char* where) const {
    if (!(shape_ == o.shape_)) {
      throw ContractViolation(std::string(where) + ": expected shape " + to_string(shape_) +
                              ", got " + to_string(o.shape_));
    }
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_{};
  std::vector<double> data_;
};

/// Throws ContractViolation unless `t` has the expected shape.
inline void expect_shape(const Tensor& t, const Shape& expected, const std::string& where) {
  if (!(t.shape() == expected)) {
    throw ContractViolation(where + ": expected " + to_string(expected) + ", got " +
                            to_string(t.shape()));
  }
}

inline void expect_channels(const Tensor& t, int channels, const std::string& where) {
  if (t.c() != channels) {
    throw ContractViolation(where + ": expected " + std::to_string(channels) +
                            " channels, got " + std::to_string(t.c()));
  }
}

}  // namespace fetalnet
