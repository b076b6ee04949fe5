#include "bbkd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "bbkd/error.hpp"

namespace bbkd {

std::size_t shape_size(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>{});
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  require(data_.size() == shape_size(shape_), ErrorKind::ShapeMismatch,
          "tensor data length " + std::to_string(data_.size()) +
              " does not match shape " + shape_string(shape_));
  check_finite("Tensor construction");
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  t.check_finite("Tensor::full");
  return t;
}

double Tensor::item() const {
  require(data_.size() == 1, ErrorKind::ShapeMismatch,
          "item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void Tensor::check_finite(const char* where) const {
  if (!all_finite()) fail(ErrorKind::NonFinite, std::string("non-finite value in ") + where);
}

Tensor Tensor::reshaped(Shape shape) const {
  require(shape_size(shape) == data_.size(), ErrorKind::ShapeMismatch,
          "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::ShapeMismatch, std::string(where) + ": shapes " +
                                       shape_string(a.shape()) + " and " +
                                       shape_string(b.shape()) + " differ");
  }
}

Tensor axpby(double a, const Tensor& x, double b, const Tensor& y) {
  require_same_shape(x, y, "axpby");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
  out.check_finite("axpby");
  return out;
}

Tensor scaled(const Tensor& x, double s) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i];
  out.check_finite("scaled");
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace bbkd
