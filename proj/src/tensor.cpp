#include "mutualdepth/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace md {

int64_t Tensor::checked_numel(const std::vector<int64_t>& shape) {
  check(!shape.empty() && shape.size() <= 4, "Tensor: rank must be 1..4");
  int64_t n = 1;
  for (int64_t d : shape) {
    check(d > 0, "Tensor: dimensions must be positive");
    n *= d;
  }
  return n;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::min() const {
  double m = std::numeric_limits<double>::infinity();
  for (double v : data_) m = std::fmin(m, v);
  return m;
}

double Tensor::max() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : data_) m = std::fmax(m, v);
  return m;
}

double Tensor::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

double Tensor::mean() const { return numel() ? sum() / static_cast<double>(numel()) : 0.0; }

Tensor Tensor::reshaped(std::vector<int64_t> shape) const {
  check(checked_numel(shape) == numel(), "Tensor: data size does not match shape");
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << "]";
  return os.str();
}

}  // namespace md
