#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace md {

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

// Allocator with a fixed 64-byte alignment. Every tensor buffer presenting
// the same alignment keeps SIMD kernels (Eigen dispatches on runtime pointer
// alignment) on one code path, so results are bitwise reproducible across
// allocations instead of varying with where the heap happened to place a
// buffer.
template <class T>
struct TensorAlloc {
  using value_type = T;
  static constexpr std::size_t kAlign = 64;

  TensorAlloc() = default;
  template <class U>
  TensorAlloc(const TensorAlloc<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(
        ::operator new(n * sizeof(T), std::align_val_t(kAlign)));
  }
  void deallocate(T* p, std::size_t n) {
    ::operator delete(p, n * sizeof(T), std::align_val_t(kAlign));
  }
  template <class U>
  bool operator==(const TensorAlloc<U>&) const {
    return true;
  }
  template <class U>
  bool operator!=(const TensorAlloc<U>&) const {
    return false;
  }
};

using AlignedVec = std::vector<double, TensorAlloc<double>>;

// Dense row-major fp64 tensor, rank 1..4. Double precision throughout: the
// verification story of this project rests on finite-difference gradient
// checks, which need fp64 headroom.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape)
      : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}
  Tensor(std::vector<int64_t> shape, double fill)
      : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}
  Tensor(std::vector<int64_t> shape, const std::vector<double>& data)
      : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    check(static_cast<int64_t>(data_.size()) == checked_numel(shape_),
          "Tensor: data size does not match shape");
  }

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, double v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(int i) const { return shape_.at(i); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  AlignedVec& raw() { return data_; }
  const AlignedVec& raw() const { return data_; }

  double& operator[](int64_t i) { return data_[i]; }
  double operator[](int64_t i) const { return data_[i]; }

  double& at(int64_t i, int64_t j) { return data_[i * shape_[1] + j]; }
  double at(int64_t i, int64_t j) const { return data_[i * shape_[1] + j]; }
  double& at(int64_t c, int64_t i, int64_t j) {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }
  double at(int64_t c, int64_t i, int64_t j) const {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }
  double& at(int64_t n, int64_t c, int64_t i, int64_t j) {
    return data_[((n * shape_[1] + c) * shape_[2] + i) * shape_[3] + j];
  }
  double at(int64_t n, int64_t c, int64_t i, int64_t j) const {
    return data_[((n * shape_[1] + c) * shape_[2] + i) * shape_[3] + j];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const;
  double min() const;
  double max() const;
  double sum() const;
  double mean() const;

  Tensor reshaped(std::vector<int64_t> shape) const;

  std::string shape_str() const;

 private:
  static int64_t checked_numel(const std::vector<int64_t>& shape);

  std::vector<int64_t> shape_;
  AlignedVec data_;
};

}  // namespace md
