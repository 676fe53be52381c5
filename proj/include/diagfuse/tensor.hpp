#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace diagfuse {

using Shape = std::vector<std::size_t>;

// 64-byte aligned storage. Vectorized reductions split work by address
// alignment, so a fixed alignment keeps results bit-identical across runs.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using AlignedVector = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_size(const Shape& dims);
std::string shape_string(const Shape& dims);

// Dense row-major array of doubles. A scalar has dims {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape dims, double fill = 0.0);
  Tensor(Shape dims, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  const Shape& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // Index helpers for rank 2 and rank 3 tensors.
  double& at(std::size_t i, std::size_t j) { return values_[i * dims_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * dims_[1] + j]; }
  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return values_[(c * dims_[1] + y) * dims_[2] + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return values_[(c * dims_[1] + y) * dims_[2] + x];
  }

  bool all_finite() const;
  Tensor reshaped(Shape dims) const;
  void fill(double v);

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape dims_;
  AlignedVector values_;
};

}  // namespace diagfuse
