#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "diagfuse/tensor.hpp"

namespace diagfuse {

// Binary h x w mask, row-major, values 0 or 1.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t h, std::size_t w) : h_(h), w_(w), px_(h * w, 0) {}

  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t size() const { return px_.size(); }

  std::uint8_t operator()(std::size_t y, std::size_t x) const { return px_[y * w_ + x]; }
  std::uint8_t& operator()(std::size_t y, std::size_t x) { return px_[y * w_ + x]; }
  std::uint8_t operator[](std::size_t i) const { return px_[i]; }
  std::uint8_t& operator[](std::size_t i) { return px_[i]; }

  std::size_t count() const;
  bool empty() const { return count() == 0; }

  // 1.0 / 0.0 values, dims {h, w}.
  Tensor to_tensor() const;
  static Mask threshold(std::span<const double> values, std::size_t h, std::size_t w,
                        double thresh = 0.5);

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t h_ = 0, w_ = 0;
  std::vector<std::uint8_t> px_;
};

// Number of 4-connected foreground components.
std::size_t component_count(const Mask& m);
// Keeps only the largest 4-connected component (ties: first in scan order).
Mask largest_component(const Mask& m);
Mask intersect(const Mask& a, const Mask& b);
// True if every foreground pixel of inner is foreground in outer.
bool contained_in(const Mask& inner, const Mask& outer);
double binary_iou(const Mask& a, const Mask& b);

// Inclusive row extent [first, last] of the foreground; false if empty.
bool row_extent(const Mask& m, std::size_t& first, std::size_t& last);

}  // namespace diagfuse
