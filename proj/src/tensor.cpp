#include "diagfuse/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "diagfuse/errors.hpp"

namespace diagfuse {

std::size_t shape_size(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape dims, double fill) : dims_(std::move(dims)) {
  if (dims_.empty()) throw ShapeError("tensor: empty dims");
  for (auto d : dims_)
    if (d == 0) throw ShapeError("tensor: zero-sized dim in " + shape_string(dims_));
  values_.assign(shape_size(dims_), fill);
}

Tensor::Tensor(Shape dims, std::vector<double> values)
    : dims_(std::move(dims)), values_(values.begin(), values.end()) {
  if (dims_.empty()) throw ShapeError("tensor: empty dims");
  for (auto d : dims_)
    if (d == 0) throw ShapeError("tensor: zero-sized dim in " + shape_string(dims_));
  if (shape_size(dims_) != values_.size()) {
    throw ShapeError("tensor: dims " + shape_string(dims_) + " do not match " +
                     std::to_string(values_.size()) + " values");
  }
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape dims) const {
  if (shape_size(dims) != values_.size()) {
    throw ShapeError("reshape: " + shape_string(dims_) + " -> " + shape_string(dims));
  }
  Tensor out = *this;
  out.dims_ = std::move(dims);
  return out;
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

}  // namespace diagfuse
