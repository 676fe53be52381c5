#include "diagfuse/mask.hpp"

#include <algorithm>
#include <numeric>

#include "diagfuse/errors.hpp"

namespace diagfuse {
namespace {

void require_same(const Mask& a, const Mask& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError(std::string(what) + ": mask dims differ");
  }
}

// Labels 4-connected components; returns per-pixel label (0 = background)
// and the size of each label (index 0 unused).
std::vector<std::size_t> label_components(const Mask& m, std::vector<std::size_t>& sizes) {
  const std::size_t h = m.height(), w = m.width();
  std::vector<std::size_t> label(m.size(), 0);
  sizes.assign(1, 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < m.size(); ++start) {
    if (!m[start] || label[start]) continue;
    const std::size_t id = sizes.size();
    sizes.push_back(0);
    stack.push_back(start);
    label[start] = id;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++sizes[id];
      const std::size_t y = p / w, x = p % w;
      auto visit = [&](std::size_t q) {
        if (m[q] && !label[q]) {
          label[q] = id;
          stack.push_back(q);
        }
      };
      if (y > 0) visit(p - w);
      if (y + 1 < h) visit(p + w);
      if (x > 0) visit(p - 1);
      if (x + 1 < w) visit(p + 1);
    }
  }
  return label;
}

}  // namespace

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(px_.begin(), px_.end(), std::uint8_t{1}));
}

Tensor Mask::to_tensor() const {
  Tensor t({h_, w_});
  for (std::size_t i = 0; i < px_.size(); ++i) t[i] = px_[i] ? 1.0 : 0.0;
  return t;
}

Mask Mask::threshold(std::span<const double> values, std::size_t h, std::size_t w,
                     double thresh) {
  if (values.size() != h * w) throw ShapeError("Mask::threshold: size mismatch");
  Mask m(h, w);
  for (std::size_t i = 0; i < values.size(); ++i) m[i] = values[i] >= thresh ? 1 : 0;
  return m;
}

std::size_t component_count(const Mask& m) {
  std::vector<std::size_t> sizes;
  label_components(m, sizes);
  return sizes.size() - 1;
}

Mask largest_component(const Mask& m) {
  std::vector<std::size_t> sizes;
  const auto label = label_components(m, sizes);
  if (sizes.size() <= 2) return m;
  const std::size_t keep = static_cast<std::size_t>(
      std::max_element(sizes.begin() + 1, sizes.end()) - sizes.begin());
  Mask out(m.height(), m.width());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = label[i] == keep ? 1 : 0;
  return out;
}

Mask intersect(const Mask& a, const Mask& b) {
  require_same(a, b, "intersect");
  Mask out(a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && b[i]) ? 1 : 0;
  return out;
}

bool contained_in(const Mask& inner, const Mask& outer) {
  require_same(inner, outer, "contained_in");
  for (std::size_t i = 0; i < inner.size(); ++i)
    if (inner[i] && !outer[i]) return false;
  return true;
}

double binary_iou(const Mask& a, const Mask& b) {
  require_same(a, b, "binary_iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

bool row_extent(const Mask& m, std::size_t& first, std::size_t& last) {
  bool found = false;
  for (std::size_t y = 0; y < m.height(); ++y) {
    for (std::size_t x = 0; x < m.width(); ++x) {
      if (m(y, x)) {
        if (!found) first = y;
        last = y;
        found = true;
        break;
      }
    }
  }
  return found;
}

}  // namespace diagfuse
