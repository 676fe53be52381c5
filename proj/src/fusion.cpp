#include "diagfuse/fusion.hpp"

#include <algorithm>

#include "diagfuse/errors.hpp"
#include "diagfuse/rng.hpp"

namespace diagfuse {
namespace {

void require_annotations(const Tensor& a) {
  if (a.rank() != 4 || a.dim(1) != 2) {
    throw ShapeError("fusion: annotations must be n x 2 x h x w, got " + shape_string(a.dims()));
  }
}

// Channel ch of every rater, as an n x h x w tensor.
Tensor channel_stack(const Tensor& a, std::size_t ch) {
  const std::size_t n = a.dim(0), hw = a.dim(2) * a.dim(3);
  Tensor out({n, a.dim(2), a.dim(3)});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < hw; ++p) out[i * hw + p] = a[(i * 2 + ch) * hw + p];
  return out;
}

}  // namespace

void clamp_unit(Tensor& fused) {
  for (auto& v : fused.values()) v = std::clamp(v, 0.0, 1.0);
}

ExpertnessMap normalize_expertness(const Tensor& raw) {
  if (raw.rank() != 3) throw ShapeError("normalize_expertness: raw must be n x h x w");
  if (!raw.all_finite()) throw NumericError("normalize_expertness: non-finite raw map");
  ad::Tape tape;
  ExpertnessMap m{raw, ad::softmax(tape.constant(raw), 0).value()};
  return m;
}

Tensor annotations_tensor(const std::vector<RaterAnnotation>& annotations) {
  if (annotations.empty()) throw DataError("annotations_tensor: no raters");
  const std::size_t h = annotations[0].disc.height(), w = annotations[0].disc.width();
  Tensor out({annotations.size(), 2, h, w});
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i];
    if (a.disc.height() != h || a.disc.width() != w || a.cup.height() != h || a.cup.width() != w) {
      throw ShapeError("annotations_tensor: rater masks differ in size");
    }
    for (std::size_t p = 0; p < h * w; ++p) {
      out[(i * 2 + 0) * h * w + p] = a.disc[p] ? 1.0 : 0.0;
      out[(i * 2 + 1) * h * w + p] = a.cup[p] ? 1.0 : 0.0;
    }
  }
  return out;
}

Tensor fuse(const Tensor& annotations, const ExpertnessMap& m) {
  require_annotations(annotations);
  const Tensor& wts = m.normalized;
  if (wts.rank() != 3 || wts.dim(0) != annotations.dim(0)) {
    throw ShapeError("fuse: expertness map " + shape_string(wts.dims()) + " does not match " +
                     std::to_string(annotations.dim(0)) + " raters");
  }
  if (wts.dim(1) != annotations.dim(2) || wts.dim(2) != annotations.dim(3)) {
    throw ShapeError("fuse: spatial dims differ");
  }
  const std::size_t n = annotations.dim(0), hw = wts.dim(1) * wts.dim(2);
  Tensor out({2, wts.dim(1), wts.dim(2)}, 0.0);
  for (std::size_t ch = 0; ch < 2; ++ch)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < hw; ++p)
        out[ch * hw + p] += annotations[(i * 2 + ch) * hw + p] * wts[i * hw + p];
  clamp_unit(out);
  return out;
}

ad::Var fuse_on_tape(ad::Tape& tape, const Tensor& annotations, ad::Var normalized) {
  require_annotations(annotations);
  const Shape& d = normalized.dims();
  if (d.size() != 3 || d[0] != annotations.dim(0) || d[1] != annotations.dim(2) ||
      d[2] != annotations.dim(3)) {
    throw ShapeError("fuse: expertness map " + shape_string(d) + " does not match annotations " +
                     shape_string(annotations.dims()));
  }
  std::vector<ad::Var> channels;
  for (std::size_t ch = 0; ch < 2; ++ch) {
    ad::Var s = tape.constant(channel_stack(annotations, ch));
    ad::Var summed = ad::sum_axis(ad::mul(s, normalized), 0);
    channels.push_back(ad::reshape(summed, {1, d[1], d[2]}));
  }
  return ad::concat(channels);
}

Tensor majority_vote(const Tensor& annotations) {
  require_annotations(annotations);
  const std::size_t n = annotations.dim(0);
  const std::size_t hw = annotations.dim(2) * annotations.dim(3);
  // Accumulates s_i * (1/n) in rater order, the same arithmetic as fuse()
  // under uniform weights.
  const double weight = 1.0 / static_cast<double>(n);
  Tensor out({2, annotations.dim(2), annotations.dim(3)}, 0.0);
  for (std::size_t ch = 0; ch < 2; ++ch)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < hw; ++p)
        out[ch * hw + p] += annotations[(i * 2 + ch) * hw + p] * weight;
  clamp_unit(out);
  return out;
}

std::size_t random_rater_index(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DataError("random_fuse: no raters");
  Rng rng(seed, 0x7a4d);
  return rng.index(n);
}

Tensor random_fuse(const Tensor& annotations, std::uint64_t seed) {
  require_annotations(annotations);
  const std::size_t pick = random_rater_index(annotations.dim(0), seed);
  const std::size_t plane = 2 * annotations.dim(2) * annotations.dim(3);
  Tensor out({2, annotations.dim(2), annotations.dim(3)});
  std::copy(annotations.data() + pick * plane, annotations.data() + (pick + 1) * plane, out.data());
  return out;
}

Tensor threshold_fused(const Tensor& fused, double thresh) {
  Tensor out(fused.dims());
  for (std::size_t i = 0; i < fused.size(); ++i) out[i] = fused[i] >= thresh ? 1.0 : 0.0;
  return out;
}

}  // namespace diagfuse
