#pragma once

// Expertness-weighted fusion of rater annotations and the simple baselines.
//
// Annotations are stacked as an n x 2 x h x w tensor (rater, {disc, cup},
// row, column). Expertness maps are n x h x w, one channel per rater shared
// by the disc and cup channels, normalized by a per-pixel softmax over raters.

#include <cstdint>
#include <vector>

#include "diagfuse/autodiff.hpp"
#include "diagfuse/datagen.hpp"
#include "diagfuse/tensor.hpp"

namespace diagfuse {

struct ExpertnessMap {
  Tensor raw;         // n x h x w, unbounded
  Tensor normalized;  // n x h x w, per-pixel weights summing to 1
};

ExpertnessMap normalize_expertness(const Tensor& raw);

Tensor annotations_tensor(const std::vector<RaterAnnotation>& annotations);

// fused[ch, p] = sum_i m.normalized[i, p] * annotations[i, ch, p]
Tensor fuse(const Tensor& annotations, const ExpertnessMap& m);
// Same sum on a tape, differentiable through `normalized`.
ad::Var fuse_on_tape(ad::Tape& tape, const Tensor& annotations, ad::Var normalized);

// Per-pixel mean over raters.
Tensor majority_vote(const Tensor& annotations);
// One rater drawn uniformly per call (per sample).
Tensor random_fuse(const Tensor& annotations, std::uint64_t seed);
std::size_t random_rater_index(std::size_t n, std::uint64_t seed);

// Clips rounding excursions (weights summing to 1 +- ulp) back into [0, 1].
void clamp_unit(Tensor& fused);

// Thresholds a fused 2 x h x w tensor to {0, 1}.
Tensor threshold_fused(const Tensor& fused, double thresh = 0.5);

}  // namespace diagfuse
