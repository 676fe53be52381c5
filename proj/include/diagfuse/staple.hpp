#pragma once

// Simultaneous truth and performance level estimation: EM over a binary
// hidden truth with one sensitivity p_i and specificity q_i per rater.

#include <cstddef>
#include <vector>

#include "diagfuse/mask.hpp"
#include "diagfuse/tensor.hpp"

namespace diagfuse {

struct StapleOptions {
  double tol = 1e-6;
  std::size_t max_iter = 100;
};

struct StapleResult {
  Tensor posterior;  // h x w, P(truth = 1 | votes)
  std::vector<double> p;  // sensitivities
  std::vector<double> q;  // specificities
  std::size_t iterations = 0;
  bool converged = false;
};

inline constexpr double kStapleInit = 0.99999;
inline constexpr double kStapleClamp = 1e-6;

// Mean foreground fraction over all raters and pixels.
double staple_default_prior(const std::vector<Mask>& raters);

// EM from p = q = 0.99999. Each iteration is an E-step followed by an
// M-step; iteration stops when the largest parameter change drops below tol.
// The returned posterior is the E-step under the returned parameters.
// Unanimous all-foreground or all-background input returns the consensus
// with converged = true and zero iterations.
StapleResult staple_fuse(const std::vector<Mask>& raters, double prior,
                         const StapleOptions& options = {});
// Per-pixel prior (h x w, values in (0,1)).
StapleResult staple_fuse(const std::vector<Mask>& raters, const Tensor& prior,
                         const StapleOptions& options = {});

// Disc and cup channels of n x 2 x h x w annotations fused independently,
// each with its default prior. Returns 2 x h x w posteriors.
Tensor staple_fuse_annotations(const Tensor& annotations, const StapleOptions& options = {});

}  // namespace diagfuse
