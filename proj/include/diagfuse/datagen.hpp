#pragma once

// Synthetic fundus-like samples: a textured background with a bright disc
// and a subtler nested cup, ground-truth masks, simulated rater annotations
// and a glaucoma label derived from the vertical cup-to-disc ratio.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "diagfuse/mask.hpp"
#include "diagfuse/tensor.hpp"

namespace diagfuse {

struct GenConfig {
  std::size_t h = 64;
  std::size_t w = 64;
  std::size_t channels = 3;
  double tau_gen = 0.6;        // vCDR above which a sample is glaucomatous
  double glaucoma_frac = 0.5;
};

// Star-shaped boundary around (cy, cx): an ellipse radius modulated by
// low-order harmonics, r(theta) = r_ellipse(theta) * (1 + sum_k amp_k cos(k theta + phase_k)).
struct RadialShape {
  static constexpr std::size_t kHarmonics = 6;
  double cy = 0, cx = 0, ry = 1, rx = 1;
  std::array<double, kHarmonics> amp{};
  std::array<double, kHarmonics> phase{};

  double radius(double theta) const;
};

// Smooth radial displacement in pixels, harmonics 1..6.
struct RadialOffset {
  double bias_px = 0;
  std::array<double, RadialShape::kHarmonics> amp{};
  std::array<double, RadialShape::kHarmonics> phase{};

  double at(double theta) const;
};

struct RaterProfile {
  double boundary_noise_px = 0.0;
  double cup_bias_px = 0.0;  // positive over-segments the cup rim
  std::int64_t seed_offset = 0;
};

struct RaterAnnotation {
  Mask disc;
  Mask cup;
};

struct Sample {
  std::string id;
  std::uint64_t seed = 0;
  Tensor image;  // channels x h x w, values in [0,1]
  Mask true_disc;
  Mask true_cup;
  std::vector<RaterAnnotation> annotations;
  int label = 0;
  double true_cdr = 0.0;
  RadialShape disc_shape;
  RadialShape cup_shape;

  std::size_t height() const { return true_disc.height(); }
  std::size_t width() const { return true_disc.width(); }
  std::size_t rater_count() const { return annotations.size(); }
};

// Rasterizes the region d(p) <= shape.radius(theta) + offset(theta), with the
// boundary radius floored at 1.5 px, reduced to its largest 4-connected component.
Mask rasterize(const RadialShape& shape, const RadialOffset& offset, std::size_t h,
               std::size_t w);

Sample synth_sample(std::uint64_t seed, const GenConfig& config);

// Annotations for every profile; cup is clipped to the rater's own disc.
std::vector<RaterAnnotation> simulate_raters(const Sample& truth,
                                             const std::vector<RaterProfile>& profiles);

// Erodes/dilates boundary pixels with a random angular pattern until the IoU
// with the input is within 0.05 of target_iou. Throws DataError with the
// achieved IoU if 100 iterations are not enough.
Mask degrade_mask(const Mask& mask, double target_iou, std::uint64_t seed);

// Degrades disc and cup independently, then clips the cup to the degraded disc.
RaterAnnotation degrade_pair(const Mask& disc, const Mask& cup, double target_iou,
                             std::uint64_t seed);

// One unbiased low-noise rater and two raters biased by -/+ 4 px on the cup
// for n == 3; otherwise increasing noise with no bias.
std::vector<RaterProfile> default_profiles(std::size_t n);

}  // namespace diagfuse
