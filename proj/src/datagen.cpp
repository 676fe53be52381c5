#include "diagfuse/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "diagfuse/errors.hpp"
#include "diagfuse/models.hpp"
#include "diagfuse/rng.hpp"

namespace diagfuse {
namespace {

constexpr double kMinBoundaryPx = 1.5;
constexpr std::uint64_t kRaterStream = 0x5a7e;
constexpr std::uint64_t kImageStream = 0x1a6e;

// Harmonic coefficients c_k ~ N(0,1)/k rescaled to unit RMS over theta.
void unit_rms_pattern(Rng& rng, std::array<double, RadialShape::kHarmonics>& amp,
                      std::array<double, RadialShape::kHarmonics>& phase) {
  double power = 0.0;
  for (std::size_t k = 0; k < amp.size(); ++k) {
    amp[k] = rng.normal() / static_cast<double>(k + 1);
    phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    power += 0.5 * amp[k] * amp[k];
  }
  const double scale = power > 0.0 ? 1.0 / std::sqrt(power) : 0.0;
  for (auto& a : amp) a *= scale;
}

double smoothstep_inside(double signed_dist_px, double softness) {
  return 1.0 / (1.0 + std::exp(-signed_dist_px / softness));
}

}  // namespace

double RadialShape::radius(double theta) const {
  const double c = std::cos(theta), s = std::sin(theta);
  const double ellipse = rx * ry / std::sqrt((ry * c) * (ry * c) + (rx * s) * (rx * s));
  double mod = 1.0;
  for (std::size_t k = 0; k < kHarmonics; ++k) {
    mod += amp[k] * std::cos(static_cast<double>(k + 1) * theta + phase[k]);
  }
  return ellipse * mod;
}

double RadialOffset::at(double theta) const {
  double v = bias_px;
  for (std::size_t k = 0; k < RadialShape::kHarmonics; ++k) {
    v += amp[k] * std::cos(static_cast<double>(k + 1) * theta + phase[k]);
  }
  return v;
}

Mask rasterize(const RadialShape& shape, const RadialOffset& offset, std::size_t h,
               std::size_t w) {
  Mask m(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dy = static_cast<double>(y) - shape.cy;
      const double dx = static_cast<double>(x) - shape.cx;
      const double theta = std::atan2(dy, dx);
      const double r = std::max(shape.radius(theta) + offset.at(theta), kMinBoundaryPx);
      m(y, x) = std::hypot(dy, dx) <= r ? 1 : 0;
    }
  }
  return largest_component(m);
}

Sample synth_sample(std::uint64_t seed, const GenConfig& config) {
  if (config.h < 32 || config.w < 32) throw DataError("synth_sample: h and w must be >= 32");
  Rng rng(seed, kImageStream);
  const double h = static_cast<double>(config.h), w = static_cast<double>(config.w);
  const double scale = std::min(h, w);

  Sample s;
  s.seed = seed;
  RadialShape& disc = s.disc_shape;
  disc.cy = h / 2.0 + rng.uniform(-0.06, 0.06) * scale;
  disc.cx = w / 2.0 + rng.uniform(-0.06, 0.06) * scale;
  disc.ry = rng.uniform(0.22, 0.29) * scale;
  disc.rx = disc.ry * rng.uniform(0.88, 1.05);
  unit_rms_pattern(rng, disc.amp, disc.phase);
  for (auto& a : disc.amp) a *= 0.03;

  const bool glaucoma = rng.uniform() < config.glaucoma_frac;
  const double cdr = glaucoma ? rng.uniform(config.tau_gen, 0.85) : rng.uniform(0.3, config.tau_gen);
  RadialShape& cup = s.cup_shape;
  cup.cy = disc.cy + rng.uniform(-0.5, 0.5);
  cup.cx = disc.cx + rng.uniform(-0.5, 0.5);
  cup.ry = cdr * disc.ry;
  cup.rx = cup.ry * rng.uniform(0.9, 1.1) * disc.rx / disc.ry;
  unit_rms_pattern(rng, cup.amp, cup.phase);
  for (auto& a : cup.amp) a *= 0.04;

  s.true_disc = rasterize(disc, {}, config.h, config.w);
  s.true_cup = largest_component(intersect(rasterize(cup, {}, config.h, config.w), s.true_disc));
  s.true_cdr = vcdr_score(s.true_disc, s.true_cup);
  s.label = s.true_cdr > config.tau_gen ? 1 : 0;

  // Image: warm background with slow shading, bright disc, subtle blurred cup.
  const std::array<double, 3> base{0.58, 0.27, 0.13};
  const std::array<double, 3> disc_tint{0.26, 0.28, 0.18};
  const std::array<double, 3> cup_tint{0.09, 0.11, 0.09};
  const double gain = rng.uniform(0.9, 1.1);
  std::array<double, 3> fy{}, fx{}, ph{};
  for (std::size_t j = 0; j < 3; ++j) {
    fy[j] = rng.uniform(0.5, 2.0) / h;
    fx[j] = rng.uniform(0.5, 2.0) / w;
    ph[j] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  s.image = Tensor({config.channels, config.h, config.w});
  for (std::size_t y = 0; y < config.h; ++y) {
    for (std::size_t x = 0; x < config.w; ++x) {
      const double yy = static_cast<double>(y), xx = static_cast<double>(x);
      double shade = 0.0;
      for (std::size_t j = 0; j < 3; ++j)
        shade += 0.03 * std::sin(2.0 * std::numbers::pi * (fy[j] * yy + fx[j] * xx) + ph[j]);
      const double vr = std::hypot(yy - h / 2.0, xx - w / 2.0) / (0.5 * scale);
      const double vignette = -0.12 * vr * vr;

      const double td = std::atan2(yy - disc.cy, xx - disc.cx);
      const double in_disc = smoothstep_inside(disc.radius(td) - std::hypot(yy - disc.cy, xx - disc.cx), 0.8);
      const double tc = std::atan2(yy - cup.cy, xx - cup.cx);
      const double in_cup = smoothstep_inside(cup.radius(tc) - std::hypot(yy - cup.cy, xx - cup.cx), 1.5);
      for (std::size_t c = 0; c < config.channels; ++c) {
        const std::size_t k = c % 3;
        const double v = gain * (base[k] + shade + vignette + in_disc * disc_tint[k] +
                                 in_disc * in_cup * cup_tint[k]) +
                         rng.normal(0.0, 0.03);
        s.image.at(c, y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return s;
}

std::vector<RaterAnnotation> simulate_raters(const Sample& truth,
                                             const std::vector<RaterProfile>& profiles) {
  if (profiles.empty()) throw DataError("simulate_raters: need at least one profile");
  std::vector<RaterAnnotation> out;
  out.reserve(profiles.size());
  for (const RaterProfile& p : profiles) {
    Rng rng(truth.seed, kRaterStream + static_cast<std::uint64_t>(p.seed_offset));
    RadialOffset disc_off, cup_off;
    unit_rms_pattern(rng, disc_off.amp, disc_off.phase);
    unit_rms_pattern(rng, cup_off.amp, cup_off.phase);
    for (auto& a : disc_off.amp) a *= p.boundary_noise_px;
    for (auto& a : cup_off.amp) a *= p.boundary_noise_px;
    cup_off.bias_px = p.cup_bias_px;

    RaterAnnotation ann;
    ann.disc = rasterize(truth.disc_shape, disc_off, truth.height(), truth.width());
    ann.cup = largest_component(
        intersect(rasterize(truth.cup_shape, cup_off, truth.height(), truth.width()), ann.disc));
    out.push_back(std::move(ann));
  }
  return out;
}

Mask degrade_mask(const Mask& mask, double target_iou, std::uint64_t seed) {
  if (!(target_iou > 0.0 && target_iou <= 1.0)) {
    throw DataError("degrade_mask: target_iou must be in (0, 1]");
  }
  if (target_iou >= 1.0) return mask;
  const std::size_t h = mask.height(), w = mask.width();
  if (mask.empty()) throw DataError("degrade_mask: empty mask, achieved IoU 1");

  double cy = 0, cx = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (mask(y, x)) {
        cy += static_cast<double>(y);
        cx += static_cast<double>(x);
      }
  cy /= static_cast<double>(mask.count());
  cx /= static_cast<double>(mask.count());

  // Angular pattern: positive sectors grow, negative sectors shrink.
  Rng rng(seed);
  RadialOffset pattern;
  pattern.bias_px = rng.uniform(-0.6, 0.6);
  unit_rms_pattern(rng, pattern.amp, pattern.phase);
  for (std::size_t k = 3; k < pattern.amp.size(); ++k) pattern.amp[k] = 0.0;
  std::vector<double> sector(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      sector[y * w + x] =
          pattern.at(std::atan2(static_cast<double>(y) - cy, static_cast<double>(x) - cx));

  Mask current = mask;
  double iou = 1.0;
  std::size_t budget_scale = 1;
  for (int iter = 0; iter < 100; ++iter) {
    std::size_t uni = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) uni += (mask[i] || current[i]) ? 1 : 0;
    const std::size_t k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(0.015 * static_cast<double>(uni))) / budget_scale);

    // Weighted sampling without replacement: keep the k largest u^(1/weight).
    std::vector<std::pair<double, std::size_t>> keyed;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const bool in = current(y, x);
        const bool up = y > 0 && current(y - 1, x), dn = y + 1 < h && current(y + 1, x);
        const bool lf = x > 0 && current(y, x - 1), rt = x + 1 < w && current(y, x + 1);
        const bool edge_out = y == 0 || x == 0 || y + 1 == h || x + 1 == w;
        const double n = sector[y * w + x];
        const bool grow = !in && n > 0.0 && (up || dn || lf || rt);
        const bool shrink = in && n < 0.0 && (edge_out || !up || !dn || !lf || !rt);
        if (grow || shrink) {
          const double u = std::max(rng.uniform(), 1e-300);
          keyed.emplace_back(std::log(u) / std::abs(n), y * w + x);
        }
      }
    }
    if (keyed.empty()) break;
    const std::size_t take = std::min(k, keyed.size());
    std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(take), keyed.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
    Mask next = current;
    for (std::size_t i = 0; i < take; ++i) next[keyed[i].second] ^= 1;
    next = largest_component(next);
    if (next.empty()) break;

    const double next_iou = binary_iou(next, mask);
    if (next_iou < target_iou - 0.05) {
      // Overshot: smaller step next time, redrawn from fresh noise.
      if (k > 1) budget_scale *= 2;
      continue;
    }
    if (budget_scale > 1) budget_scale /= 2;
    current = std::move(next);
    iou = next_iou;
    if (iou <= target_iou + 0.01) return current;
  }
  if (std::abs(iou - target_iou) <= 0.05) return current;
  throw DataError("degrade_mask: target IoU " + std::to_string(target_iou) +
                  " unreachable, achieved " + std::to_string(iou));
}

RaterAnnotation degrade_pair(const Mask& disc, const Mask& cup, double target_iou,
                             std::uint64_t seed) {
  RaterAnnotation out;
  out.disc = degrade_mask(disc, target_iou, Rng::mix(seed, 1));
  out.cup = largest_component(intersect(degrade_mask(cup, target_iou, Rng::mix(seed, 2)), out.disc));
  if (out.cup.empty()) {
    // Keep one cup pixel: the disc pixel nearest the original cup centroid.
    double cy = 0, cx = 0;
    std::size_t n = 0;
    for (std::size_t y = 0; y < cup.height(); ++y)
      for (std::size_t x = 0; x < cup.width(); ++x)
        if (cup(y, x) || (cup.empty() && disc(y, x))) {
          cy += static_cast<double>(y);
          cx += static_cast<double>(x);
          ++n;
        }
    if (n > 0) {
      cy /= static_cast<double>(n);
      cx /= static_cast<double>(n);
    }
    double best = 1e300;
    std::size_t best_i = 0;
    for (std::size_t y = 0; y < disc.height(); ++y)
      for (std::size_t x = 0; x < disc.width(); ++x)
        if (out.disc(y, x)) {
          const double d = std::hypot(static_cast<double>(y) - cy, static_cast<double>(x) - cx);
          if (d < best) {
            best = d;
            best_i = y * disc.width() + x;
          }
        }
    out.cup[best_i] = 1;
  }
  return out;
}

std::vector<RaterProfile> default_profiles(std::size_t n) {
  if (n == 3) {
    return {{0.75, 0.0, 0}, {1.5, 4.0, 1}, {1.5, -4.0, 2}};
  }
  std::vector<RaterProfile> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({0.75 + 0.5 * static_cast<double>(i), 0.0, static_cast<std::int64_t>(i)});
  }
  return out;
}

}  // namespace diagfuse
