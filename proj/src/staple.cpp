#include "diagfuse/staple.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "diagfuse/errors.hpp"

namespace diagfuse {
namespace {

double clamp_param(double v) { return std::clamp(v, kStapleClamp, 1.0 - kStapleClamp); }

void check_raters(const std::vector<Mask>& raters) {
  if (raters.empty()) throw DataError("staple_fuse: need at least one rater");
  for (const auto& r : raters) {
    if (r.height() != raters[0].height() || r.width() != raters[0].width() || r.size() == 0) {
      throw ShapeError("staple_fuse: rater masks differ in size");
    }
  }
}

void e_step(const std::vector<Mask>& raters, const Tensor& prior, const std::vector<double>& p,
            const std::vector<double>& q, Tensor& w) {
  const std::size_t n = raters.size();
  std::vector<double> log_p(n), log_1p(n), log_q(n), log_1q(n);
  for (std::size_t i = 0; i < n; ++i) {
    log_p[i] = std::log(p[i]);
    log_1p[i] = std::log1p(-p[i]);
    log_q[i] = std::log(q[i]);
    log_1q[i] = std::log1p(-q[i]);
  }
  for (std::size_t px = 0; px < w.size(); ++px) {
    double la = std::log(prior[px]);
    double lb = std::log1p(-prior[px]);
    for (std::size_t i = 0; i < n; ++i) {
      if (raters[i][px]) {
        la += log_p[i];
        lb += log_1q[i];
      } else {
        la += log_1p[i];
        lb += log_q[i];
      }
    }
    w[px] = 1.0 / (1.0 + std::exp(lb - la));
  }
}

}  // namespace

double staple_default_prior(const std::vector<Mask>& raters) {
  check_raters(raters);
  double fg = 0.0;
  for (const auto& r : raters) fg += static_cast<double>(r.count());
  return fg / static_cast<double>(raters.size() * raters[0].size());
}

StapleResult staple_fuse(const std::vector<Mask>& raters, double prior,
                         const StapleOptions& options) {
  check_raters(raters);
  const std::size_t h = raters[0].height(), w = raters[0].width();
  const double fraction = staple_default_prior(raters);
  if (fraction == 0.0 || fraction == 1.0) {
    StapleResult r;
    r.posterior = Tensor({h, w}, fraction);
    r.p.assign(raters.size(), 1.0 - kStapleClamp);
    r.q.assign(raters.size(), 1.0 - kStapleClamp);
    r.converged = true;
    return r;
  }
  if (!(prior > 0.0 && prior < 1.0)) {
    throw DataError("staple_fuse: prior must be in (0,1), got " + std::to_string(prior));
  }
  return staple_fuse(raters, Tensor({h, w}, prior), options);
}

StapleResult staple_fuse(const std::vector<Mask>& raters, const Tensor& prior,
                         const StapleOptions& options) {
  check_raters(raters);
  const std::size_t h = raters[0].height(), w = raters[0].width(), n = raters.size();
  if (prior.dims() != Shape{h, w}) {
    throw ShapeError("staple_fuse: prior dims " + shape_string(prior.dims()) + " vs masks " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  for (double v : prior.values()) {
    if (!(v > 0.0 && v < 1.0)) throw DataError("staple_fuse: prior values must be in (0,1)");
  }
  if (!(options.tol > 0.0)) throw DataError("staple_fuse: tol must be > 0");

  StapleResult r;
  r.posterior = Tensor({h, w}, 0.0);
  const double fraction = staple_default_prior(raters);
  if (fraction == 0.0 || fraction == 1.0) {
    r.posterior.fill(fraction);
    r.p.assign(n, 1.0 - kStapleClamp);
    r.q.assign(n, 1.0 - kStapleClamp);
    r.converged = true;
    return r;
  }

  r.p.assign(n, kStapleInit);
  r.q.assign(n, kStapleInit);
  Tensor& wt = r.posterior;
  while (r.iterations < options.max_iter) {
    e_step(raters, prior, r.p, r.q, wt);
    double sum_w = 0.0;
    for (double v : wt.values()) sum_w += v;
    const double sum_bg = static_cast<double>(wt.size()) - sum_w;
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double tp = 0.0, tn = 0.0;
      for (std::size_t px = 0; px < wt.size(); ++px) {
        if (raters[i][px]) {
          tp += wt[px];
        } else {
          tn += 1.0 - wt[px];
        }
      }
      const double p_new = sum_w > 0.0 ? clamp_param(tp / sum_w) : r.p[i];
      const double q_new = sum_bg > 0.0 ? clamp_param(tn / sum_bg) : r.q[i];
      delta = std::max({delta, std::abs(p_new - r.p[i]), std::abs(q_new - r.q[i])});
      r.p[i] = p_new;
      r.q[i] = q_new;
    }
    ++r.iterations;
    if (delta < options.tol) {
      r.converged = true;
      break;
    }
  }
  e_step(raters, prior, r.p, r.q, wt);
  return r;
}

Tensor staple_fuse_annotations(const Tensor& annotations, const StapleOptions& options) {
  if (annotations.rank() != 4 || annotations.dim(1) != 2) {
    throw ShapeError("staple_fuse: annotations must be n x 2 x h x w, got " +
                     shape_string(annotations.dims()));
  }
  const std::size_t n = annotations.dim(0), h = annotations.dim(2), w = annotations.dim(3);
  const std::size_t plane = h * w;
  Tensor out({2, h, w});
  for (std::size_t ch = 0; ch < 2; ++ch) {
    std::vector<Mask> raters;
    for (std::size_t i = 0; i < n; ++i) {
      raters.push_back(
          Mask::threshold(annotations.values().subspan((i * 2 + ch) * plane, plane), h, w));
    }
    const StapleResult r = staple_fuse(raters, staple_default_prior(raters), options);
    std::copy(r.posterior.values().begin(), r.posterior.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(ch * plane));
  }
  return out;
}

}  // namespace diagfuse
