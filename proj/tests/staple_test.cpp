#include "diagfuse/staple.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "diagfuse/errors.hpp"
#include "diagfuse/rng.hpp"
#include "support/staple_oracle.hpp"

namespace diagfuse {
namespace {

Mask random_mask(Rng& rng, std::size_t h, std::size_t w, double p) {
  Mask m(h, w);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform() < p;
  return m;
}

std::vector<std::vector<int>> as_votes(const std::vector<Mask>& raters) {
  std::vector<std::vector<int>> v;
  for (const auto& r : raters) {
    std::vector<int> row;
    for (std::size_t i = 0; i < r.size(); ++i) row.push_back(r[i]);
    v.push_back(row);
  }
  return v;
}

Mask thresholded(const Tensor& posterior, std::size_t h, std::size_t w) {
  return Mask::threshold(posterior.values(), h, w);
}

TEST(StapleTest, PerfectRatersRecoverTruthAtUpperClamp) {
  Mask truth(4, 4);
  for (std::size_t y = 1; y < 3; ++y)
    for (std::size_t x = 0; x < 3; ++x) truth(y, x) = 1;
  const std::vector<Mask> raters{truth, truth};
  const double prior = static_cast<double>(truth.count()) / 16.0;
  const StapleResult r = staple_fuse(raters, prior);
  EXPECT_EQ(thresholded(r.posterior, 4, 4), truth);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_DOUBLE_EQ(r.p[i], 1.0 - kStapleClamp);
    EXPECT_DOUBLE_EQ(r.q[i], 1.0 - kStapleClamp);
  }
  EXPECT_TRUE(r.converged);
}

TEST(StapleTest, SingleRaterIsFixedPoint) {
  Rng rng(4);
  const Mask m = random_mask(rng, 6, 5, 0.4);
  const StapleResult r = staple_fuse({m}, staple_default_prior({m}));
  EXPECT_EQ(thresholded(r.posterior, 6, 5), m);
}

TEST(StapleTest, UnanimousBackgroundIsDegenerateConsensus) {
  const Mask empty(4, 4);
  const StapleResult r = staple_fuse({empty, empty, empty}, 0.5);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_EQ(r.posterior, Tensor({4, 4}, 0.0));
  Mask full(3, 3);
  for (std::size_t i = 0; i < full.size(); ++i) full[i] = 1;
  EXPECT_EQ(staple_fuse({full}, staple_default_prior({full})).posterior, Tensor({3, 3}, 1.0));
}

TEST(StapleTest, MatchesBruteForceOracleOnFiveByFive) {
  Rng rng(55);
  const Mask base = random_mask(rng, 5, 5, 0.5);
  std::vector<Mask> raters;
  for (int i = 0; i < 3; ++i) {
    Mask m = base;
    for (std::size_t k = 0; k < m.size(); ++k)
      if (rng.uniform() < 0.15 * (i + 1)) m[k] ^= 1;
    raters.push_back(m);
  }
  const double prior = staple_default_prior(raters);
  const StapleResult r = staple_fuse(raters, prior);
  const auto o = testing::oracle_staple(as_votes(raters), prior, 1e-6, 100);
  for (std::size_t k = 0; k < 25; ++k) EXPECT_NEAR(r.posterior[k], o.w[k], 1e-6);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(r.p[i], o.p[i], 1e-6);
    EXPECT_NEAR(r.q[i], o.q[i], 1e-6);
  }
  EXPECT_EQ(r.iterations, static_cast<std::size_t>(o.iterations));
}

TEST(StapleTest, ConvergedMeansLastDeltaBelowTol) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Mask> raters;
    for (int i = 0; i < 3; ++i) raters.push_back(random_mask(rng, 6, 6, 0.5));
    const double prior = staple_default_prior(raters);
    const StapleResult r = staple_fuse(raters, prior);
    for (double v : r.posterior.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_GE(r.p[i], kStapleClamp);
      EXPECT_LE(r.p[i], 1.0 - kStapleClamp);
    }
    if (r.converged && r.iterations > 1) {
      // Parameters one iteration earlier differ from the final ones by < tol.
      StapleOptions shorter;
      shorter.max_iter = r.iterations - 1;
      const StapleResult before = staple_fuse(raters, prior, shorter);
      EXPECT_FALSE(before.converged);
      for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_LT(std::abs(before.p[i] - r.p[i]), 1e-6);
        EXPECT_LT(std::abs(before.q[i] - r.q[i]), 1e-6);
      }
    }
  }
}

TEST(StapleTest, PosteriorIsRaterPermutationEquivariant) {
  Rng rng(9);
  std::vector<Mask> raters;
  for (int i = 0; i < 3; ++i) raters.push_back(random_mask(rng, 6, 6, 0.45));
  const double prior = staple_default_prior(raters);
  const StapleResult a = staple_fuse(raters, prior);
  std::vector<Mask> perm{raters[2], raters[0], raters[1]};
  const StapleResult b = staple_fuse(perm, prior);
  for (std::size_t k = 0; k < a.posterior.size(); ++k) {
    EXPECT_NEAR(a.posterior[k], b.posterior[k], 1e-12);
  }
  EXPECT_NEAR(a.p[0], b.p[1], 1e-12);
}

TEST(StapleTest, IdenticalRatersReproduceAnnotationForAnyPrior) {
  Rng rng(10);
  const Mask m = random_mask(rng, 6, 6, 0.5);
  for (double prior : {0.05, 0.3, 0.5, 0.9}) {
    const StapleResult r = staple_fuse({m, m, m}, prior);
    EXPECT_EQ(thresholded(r.posterior, 6, 6), m) << "prior " << prior;
  }
}

TEST(StapleTest, RejectsBadInputs) {
  Mask a(4, 4), b(3, 4);
  a[0] = 1;
  EXPECT_THROW(staple_fuse({a, b}, 0.5), ShapeError);
  EXPECT_THROW(staple_fuse({a}, 0.0), DataError);
  EXPECT_THROW(staple_fuse({a}, 1.5), DataError);
  EXPECT_THROW(staple_fuse(std::vector<Mask>{}, 0.5), DataError);
  StapleOptions bad;
  bad.tol = 0.0;
  EXPECT_THROW(staple_fuse({a}, 0.5, bad), DataError);
}

TEST(StapleTest, AnnotationChannelsFuseIndependently) {
  Rng rng(12);
  Tensor ann({3, 2, 5, 5}, 0.0);
  for (std::size_t i = 0; i < ann.size(); ++i) ann[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
  const Tensor fused = staple_fuse_annotations(ann);
  ASSERT_EQ(fused.dims(), (Shape{2, 5, 5}));
  for (std::size_t ch = 0; ch < 2; ++ch) {
    std::vector<Mask> raters;
    for (std::size_t i = 0; i < 3; ++i)
      raters.push_back(Mask::threshold(ann.values().subspan((i * 2 + ch) * 25, 25), 5, 5));
    const StapleResult r = staple_fuse(raters, staple_default_prior(raters));
    for (std::size_t k = 0; k < 25; ++k) EXPECT_EQ(fused[ch * 25 + k], r.posterior[k]);
  }
}

}  // namespace
}  // namespace diagfuse
