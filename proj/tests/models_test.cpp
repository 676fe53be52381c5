#include "diagfuse/models.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "diagfuse/dataset.hpp"
#include "diagfuse/errors.hpp"
#include "diagfuse/rng.hpp"
#include "support/grad_suite.hpp"

namespace diagfuse {
namespace {

Mask disc_of_rows(std::size_t h, std::size_t w, std::size_t y0, std::size_t y1, std::size_t x0,
                  std::size_t x1) {
  Mask m(h, w);
  for (std::size_t y = y0; y <= y1; ++y)
    for (std::size_t x = x0; x <= x1; ++x) m(y, x) = 1;
  return m;
}

Mask circle(std::size_t n, double cy, double cx, double r) {
  Mask m(n, n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x)
      m(y, x) = std::hypot(static_cast<double>(y) - cy, static_cast<double>(x) - cx) <= r;
  return m;
}

std::vector<Sample> small_set(std::size_t n, std::uint64_t seed) {
  return generate_samples(n, seed, 0, {}, default_profiles(3));
}

TEST(VcdrTest, Definitions) {
  // Diameters 30 and 60 rows on a 64 grid: radius 14.5 / 29.5 about a half-pixel centre.
  const Mask disc = circle(64, 31.5, 31.5, 29.9);
  const Mask cup = circle(64, 31.5, 31.5, 14.9);
  std::size_t a = 0, b = 0;
  ASSERT_TRUE(row_extent(disc, a, b));
  ASSERT_EQ(b - a + 1, 60u);
  ASSERT_TRUE(row_extent(cup, a, b));
  ASSERT_EQ(b - a + 1, 30u);
  EXPECT_DOUBLE_EQ(vcdr_score(disc, cup), 0.5);
  EXPECT_DOUBLE_EQ(vcdr_score(disc, disc), 1.0);
  EXPECT_DOUBLE_EQ(vcdr_score(disc, Mask(64, 64)), 0.0);
  EXPECT_THROW(vcdr_score(Mask(64, 64), cup), DataError);
}

TEST(VcdrTest, HorizontalTranslationAndVerticalScaling) {
  const Mask d = disc_of_rows(40, 40, 5, 24, 3, 20), c = disc_of_rows(40, 40, 10, 17, 8, 12);
  const Mask d2 = disc_of_rows(40, 40, 5, 24, 13, 30), c2 = disc_of_rows(40, 40, 10, 17, 18, 22);
  EXPECT_DOUBLE_EQ(vcdr_score(d, c), vcdr_score(d2, c2));
  // Integer vertical scaling by 2: every row duplicated.
  Mask ds(80, 40), cs(80, 40);
  for (std::size_t y = 0; y < 80; ++y)
    for (std::size_t x = 0; x < 40; ++x) {
      ds(y, x) = d(y / 2, x);
      cs(y, x) = c(y / 2, x);
    }
  EXPECT_DOUBLE_EQ(vcdr_score(ds, cs), vcdr_score(d, c));
}

TEST(VcdrTest, SoftMasksThresholdConsistently) {
  Rng rng(2);
  const Sample s = synth_sample(3, {});
  Tensor soft({2, 64, 64});
  for (std::size_t p = 0; p < 4096; ++p) {
    soft[p] = s.true_disc[p] ? rng.uniform(0.5, 1.0) : rng.uniform(0.0, 0.49);
    soft[4096 + p] = s.true_cup[p] ? rng.uniform(0.5, 1.0) : rng.uniform(0.0, 0.49);
  }
  EXPECT_DOUBLE_EQ(vcdr_score(soft), vcdr_score(s.true_disc, s.true_cup));
}

TEST(DiagNetTest, DeterministicInitAndSeedSensitivity) {
  const DiagNet a = build_diag_net({}, 5), b = build_diag_net({}, 5), c = build_diag_net({}, 6);
  ASSERT_EQ(a.params().size(), b.params().size());
  bool differs = false;
  for (std::size_t k = 0; k < a.params().size(); ++k) {
    EXPECT_EQ(a.params()[k].value, b.params()[k].value);
    differs = differs || a.params()[k].value != c.params()[k].value;
  }
  EXPECT_TRUE(differs);
  // 5*8*9+8 + 8*16*9+16 + 16*32*9+32 + 32*32*9+32 + 32+1
  EXPECT_EQ(a.parameter_count(), 368u + 1168u + 4640u + 9248u + 33u);
}

TEST(DiagNetTest, ScalarLogitAndProbabilityRange) {
  Rng rng(3);
  const DiagNet net = build_diag_net({}, 1);
  for (int t = 0; t < 5; ++t) {
    const Tensor img = testing::random_tensor(rng, {3, 64, 64}, 0, 1);
    const Tensor mask = testing::random_tensor(rng, {2, 64, 64}, 0, 1);
    ad::Tape tape;
    EXPECT_EQ(diag_logit(tape, net, tape.constant(img), tape.constant(mask)).dims(), Shape{1});
    const double p = diag_forward(net, img, mask);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
    EXPECT_EQ(p, diag_forward(net, img, mask));
  }
}

TEST(DiagNetTest, RejectsBadShapesAndMaskValues) {
  const DiagNet net = build_diag_net({}, 1);
  EXPECT_THROW(diag_forward(net, Tensor({3, 64, 64}), Tensor({2, 32, 32})), ShapeError);
  EXPECT_THROW(diag_forward(net, Tensor({4, 64, 64}), Tensor({2, 64, 64})), ShapeError);
  EXPECT_THROW(diag_forward(net, Tensor({3, 64, 64}), Tensor({2, 64, 64}, 1.5)), DataError);
}

TEST(DiagNetTest, MaskGradientMatchesCentralDifferencesOnRandomPixels) {
  Rng rng(4);
  const DiagNet net = build_diag_net({}, 2);
  const Tensor img = testing::random_tensor(rng, {3, 64, 64}, 0, 1);
  const Tensor mask = testing::random_tensor(rng, {2, 64, 64}, 0.2, 0.8);
  auto loss_at = [&](const Tensor& m, ad::Tape& tape, ad::Var* leaf) {
    ad::Var mv = leaf ? (*leaf = tape.leaf(m)) : tape.constant(m);
    return ad::bce(ad::sigmoid(diag_logit(tape, net, tape.constant(img), mv)),
                   tape.constant(Tensor::scalar(1.0)));
  };
  ad::Tape tape;
  ad::Var leaf;
  const auto grads = tape.backprop(loss_at(mask, tape, &leaf));
  const Tensor& g = grads[leaf];
  const double eps = 1e-4;
  for (int k = 0; k < 8; ++k) {
    const std::size_t idx = rng.index(mask.size());
    Tensor up = mask, dn = mask;
    up[idx] += eps;
    dn[idx] -= eps;
    ad::Tape t1, t2;
    const double fd = (loss_at(up, t1, nullptr).value()[0] - loss_at(dn, t2, nullptr).value()[0]) / (2 * eps);
    EXPECT_LE(std::abs(g[idx] - fd) / std::max(std::abs(g[idx]), 1e-8), 1e-4) << "pixel " << idx;
  }
}

TEST(TrainDiagTest, LowersLossAndRespondsToMasks) {
  const auto data = small_set(48, 11);
  DiagNet net = build_diag_net({}, 3);
  TrainHyper h;
  h.lr = 1e-3;
  h.epochs = 4;
  const TrainResult r = train_diag(net, data, h, MaskSource::parse("truth"));
  ASSERT_EQ(r.loss_curve.size(), 5u);
  EXPECT_LT(r.loss_curve.back(), r.loss_curve.front());
  const Tensor& img = data[0].image;
  EXPECT_NE(diag_forward(net, img, Tensor({2, 64, 64}, 0.0)),
            diag_forward(net, img, Tensor({2, 64, 64}, 1.0)));
}

TEST(TrainDiagTest, ZeroEpochsLeavesWeightsUnchanged) {
  const auto data = small_set(4, 12);
  DiagNet net = build_diag_net({}, 3);
  const auto before = net.params();
  TrainHyper h;
  h.epochs = 0;
  train_diag(net, data, h, MaskSource::parse("mv"));
  for (std::size_t k = 0; k < before.size(); ++k) EXPECT_EQ(net.params()[k].value, before[k].value);
}

TEST(TrainDiagTest, RejectsFrozenEmptyAndDiverging) {
  const auto data = small_set(4, 13);
  DiagNet net = build_diag_net({}, 3);
  net.freeze();
  EXPECT_THROW(train_diag(net, data, {}, MaskSource::parse("mv")), Error);
  net.unfreeze();
  EXPECT_THROW(train_diag(net, {}, {}, MaskSource::parse("mv")), DataError);
  TrainHyper wild;
  wild.lr = 1e300;
  wild.epochs = 3;
  wild.batch = 1;
  try {
    train_diag(net, data, wild, MaskSource::parse("truth"));
    FAIL() << "expected divergence";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(MaskSourceTest, ParseAndInputs) {
  EXPECT_EQ(MaskSource::parse("truth").kind, MaskSource::Kind::kTruth);
  EXPECT_EQ(MaskSource::parse("none").kind, MaskSource::Kind::kNone);
  const MaskSource d = MaskSource::parse("degraded@0.5");
  EXPECT_EQ(d.kind, MaskSource::Kind::kDegraded);
  EXPECT_EQ(d.iou, 0.5);
  EXPECT_EQ(d.str(), "degraded@0.5");
  EXPECT_THROW(MaskSource::parse("degraded@x"), DataError);
  EXPECT_THROW(MaskSource::parse("degraded@0"), DataError);
  EXPECT_THROW(MaskSource::parse("best"), DataError);

  const auto data = small_set(1, 14);
  const Tensor truth = mask_input(data[0], MaskSource::parse("truth"));
  EXPECT_EQ(truth, mask_input(data[0], MaskSource::parse("degraded@1")));
  EXPECT_EQ(mask_input(data[0], MaskSource::parse("none")), Tensor({2, 64, 64}, 0.0));
  EXPECT_EQ(mask_input(data[0], d), mask_input(data[0], d));
}

TEST(SegNetTest, ProbabilitiesInRangeAndShapeChecked) {
  Rng rng(5);
  const SegNet net = build_seg_net({}, 1);
  const Tensor p = seg_predict(net, testing::random_tensor(rng, {3, 64, 64}, 0, 1));
  EXPECT_EQ(p.dims(), (Shape{2, 64, 64}));
  for (double v : p.values()) {
    ASSERT_GT(v, 0.0);
    ASSERT_LT(v, 1.0);
  }
  EXPECT_THROW(seg_predict(net, Tensor({3, 62, 64})), ShapeError);
}

TEST(SegNetTest, TrainingNeedsEveryGroundTruth) {
  const auto data = small_set(3, 15);
  std::map<std::string, Tensor> gt;
  gt[data[0].id] = mask_input(data[0], MaskSource::parse("truth"));
  gt[data[1].id] = mask_input(data[1], MaskSource::parse("truth"));
  try {
    train_seg(data, gt, {});
    FAIL() << "expected missing ground truth";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(data[2].id), std::string::npos);
  }
  gt[data[2].id] = Tensor({2, 64, 64}, 2.0);
  EXPECT_THROW(train_seg(data, gt, {}), DataError);
}

TEST(SegNetTest, ShortTrainingLowersLoss) {
  const auto data = small_set(8, 16);
  std::map<std::string, Tensor> gt;
  for (const auto& s : data) gt[s.id] = mask_input(s, MaskSource::parse("mv"));
  TrainHyper h;
  h.lr = 3e-3;
  h.epochs = 3;
  h.batch = 4;
  TrainResult curve;
  train_seg(data, gt, h, {}, &curve);
  EXPECT_LT(curve.loss_curve.back(), curve.loss_curve.front());
}

TEST(SegNetTest, OutputBiasStartsAtForegroundPrior) {
  const auto data = small_set(4, 17);
  std::map<std::string, Tensor> gt;
  double mass[2] = {0.0, 0.0};
  for (const auto& s : data) {
    gt[s.id] = mask_input(s, MaskSource::parse("truth"));
    const std::size_t hw = gt[s.id].size() / 2;
    for (std::size_t ch = 0; ch < 2; ++ch)
      for (double v : gt[s.id].values().subspan(ch * hw, hw)) mass[ch] += v / (4.0 * hw);
  }
  TrainHyper h;
  h.epochs = 0;
  const SegNet net = train_seg(data, gt, h);
  const Tensor& bias = net.params().back().value;
  for (std::size_t ch = 0; ch < 2; ++ch) {
    EXPECT_NEAR(1.0 / (1.0 + std::exp(-bias[ch])), mass[ch], 1e-12);
  }
}

TEST(CheckpointTest, RoundTripsBothNets) {
  const auto dir = std::filesystem::path(::testing::TempDir()) / "ckpt";
  std::filesystem::remove_all(dir);
  DiagArch arch;
  arch.widths = {4, 6};
  const DiagNet d = build_diag_net(arch, 9);
  save_checkpoint(dir / "diag", d);
  const DiagNet back = load_diag_net(dir / "diag");
  EXPECT_EQ(back.arch().widths, arch.widths);
  for (std::size_t k = 0; k < d.params().size(); ++k) EXPECT_EQ(back.params()[k].value, d.params()[k].value);

  const SegNet s = build_seg_net({}, 4);
  save_checkpoint(dir / "seg", s);
  const SegNet sb = load_seg_net(dir / "seg");
  for (std::size_t k = 0; k < s.params().size(); ++k) EXPECT_EQ(sb.params()[k].value, s.params()[k].value);

  EXPECT_THROW(load_diag_net(dir / "seg"), DataError);
  EXPECT_THROW(load_diag_net(dir / "nothing"), DataError);
}

}  // namespace
}  // namespace diagfuse
