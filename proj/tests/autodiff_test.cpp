#include "diagfuse/autodiff.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "diagfuse/errors.hpp"
#include "diagfuse/io.hpp"
#include "support/grad_suite.hpp"

namespace diagfuse {
namespace {

using ad::Tape;
using ad::Var;
using testing::random_tensor;

TEST(AutodiffTest, ScalarProduct) {
  Tape tape;
  Var out = ad::mul(tape.constant(Tensor::scalar(2.0)), tape.constant(Tensor::scalar(3.0)));
  EXPECT_EQ(out.value()[0], 6.0);
}

TEST(AutodiffTest, SoftmaxOfEqualLogitsIsUniform) {
  Tape tape;
  Var out = ad::softmax(tape.constant(Tensor({2}, {0.0, 0.0})), 0);
  EXPECT_EQ(out.value()[0], 0.5);
  EXPECT_EQ(out.value()[1], 0.5);
}

TEST(AutodiffTest, IdentityKernelConvolutionIsIdentity) {
  Rng rng(7);
  Tape tape;
  Tensor kernel({1, 1, 3, 3}, 0.0);
  kernel[4] = 1.0;
  Tensor input = random_tensor(rng, {1, 5, 5});
  Var out = ad::conv2d(tape.constant(input), tape.constant(kernel), 1);
  EXPECT_EQ(out.value(), input);
}

TEST(AutodiffTest, SquareDerivative) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(3.0));
  Var loss = ad::mul(x, x);
  EXPECT_DOUBLE_EQ(tape.backprop(loss)[x][0], 6.0);
}

TEST(AutodiffTest, SigmoidDerivativeAtZero) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(0.0));
  Var loss = ad::sigmoid(x);
  EXPECT_DOUBLE_EQ(tape.backprop(loss)[x][0], 0.25);
}

TEST(AutodiffTest, UntouchedLeafGetsZeroGradient) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(2.0));
  Var unused = tape.leaf(Tensor({2, 2}, 1.0));
  Var loss = ad::mul(x, x);
  const auto grads = tape.backprop(loss);
  EXPECT_EQ(grads[unused], Tensor({2, 2}, 0.0));
}

TEST(AutodiffTest, BackpropRejectsNonScalarLoss) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, 1.0));
  EXPECT_THROW(tape.backprop(x), ShapeError);
}

TEST(AutodiffTest, DimensionMismatchNamesOpAndDims) {
  Tape tape;
  Var a = tape.constant(Tensor({2, 3}));
  Var b = tape.constant(Tensor({3, 2}));
  try {
    ad::add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("add"), std::string::npos);
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[3x2]"), std::string::npos);
  }
  EXPECT_THROW(ad::matmul(a, a), ShapeError);
}

TEST(AutodiffTest, NonFiniteOutputRejected) {
  Tape tape;
  Var big = tape.constant(Tensor({1}, {1e300}));
  EXPECT_THROW(ad::mul(big, big), NumericError);
}

TEST(AutodiffTest, ConvOutputSizes) {
  Tape tape;
  Var in = tape.constant(Tensor({2, 7, 6}, 1.0));
  Var w = tape.constant(Tensor({4, 2, 3, 3}, 0.1));
  EXPECT_EQ(ad::conv2d(in, w, 1).dims(), (Shape{4, 7, 6}));
  EXPECT_EQ(ad::conv2d(in, w, 2).dims(), (Shape{4, 3, 3}));
}

TEST(AutodiffTest, LinearGraphGradCheckIsExact) {
  Rng rng(11);
  const Tensor w = random_tensor(rng, {6});
  const Tensor x = random_tensor(rng, {6});
  auto build = [&](Tape& tape, Var leaf) { return testing::weighted_sum(tape, leaf, w); };
  EXPECT_LT(ad::grad_check(build, x, 1e-4), 1e-8);
}

TEST(AutodiffTest, BceOnSigmoidGradCheck) {
  Rng rng(12);
  const Tensor logits = random_tensor(rng, {5}, -2, 2);
  const Tensor target = random_tensor(rng, {5}, 0, 1);
  auto build = [&](Tape& tape, Var leaf) {
    return ad::bce(ad::sigmoid(leaf), tape.constant(target));
  };
  EXPECT_LT(ad::grad_check(build, logits, 1e-4), 1e-4);
}

TEST(AutodiffTest, RandomConvReluMeanGraphMatchesFiniteDifferences) {
  Rng rng(13);
  const Tensor kernel = random_tensor(rng, {3, 2, 3, 3});
  const Tensor input = random_tensor(rng, {2, 6, 6});
  auto build = [&](Tape& tape, Var leaf) {
    return ad::mean(ad::relu(ad::conv2d(leaf, tape.constant(kernel), 1)));
  };
  EXPECT_LT(ad::grad_check(build, input, 1e-4), 1e-4);
}

class PrimitiveGradientTest : public ::testing::TestWithParam<std::size_t> {};

TEST_P(PrimitiveGradientTest, PassesCentralDifferencesOnRandomInstances) {
  const auto cases = testing::primitive_cases();
  const auto& c = cases.at(GetParam());
  Rng rng(1000 + GetParam());
  for (int i = 0; i < 20; ++i) {
    EXPECT_LE(c.run(rng), 1e-4) << c.name << " instance " << i;
  }
}

INSTANTIATE_TEST_SUITE_P(AllPrimitives, PrimitiveGradientTest,
                         ::testing::Range<std::size_t>(0, testing::primitive_cases().size()),
                         [](const auto& info) {
                           return testing::primitive_cases().at(info.param).name;
                         });

TEST(AutodiffPropertyTest, ReplayIsBitIdentical) {
  auto run = [] {
    Rng rng(99);
    Tape tape;
    Var x = tape.leaf(random_tensor(rng, {2, 8, 8}));
    Var w = tape.leaf(random_tensor(rng, {3, 2, 3, 3}));
    Var y = ad::tanh(ad::conv2d(x, w, 2));
    Var loss = ad::mean(ad::softmax(y, 0));
    return std::make_pair(y.value(), tape.backprop(loss)[w]);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(AutodiffPropertyTest, GradientOfBatchSumIsSumOfItemGradients) {
  Rng rng(5);
  const Tensor w = random_tensor(rng, {2, 1, 3, 3});
  std::vector<Tensor> items;
  for (int i = 0; i < 4; ++i) items.push_back(random_tensor(rng, {1, 5, 5}));

  Tensor summed({2, 1, 3, 3}, 0.0);
  for (const auto& item : items) {
    Tape tape;
    Var wv = tape.leaf(w);
    Var loss = ad::mean(ad::tanh(ad::conv2d(tape.constant(item), wv, 1)));
    const auto g = tape.backprop(loss)[wv];
    for (std::size_t i = 0; i < g.size(); ++i) summed[i] += g[i];
  }

  Tape tape;
  Var wv = tape.leaf(w);
  Var total = tape.constant(Tensor::scalar(0.0));
  for (const auto& item : items) {
    total = ad::add(total, ad::mean(ad::tanh(ad::conv2d(tape.constant(item), wv, 1))));
  }
  const auto g = tape.backprop(total)[wv];
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], summed[i], 1e-12);
}

TEST(AutodiffPropertyTest, SoftmaxSlicesSumToOne) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Shape d{testing::rdim(rng), testing::rdim(rng), testing::rdim(rng)};
    const std::size_t axis = rng.index(3);
    Tape tape;
    const Tensor y = ad::softmax(tape.constant(random_tensor(rng, d, -20, 20)), axis).value();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= d[i];
    for (std::size_t i = axis + 1; i < 3; ++i) inner *= d[i];
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < d[axis]; ++k) {
          const double v = y[(o * d[axis] + k) * inner + i];
          EXPECT_GT(v, 0.0);
          EXPECT_LE(v, 1.0);
          s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-6);
      }
    }
  }
}

TEST(TensorFileTest, RoundTripPreservesBitsAndHeader) {
  Rng rng(21);
  Tensor t = random_tensor(rng, {3, 4, 5}, -1e6, 1e6);
  t[0] = -0.0;
  const auto path = std::filesystem::path(::testing::TempDir()) / "rt.tns";
  write_tns(path, t);
  EXPECT_EQ(read_tns(path), t);

  std::ifstream in(path, std::ios::binary);
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  EXPECT_EQ(l1, "TNS1");
  EXPECT_EQ(l2, "3");
  EXPECT_EQ(l3, "3 4 5");
  EXPECT_EQ(std::filesystem::file_size(path), 5 + 2 + 6 + 60 * 8);
}

TEST(TensorFileTest, RejectsTruncatedPayload) {
  const auto path = std::filesystem::path(::testing::TempDir()) / "bad.tns";
  {
    std::ofstream out(path, std::ios::binary);
    out << "TNS1\n1\n4\n" << std::string(8, '\0');
  }
  EXPECT_THROW(read_tns(path), DataError);
}

}  // namespace
}  // namespace diagfuse
