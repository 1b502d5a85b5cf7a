#include "omnivat/errors.hpp"
#include "omnivat/metrics.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace omnivat {
namespace {

using testing::random_matrix;

std::vector<int> random_labels(std::mt19937_64& rng, std::size_t n, int classes) {
  std::uniform_int_distribution<int> pick(0, classes - 1);
  std::vector<int> out(n);
  for (int& v : out) v = pick(rng);
  return out;
}

TEST(Accuracy, Examples) {
  const std::vector<int> labels{0, 1, 2, 1, 0};
  EXPECT_EQ(top1_accuracy(labels, labels), 1.0);
  EXPECT_EQ(top1_accuracy(std::vector<int>{1, 0, 0, 0, 1}, labels), 0.0);
  EXPECT_EQ(top1_accuracy(std::vector<int>{0, 1, 2, 0, 1}, labels), 0.6);
}

TEST(Accuracy, Errors) {
  EXPECT_THROW(top1_accuracy(std::vector<int>{0}, std::vector<int>{0, 1}), DimensionError);
  EXPECT_THROW(top1_accuracy(std::vector<int>{}, std::vector<int>{}), DegenerateError);
}

TEST(MacroF1, HandExamples) {
  const std::vector<int> labels{1, 0, 1, 0};
  EXPECT_EQ(macro_f1(labels, labels, 2), 1.0);
  const F1Scores s = f1_scores(std::vector<int>{1, 1, 0, 0}, labels, 2);
  EXPECT_DOUBLE_EQ(s.per_class[0].f1, 0.5);
  EXPECT_DOUBLE_EQ(s.per_class[1].f1, 0.5);
  EXPECT_DOUBLE_EQ(s.macro, 0.5);
  EXPECT_NEAR(macro_f1(std::vector<int>{0, 0, 0, 0}, labels, 2), 1.0 / 3.0, 1e-15);
}

TEST(MacroF1, AbsentClassConvention) {
  const std::vector<int> labels{0, 1, 0, 1};
  EXPECT_NEAR(macro_f1(labels, labels, 3), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(macro_f1(labels, labels, 3, F1Averaging::kSkipAbsent), 1.0);
}

TEST(MacroF1, RangeErrors) {
  EXPECT_THROW(macro_f1(std::vector<int>{0, 3}, std::vector<int>{0, 1}, 3), RangeError);
  EXPECT_THROW(macro_f1(std::vector<int>{0, 1}, std::vector<int>{-1, 1}, 3), RangeError);
}

TEST(MacroF1, MatchesConfusionOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int c = 2 + trial % 5;
    const auto labels = random_labels(rng, 7 + trial, c);
    const auto preds = random_labels(rng, 7 + trial, c);
    double sum = 0;
    for (int k = 0; k < c; ++k) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        tp += preds[i] == k && labels[i] == k;
        fp += preds[i] == k && labels[i] != k;
        fn += preds[i] != k && labels[i] == k;
      }
      // F1 = 2TP / (2TP + FP + FN), zero when undefined.
      sum += tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    }
    EXPECT_NEAR(macro_f1(preds, labels, c), sum / c, 1e-12);
  }
}

TEST(MacroF1, PermutationInvariantAndBounded) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    auto labels = random_labels(rng, 20, 4);
    auto preds = random_labels(rng, 20, 4);
    const double f = macro_f1(preds, labels, 4);
    const double acc = top1_accuracy(preds, labels);
    std::vector<std::size_t> order(20);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> pl, ll;
    for (std::size_t i : order) {
      pl.push_back(preds[i]);
      ll.push_back(labels[i]);
    }
    EXPECT_EQ(macro_f1(pl, ll, 4), f);
    EXPECT_EQ(top1_accuracy(pl, ll), acc);
    EXPECT_LE(f, 1.0);
    if (acc < 1.0) {
      EXPECT_LT(f, 1.0);
    }
  }
}

TEST(CosineMargin, IdenticalFeaturesGiveZero) {
  const RealMatrix f = RealMatrix::Constant(6, 3, 0.7);
  EXPECT_NEAR(cosine_margin(f, std::vector<int>{0, 0, 1, 1, 2, 2}, 100, 0), 0.0, 1e-15);
}

TEST(CosineMargin, OneHotClassesGiveOne) {
  RealMatrix f = RealMatrix::Zero(6, 3);
  const std::vector<int> labels{0, 1, 2, 0, 1, 2};
  for (Index i = 0; i < 6; ++i) f(i, labels[i]) = 1.0 + i;
  EXPECT_NEAR(cosine_margin(f, labels, 100, 0), 1.0, 1e-15);
}

double exhaustive_margin(const RealMatrix& f, const std::vector<int>& labels) {
  double same = 0, other = 0;
  int ns = 0, no = 0;
  for (Index i = 0; i < f.rows(); ++i) {
    for (Index j = i + 1; j < f.rows(); ++j) {
      double dot = 0, a = 0, b = 0;
      for (Index k = 0; k < f.cols(); ++k) {
        dot += f(i, k) * f(j, k);
        a += f(i, k) * f(i, k);
        b += f(j, k) * f(j, k);
      }
      const double c = dot / std::sqrt(a * b);
      if (labels[i] == labels[j]) {
        same += c;
        ++ns;
      } else {
        other += c;
        ++no;
      }
    }
  }
  return same / ns - other / no;
}

TEST(CosineMargin, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(3);
  const std::vector<int> labels{0, 1, 0, 2, 1, 2};
  for (int trial = 0; trial < 10; ++trial) {
    const RealMatrix f = random_matrix(rng, 6, 5);
    EXPECT_NEAR(cosine_margin(f, labels, 1000, trial), exhaustive_margin(f, labels), 1e-12);
  }
}

TEST(CosineMargin, ScaleInvariant) {
  std::mt19937_64 rng(4);
  const RealMatrix f = random_matrix(rng, 30, 8);
  const auto labels = random_labels(rng, 30, 3);
  EXPECT_NEAR(cosine_margin(f, labels, 50, 9), cosine_margin(3.7 * f, labels, 50, 9), 1e-12);
}

TEST(CosineMargin, SamplingIsSeededAndCapped) {
  std::mt19937_64 rng(5);
  const RealMatrix f = random_matrix(rng, 40, 6);
  const auto labels = random_labels(rng, 40, 4);
  const double a = cosine_margin(f, labels, 20, 1);
  EXPECT_EQ(a, cosine_margin(f, labels, 20, 1));
  EXPECT_NE(a, cosine_margin(f, labels, 20, 2));
  std::vector<int> ls(labels.begin(), labels.end());
  EXPECT_NEAR(cosine_margin(f, ls, 100000, 1), exhaustive_margin(f, ls), 1e-12);
}

TEST(CosineMargin, Errors) {
  EXPECT_THROW(cosine_margin(RealMatrix::Ones(3, 2), std::vector<int>{1, 1, 1}, 10, 0),
               DegenerateError);
  EXPECT_THROW(cosine_margin(RealMatrix::Ones(3, 2), std::vector<int>{0, 1, 2}, 10, 0),
               DegenerateError);
  RealMatrix z = RealMatrix::Ones(4, 2);
  z.row(2).setZero();
  EXPECT_THROW(cosine_margin(z, std::vector<int>{0, 0, 1, 1}, 10, 0), DegenerateError);
  EXPECT_THROW(cosine_margin(z, std::vector<int>{0, 0, 1}, 10, 0), DimensionError);
}

TEST(Evaluate, ReportIsConsistent) {
  SynthConfig sc;
  sc.classes = 3;
  sc.dim = 8;
  sc.per_class = 10;
  sc.targets = 1;
  const DomainSuite suite = synth_suite(sc);
  TrainConfig c;
  c.dim = 8;
  c.expansion = 2;
  c.depth = 2;
  const ModelParams p = ModelParams::Init(c, 3);
  const auto model = InferenceModel::From(p, c);
  const EvalReport r = evaluate(model, suite.targets[0], 3);
  ASSERT_EQ(r.count, 30u);
  std::vector<int> labels;
  for (const PairedSample& s : paired_samples(suite.targets[0])) labels.push_back(s.label);
  EXPECT_EQ(r.accuracy, top1_accuracy(r.predictions, labels));
  EXPECT_EQ(r.macro_f1, macro_f1(r.predictions, labels, 3));
  EXPECT_EQ(r.per_class.size(), 3u);
  EXPECT_GT(r.ce, 0.0);
  EXPECT_THROW(evaluate(model, suite.targets[0], 2), RangeError);
}

}  // namespace
}  // namespace omnivat
