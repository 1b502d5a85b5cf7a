#include "omnivat/errors.hpp"
#include "omnivat/numeric/linalg.hpp"
#include "omnivat/numeric/tape.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace omnivat {
namespace {

using testing::check_gradients;
using testing::random_matrix;

RealMatrix symmetric(std::mt19937_64& rng, Index n) {
  RealMatrix a = random_matrix(rng, n, n);
  return 0.5 * (a + a.transpose());
}

TEST(SymEig, Identity) {
  const SymEig e = sym_eig(RealMatrix::Identity(4, 4));
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(e.values[i], 1.0, 1e-14);
  EXPECT_LT((e.vectors.transpose() * e.vectors - RealMatrix::Identity(4, 4)).norm(), 1e-12);
}

TEST(SymEig, DiagonalSortsAscendingWithPermutedBasis) {
  RealMatrix m = RealMatrix::Zero(3, 3);
  m.diagonal() << 3.0, 1.0, 2.0;
  const SymEig e = sym_eig(m);
  EXPECT_NEAR(e.values[0], 1.0, 1e-14);
  EXPECT_NEAR(e.values[1], 2.0, 1e-14);
  EXPECT_NEAR(e.values[2], 3.0, 1e-14);
  EXPECT_NEAR(std::abs(e.vectors(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(e.vectors(2, 1)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(e.vectors(0, 2)), 1.0, 1e-14);
}

TEST(SymEig, RandomResidualAgainstReconstruction) {
  std::mt19937_64 rng(11);
  const RealMatrix m = symmetric(rng, 8);
  const SymEig e = sym_eig(m);
  const RealMatrix recon = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
  EXPECT_LT((recon - m).norm(), 1e-9 * m.norm());
  EXPECT_LT((m * e.vectors - e.vectors * e.values.asDiagonal()).norm(), 1e-9 * m.norm());
}

TEST(SymEig, OrthonormalAcrossSizes) {
  std::mt19937_64 rng(5);
  for (Index n : {4, 8, 16, 32, 64}) {
    const SymEig e = sym_eig(symmetric(rng, n));
    EXPECT_LT((e.vectors.transpose() * e.vectors - RealMatrix::Identity(n, n)).norm(), 1e-10)
        << "n=" << n;
  }
}

TEST(SymEig, RejectsBadInput) {
  EXPECT_THROW(sym_eig(RealMatrix::Zero(2, 3)), DimensionError);
  RealMatrix a = RealMatrix::Identity(3, 3);
  a(0, 1) = 1e-6;
  EXPECT_THROW(sym_eig(a), SymmetryError);
}

TEST(Softmax, Examples) {
  RealVector v = RealVector::Zero(3);
  const RealVector s = softmax(v);
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(s[i], 1.0 / 3.0, 1e-15);

  RealVector big(2);
  big << 1000.0, 0.0;
  const RealVector sb = softmax(big);
  EXPECT_NEAR(sb[0], 1.0, 1e-12);
  EXPECT_NEAR(sb[1], 0.0, 1e-12);
  EXPECT_TRUE(sb.allFinite());

  RealVector x(3);
  x << 1.0, 2.0, 3.0;
  const RealVector sx = softmax(x);
  long double z = 0.0L;
  for (int i = 1; i <= 3; ++i) z += std::exp(static_cast<long double>(i));
  for (int i = 0; i < 3; ++i) {
    const long double ref = std::exp(static_cast<long double>(i + 1)) / z;
    EXPECT_NEAR(sx[i], static_cast<double>(ref), 1e-15);
  }
  EXPECT_NEAR(sx.sum(), 1.0, 1e-12);
  EXPECT_LT((softmax((x.array() + 17.5).matrix()) - sx).norm(), 1e-15);
  EXPECT_THROW(softmax(RealVector()), DimensionError);
}

TEST(Relu, Examples) {
  RealMatrix x(1, 3);
  x << -1.0, 0.0, 2.0;
  RealMatrix expected(1, 3);
  expected << 0.0, 0.0, 2.0;
  EXPECT_EQ(relu(x), expected);
  EXPECT_TRUE(relu(RealMatrix::Constant(2, 2, -3.0)).isZero());

  std::mt19937_64 rng(2);
  const RealMatrix r = random_matrix(rng, 4, 5);
  const RealMatrix out = relu(r);
  for (Index i = 0; i < r.size(); ++i) {
    EXPECT_EQ(out.data()[i], r.data()[i] > 0.0 ? r.data()[i] : 0.0);
  }
  EXPECT_EQ(relu(out), out);

  const ComplexMatrix c(r, -r);
  const ComplexMatrix rc = relu(c);
  EXPECT_EQ(rc.re, relu(r));
  EXPECT_EQ(rc.im, relu(RealMatrix(-r)));
}

TEST(L2Normalize, Examples) {
  RealVector v(2);
  v << 3.0, 4.0;
  const RealVector n = l2_normalize(v);
  EXPECT_NEAR(n[0], 0.6, 1e-15);
  EXPECT_NEAR(n[1], 0.8, 1e-15);
  const RealVector e = RealVector::Unit(5, 2);
  EXPECT_EQ(l2_normalize(e), e);
  std::mt19937_64 rng(8);
  const RealVector r = random_matrix(rng, 16, 1).col(0);
  EXPECT_NEAR(l2_normalize(r).norm(), 1.0, 1e-12);
  EXPECT_THROW(l2_normalize(RealVector::Constant(3, 1e-14)), DegenerateError);
}

TEST(Backward, QuadraticNorm) {
  GradTape t;
  RealMatrix x0(1, 2);
  x0 << 1.0, 2.0;
  Var x = t.leaf(x0);
  Var loss = t.sum(t.mul(x, x));
  t.backward(loss);
  EXPECT_DOUBLE_EQ(t.grad(x)(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(t.grad(x)(0, 1), 4.0);
}

TEST(Backward, SymmetricCrossEntropy) {
  GradTape t;
  Var z = t.leaf(RealMatrix::Zero(1, 2));
  Var loss = t.softmax_cross_entropy(z, 0);
  EXPECT_NEAR(loss.scalar(), std::log(2.0), 1e-15);
  t.backward(loss);
  EXPECT_NEAR(t.grad(z)(0, 0), -0.5, 1e-15);
  EXPECT_NEAR(t.grad(z)(0, 1), 0.5, 1e-15);
}

TEST(Backward, FanOutAccumulatesAndVisitsOnce) {
  GradTape t;
  Var x = t.leaf(RealMatrix::Constant(1, 1, 3.0));
  Var y = t.add(x, x);  // 2x
  Var z = t.mul(y, x);  // 2x^2
  t.backward(z);
  EXPECT_DOUBLE_EQ(t.grad(x)(0, 0), 12.0);
  EXPECT_EQ(t.last_sweep_visits(), 3u);
}

TEST(Backward, Linearity) {
  std::mt19937_64 rng(21);
  const RealMatrix a0 = random_matrix(rng, 3, 4);
  const RealMatrix b0 = random_matrix(rng, 4, 2);
  auto l1 = [](GradTape& t, Var a, Var b) {
    return t.sum(t.relu(t.matmul(a, b)));
  };
  auto l2 = [](GradTape& t, Var a, Var b) {
    Var s = t.softmax_rows(t.matmul(a, b));
    return t.frobenius(s, 1e-8);
  };
  auto grads = [&](auto&& build) {
    GradTape t;
    Var a = t.leaf(a0), b = t.leaf(b0);
    t.backward(build(t, a, b));
    return std::pair{t.grad(a), t.grad(b)};
  };
  const double ca = 0.7, cb = -2.3;
  const auto g1 = grads(l1);
  const auto g2 = grads(l2);
  const auto gc = grads([&](GradTape& t, Var a, Var b) {
    return t.add(t.scale(l1(t, a, b), ca), t.scale(l2(t, a, b), cb));
  });
  EXPECT_LT((gc.first - (ca * g1.first + cb * g2.first)).norm(), 1e-10);
  EXPECT_LT((gc.second - (ca * g1.second + cb * g2.second)).norm(), 1e-10);
}

TEST(Backward, KlOfIdenticalSoftmaxIsZero) {
  std::mt19937_64 rng(4);
  GradTape t;
  const RealMatrix v = random_matrix(rng, 1, 9, 3.0);
  Var a = t.leaf(v);
  Var b = t.leaf(v);
  Var kl = t.kl_softmax(a, b);
  EXPECT_NEAR(kl.scalar(), 0.0, 1e-12);
}

TEST(Backward, UnsupportedOpThrows) {
  GradTape t;
  Var x = t.leaf(RealMatrix::Ones(1, 3));
  const Var parents[] = {x};
  Var arg = t.opaque("argmax", RealMatrix::Zero(1, 1), parents);
  Var loss = t.add(arg, t.sum(x));
  EXPECT_THROW(t.backward(loss), UnsupportedOpError);
}

TEST(Backward, NonScalarLossRejected) {
  GradTape t;
  Var x = t.leaf(RealMatrix::Ones(2, 2));
  EXPECT_THROW(t.backward(x), DimensionError);
}

TEST(Backward, PrimitivesMatchFiniteDifferences) {
  std::mt19937_64 rng(99);
  const RealMatrix a = random_matrix(rng, 3, 4);
  const RealMatrix b = random_matrix(rng, 4, 4);
  const RealMatrix row = random_matrix(rng, 1, 4);
  const RealMatrix p = random_matrix(rng, 1, 1);
  const RealMatrix fixed_m = random_matrix(rng, 4, 4);

  auto result = check_gradients({a, b, row, p}, [&](GradTape& t, const std::vector<Var>& x) {
    Var h = t.add_row(t.matmul(x[0], x[1]), x[2]);                       // 3x4
    Var s = t.softmax_rows(t.scale(h, 0.5));                             // 3x4
    Var n = t.l2_normalize_rows(t.add(h, t.mul(s, h)));                  // 3x4
    Var gram = t.matmul(n, t.transpose(n));                              // 3x3
    const double order = x[3].scalar();
    Var lin = t.param_linear(t.mean_rows(h), x[3], RealMatrix(fixed_m * std::cos(order)),
                             RealMatrix(-fixed_m * std::sin(order)));  // 1x4
    const Var parts[] = {lin, x[2]};
    Var cat = t.concat_cols(parts);                                      // 1x8
    const Var rows[] = {t.mean_rows(s), x[2]};
    Var stacked = t.concat_rows(rows);                                   // 2x4
    Var kl = t.kl_softmax(t.mean_rows(h), x[2]);
    Var ce = t.softmax_cross_entropy(cat, 3);
    Var fro = t.frobenius(t.sub(gram, t.constant(RealMatrix::Identity(3, 3))), 1e-8);
    return t.add(t.add(kl, ce), t.add(fro, t.sum(t.relu(stacked))));
  });
  EXPECT_LT(result.max_rel_error, 1e-4) << "checked " << result.checked;
}

TEST(Fuzz, NoNonFiniteOnValidInputs) {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> scale(0.01, 50.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const double s = scale(rng);
    const RealMatrix x = random_matrix(rng, 1, 6, s);
    const RealMatrix y = random_matrix(rng, 1, 6, s);
    GradTape t;
    Var a = t.leaf(x), b = t.leaf(y);
    Var loss = t.add(t.kl_softmax(a, b), t.softmax_cross_entropy(a, trial % 6));
    if (x.norm() > kNormFloor) {
      loss = t.add(loss, t.sum(t.l2_normalize_rows(a)));
    }
    loss = t.add(loss, t.frobenius(t.softmax_rows(b), 1e-8));
    t.backward(loss);
    ASSERT_TRUE(std::isfinite(loss.scalar()));
    ASSERT_TRUE(t.grad(a).allFinite());
    ASSERT_TRUE(t.grad(b).allFinite());
  }
}

}  // namespace
}  // namespace omnivat
