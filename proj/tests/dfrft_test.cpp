#include "omnivat/dfrft.hpp"
#include "omnivat/errors.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

namespace omnivat {
namespace {

using cd = std::complex<double>;
using testing::random_matrix;

double frob(const ComplexMatrix& m) { return std::sqrt(m.re.squaredNorm() + m.im.squaredNorm()); }

ComplexMatrix identity(Index n) {
  return ComplexMatrix::FromReal(RealMatrix::Identity(n, n));
}

TEST(DfrftPlan, EvenLengthSkipsIndexNMinusOne) {
  const DfrftPlan plan(4);
  const std::vector<int> idx(plan.hermite_index().begin(), plan.hermite_index().end());
  EXPECT_EQ(idx, (std::vector<int>{0, 1, 2, 4}));
}

TEST(DfrftPlan, EvenLengthIndicesMatchDftEigenvalueMultiplicities) {
  // Brute force: eigenvalues of the 4x4 unitary DFT, rounded to {1,-j,-1,j}.
  const DfrftPlan plan(4);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(plan.dft_matrix().ToEigen());
  auto bucket = [](cd z) {
    const double angle = std::arg(z);
    return static_cast<int>(std::lround(-angle / (std::numbers::pi / 2.0)) + 4) % 4;
  };
  std::vector<int> from_dft, from_plan;
  for (Index i = 0; i < 4; ++i) from_dft.push_back(bucket(solver.eigenvalues()[i]));
  for (int k : plan.hermite_index()) from_plan.push_back(k % 4);
  std::sort(from_dft.begin(), from_dft.end());
  std::sort(from_plan.begin(), from_plan.end());
  EXPECT_EQ(from_dft, from_plan);
  EXPECT_EQ(from_dft, (std::vector<int>{0, 0, 1, 2}));
}

TEST(DfrftPlan, OddLengthUsesAllIndices) {
  const DfrftPlan plan(5);
  const std::vector<int> idx(plan.hermite_index().begin(), plan.hermite_index().end());
  EXPECT_EQ(idx, (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(DfrftPlan, CommutingMatrixCommutesWithDft) {
  const DfrftPlan plan(8);
  const ComplexMatrix s = ComplexMatrix::FromReal(plan.commuting_matrix());
  EXPECT_LT(frob(s * plan.dft_matrix() - plan.dft_matrix() * s), 1e-10);
}

TEST(DfrftPlan, EigenbasisIsOrthonormalAndSignFixed) {
  for (Index n : {2, 3, 4, 7, 16, 33, 64, 128}) {
    const DfrftPlan plan(n);
    const RealMatrix& v = plan.eigenvectors();
    EXPECT_LT((v.transpose() * v - RealMatrix::Identity(n, n)).norm(), 1e-10) << n;
    std::vector<int> idx(plan.hermite_index().begin(), plan.hermite_index().end());
    std::sort(idx.begin(), idx.end());
    EXPECT_TRUE(std::adjacent_find(idx.begin(), idx.end()) == idx.end()) << n;
    for (Index k = 0; k < n; ++k) {
      const double tol = 1e-10 * v.col(k).cwiseAbs().maxCoeff();
      for (Index i = 0; i < n; ++i) {
        if (std::abs(v(i, k)) > tol) {
          EXPECT_GT(v(i, k), 0.0);
          break;
        }
      }
      // v_k is an eigenvector of S.
      EXPECT_LT((plan.commuting_matrix() * v.col(k) - plan.commuting_eigenvalues()[k] * v.col(k))
                    .norm(),
                1e-9);
    }
  }
}

TEST(DfrftPlan, DeterministicAcrossBuilds) {
  const DfrftPlan a(32), b(32);
  EXPECT_EQ(a.eigenvectors(), b.eigenvectors());
}

TEST(DfrftPlan, LowOrderVectorsHaveHermiteZeroCrossings) {
  const DfrftPlan plan(32);
  for (Index k = 0; k < 8; ++k) {
    EXPECT_EQ(zero_crossings(plan.eigenvectors().col(k)), plan.hermite_index()[k]) << k;
  }
}

TEST(DfrftPlan, RejectsTinyLength) {
  EXPECT_THROW(DfrftPlan(1), DimensionError);
  EXPECT_THROW(DfrftPlan(0), DimensionError);
}

TEST(FractionalMatrix, OrderZeroIsIdentity) {
  const DfrftPlan plan(16);
  EXPECT_LT(frob(plan.fractional_matrix(0.0) - identity(16)), 1e-10);
}

TEST(FractionalMatrix, FourthPowerOfFourierIsIdentity) {
  const DfrftPlan plan(12);
  const ComplexMatrix f1 = plan.fractional_matrix(1.0);
  EXPECT_LT(frob(f1 * f1 * f1 * f1 - identity(12)), 1e-8);
}

TEST(FractionalMatrix, OrdersAdd) {
  const DfrftPlan plan(9);
  EXPECT_LT(frob(plan.fractional_matrix(0.3) * plan.fractional_matrix(0.7) -
                 plan.fractional_matrix(1.0)),
            1e-9);
}

TEST(FractionalMatrix, OrderOneIsTheUnitaryDft) {
  for (Index n : {2, 3, 4, 5, 8, 16, 17, 64}) {
    const DfrftPlan plan(n);
    EXPECT_LT(frob(plan.fractional_matrix(1.0) - plan.dft_matrix()), 1e-8) << n;
  }
}

TEST(FractionalMatrix, Invariants) {
  const double orders[] = {0.0, 0.25, 0.5, 1.0, 1.37, 2.0, 3.9};
  for (Index n : {4, 8, 16, 64}) {
    const DfrftPlan plan(n);
    const ComplexMatrix dft = plan.dft_matrix();
    const ComplexMatrix f1 = plan.fractional_matrix(1.0);
    EXPECT_LT(frob(f1 * dft - dft * f1), 1e-8);
    for (Index k = 0; k < n; ++k) {
      const ComplexMatrix vk = ComplexMatrix::FromReal(plan.eigenvectors().col(k));
      const cd lambda = std::polar(1.0, -std::numbers::pi * plan.hermite_index()[k] / 2.0);
      const ComplexMatrix scaled(lambda.real() * vk.re, lambda.imag() * vk.re);
      EXPECT_LT(frob(f1 * vk - scaled), 1e-8);
    }
    for (double p : orders) {
      const ComplexMatrix f = plan.fractional_matrix(p);
      EXPECT_LT(frob(f.adjoint() * f - identity(n)), 1e-9) << "n=" << n << " p=" << p;
      EXPECT_LT(frob(plan.fractional_matrix(p + 4.0) - f), 1e-9);
      EXPECT_LT(frob(plan.fractional_matrix(-p) - f.adjoint()), 1e-9);
    }
  }
}

TEST(FractionalMatrix, IndexAdditivityGrid) {
  const double grid[] = {-0.8, 0.1, 0.5, 1.2, 2.7};
  const DfrftPlan plan(16);
  for (double a : grid) {
    for (double b : grid) {
      EXPECT_LT(frob(plan.fractional_matrix(a) * plan.fractional_matrix(b) -
                     plan.fractional_matrix(a + b)),
                1e-9);
    }
  }
}

TEST(Apply, Examples) {
  const DfrftPlan plan(10);
  std::mt19937_64 rng(3);
  const RealVector x = random_matrix(rng, 10, 1).col(0);

  const ComplexMatrix same = plan.apply(0.0, x);
  EXPECT_LT((same.re - x).norm(), 1e-10);
  EXPECT_LT(same.im.norm(), 1e-10);

  // F_2 is parity: x[n] -> x[-n mod N], built from F_1^2 as the oracle.
  const ComplexMatrix f1 = plan.fractional_matrix(1.0);
  const ComplexMatrix parity = f1 * f1;
  RealMatrix perm = RealMatrix::Zero(10, 10);
  for (Index n = 0; n < 10; ++n) perm(n, (10 - n) % 10) = 1.0;
  EXPECT_LT(frob(parity - ComplexMatrix::FromReal(perm)), 1e-8);
  const ComplexMatrix flipped = plan.apply(2.0, x);
  EXPECT_LT((flipped.re - perm * x).norm(), 1e-8);
  EXPECT_LT(flipped.im.norm(), 1e-8);

  const ComplexMatrix impulse = plan.apply(0.5, RealVector(RealVector::Unit(10, 0)));
  EXPECT_NEAR(std::sqrt(impulse.re.squaredNorm() + impulse.im.squaredNorm()), 1.0, 1e-9);

  const ComplexMatrix y = plan.apply(0.77, x);
  const ComplexMatrix direct = plan.fractional_matrix(0.77) * ComplexMatrix::FromReal(x);
  EXPECT_LT(frob(y - direct), 1e-10);
  EXPECT_NEAR(std::sqrt(y.re.squaredNorm() + y.im.squaredNorm()), x.norm(), 1e-9);

  EXPECT_THROW(plan.apply(0.5, RealVector(RealVector::Zero(9))), DimensionError);
}

TEST(OrderGradient, MatchesFiniteDifference) {
  const double h = 1e-5;
  for (Index n : {4, 11, 32}) {
    const DfrftPlan plan(n);
    for (double p : {-0.4, 0.5, 1.3, 2.9}) {
      const ComplexMatrix fd = [&] {
        ComplexMatrix d = plan.fractional_matrix(p + h) - plan.fractional_matrix(p - h);
        d.re /= 2 * h;
        d.im /= 2 * h;
        return d;
      }();
      const ComplexMatrix g = plan.order_gradient(p);
      EXPECT_LT(frob(g - fd) / frob(g), 1e-6) << "n=" << n << " p=" << p;
    }
  }
}

TEST(OrderGradient, SkewHermitianAtIdentity) {
  const DfrftPlan plan(8);
  const Eigen::MatrixXcd f0 = plan.fractional_matrix(0.0).ToEigen();
  const Eigen::MatrixXcd g = plan.order_gradient(0.0).ToEigen();
  const cd tr = (f0.adjoint() * g).trace();
  EXPECT_NEAR(tr.real(), 0.0, 1e-12);
  EXPECT_GT(std::abs(tr.imag()), 1.0);
}

TEST(OrderGradient, FourPeriodic) {
  const DfrftPlan plan(12);
  EXPECT_LT(frob(plan.order_gradient(0.37) - plan.order_gradient(4.37)), 1e-9);
}

TEST(TapeTransform, GradientsMatchFiniteDifferences) {
  const DfrftPlan plan(6);
  std::mt19937_64 rng(17);
  const RealMatrix xr = random_matrix(rng, 3, 6);
  const RealMatrix xi = random_matrix(rng, 3, 6);
  const RealMatrix w = random_matrix(rng, 3, 6);
  RealMatrix p0(1, 1);
  p0(0, 0) = 0.63;
  const auto result = testing::check_gradients(
      {xr, xi, p0}, [&](GradTape& t, const std::vector<Var>& in) {
        FractionalMatrixCache cache(plan);
        ComplexVar y = fractional_transform_rows(t, cache, in[2], {in[0], in[1]});
        Var wr = t.constant(w);
        return t.add(t.sum(t.mul(y.re, wr)), t.sum(t.mul(y.im, t.mul(y.im, wr))));
      });
  EXPECT_LT(result.max_rel_error, 1e-5);
}

TEST(TapeTransform, ValueMatchesMatrixProduct) {
  const DfrftPlan plan(5);
  FractionalMatrixCache cache(plan);
  std::mt19937_64 rng(2);
  const ComplexMatrix x(random_matrix(rng, 2, 5), random_matrix(rng, 2, 5));
  GradTape t;
  ComplexVar y = fractional_transform_rows(t, cache, t.constant(RealMatrix::Constant(1, 1, 0.3)),
                                           t.complex_constant(x));
  const ComplexMatrix f = plan.fractional_matrix(0.3);
  const ComplexMatrix direct{x.re * f.re.transpose() - x.im * f.im.transpose(),
                             x.re * f.im.transpose() + x.im * f.re.transpose()};
  EXPECT_LT((y.re.value() - direct.re).norm(), 1e-12);
  EXPECT_LT((y.im.value() - direct.im).norm(), 1e-12);
}

TEST(Cache, ReusesWithinToleranceAndRefreshesOnChange) {
  const DfrftPlan plan(6);
  FractionalMatrixCache cache(plan);
  const ComplexMatrix* first = &cache.matrix(0.5);
  const ComplexMatrix a = *first;
  EXPECT_EQ(&cache.matrix(0.5), first);
  const ComplexMatrix b = cache.matrix(0.6);
  EXPECT_GT(frob(a - b), 1e-3);
  EXPECT_LT(frob(b - plan.fractional_matrix(0.6)), 1e-15);
}

TEST(FractionalOrder, Parse) {
  const auto learn = FractionalOrder::Parse("0.5");
  EXPECT_DOUBLE_EQ(learn.value, 0.5);
  EXPECT_TRUE(learn.trainable);
  const auto fixed = FractionalOrder::Parse("fixed:1");
  EXPECT_DOUBLE_EQ(fixed.value, 1.0);
  EXPECT_FALSE(fixed.trainable);
  EXPECT_EQ(FractionalOrder::Parse(fixed.ToString()).value, 1.0);
  EXPECT_THROW(FractionalOrder::Parse("half"), ConfigError);
  EXPECT_THROW(FractionalOrder::Parse("0.5x"), ConfigError);
}

TEST(ContinuousKernel, QuarterTurnIsFourierKernel) {
  for (double u0 : {-1.5, 0.0, 0.7}) {
    for (double up : {-0.3, 1.1}) {
      const cd k = continuous_kernel(1.0, u0, up);
      const cd fourier = std::polar(1.0 / std::sqrt(2.0 * std::numbers::pi), -u0 * up);
      EXPECT_LT(std::abs(k - fourier), 1e-12);
    }
  }
  EXPECT_THROW(continuous_kernel(2.0, 0.1, 0.2), DegenerateError);
  EXPECT_THROW(continuous_kernel(0.0, 0.1, 0.2), DegenerateError);
}

TEST(PerturbedPlan, BreaksDftConsistency) {
  const DfrftPlan plan(8);
  const DfrftPlan broken = plan.with_perturbed_index(3, 1);
  EXPECT_GT(frob(broken.fractional_matrix(1.0) - plan.dft_matrix()), 1e-3);
}

}  // namespace
}  // namespace omnivat
