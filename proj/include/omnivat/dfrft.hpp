#pragma once

#include "omnivat/numeric/tape.hpp"
#include "omnivat/numeric/types.hpp"

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace omnivat {

/// Order p of the fractional transform. A non-trainable order keeps its
/// value through training and its gradient is discarded.
struct FractionalOrder {
  double value = 0.5;
  bool trainable = true;

  /// Accepts "0.5" (learnable) or "fixed:<value>".
  static FractionalOrder Parse(const std::string& text);
  std::string ToString() const;
};

/// Eigenbasis of the discrete fractional Fourier transform for one length N.
///
/// The eigenvectors are those of the real symmetric matrix S that commutes
/// with the unitary DFT (second difference plus 2cos(2 pi n / N) on the
/// diagonal). S is restricted to the even and odd subspaces separately;
/// within each parity the vectors are ranked by descending S eigenvalue and
/// receive Hermite indices 0,2,4,... and 1,3,5,... For even N the last even
/// vector takes index N, so the index set is {0..N-2, N}. Each column's
/// first nonzero entry is positive.
class DfrftPlan {
 public:
  /// Throws DimensionError for n < 2.
  explicit DfrftPlan(Index n);

  Index size() const { return n_; }
  /// N x N, orthonormal columns ordered by Hermite index.
  const RealMatrix& eigenvectors() const { return vectors_; }
  std::span<const int> hermite_index() const { return hermite_; }
  /// Eigenvalue of S paired with each column.
  const RealVector& commuting_eigenvalues() const { return s_values_; }
  const RealMatrix& commuting_matrix() const { return s_; }
  /// Unitary DFT with entries exp(-2 pi j m n / N) / sqrt(N).
  const ComplexMatrix& dft_matrix() const { return dft_; }

  /// F_p = sum_k v_k exp(-j pi k p / 2) v_k^T.
  ComplexMatrix fractional_matrix(double p) const;
  /// dF_p/dp = sum_k v_k (-j pi k / 2) exp(-j pi k p / 2) v_k^T.
  ComplexMatrix order_gradient(double p) const;
  /// F_p x for a length-N column vector.
  ComplexMatrix apply(double p, const ComplexMatrix& x) const;
  ComplexMatrix apply(double p, const RealVector& x) const;

  /// Test hook: returns a copy whose index for column k is shifted by delta.
  DfrftPlan with_perturbed_index(Index column, int delta) const;

 private:
  ComplexMatrix synthesize(double p, bool derivative) const;

  Index n_;
  RealMatrix s_;
  RealMatrix vectors_;
  RealVector s_values_;
  std::vector<int> hermite_;
  ComplexMatrix dft_;
};

/// Sign changes of v read in centered order (-N/2 .. N/2 around index 0),
/// ignoring entries below 1e-9 of the largest magnitude.
int zero_crossings(const RealVector& v);

/// Keeps F_p and dF_p/dp for the most recent p. Not thread-safe.
class FractionalMatrixCache {
 public:
  explicit FractionalMatrixCache(const DfrftPlan& plan) : plan_(&plan) {}

  const DfrftPlan& plan() const { return *plan_; }
  const ComplexMatrix& matrix(double p);
  const ComplexMatrix& gradient(double p);

 private:
  void refresh(double p);

  const DfrftPlan* plan_;
  std::optional<double> p_;
  ComplexMatrix f_;
  ComplexMatrix df_;
};

/// Records F_p applied to every row of x on the tape (rows out = F_p row).
/// p is a 1 x 1 node; pass a constant to keep the order fixed.
ComplexVar fractional_transform_rows(GradTape& tape, FractionalMatrixCache& cache, Var p,
                                     const ComplexVar& x);

/// Continuous FrFT kernel K_p(u0, up) with alpha = p pi / 2. Only defined for
/// alpha != n pi; at multiples of pi the kernel is a Dirac delta and this
/// throws DegenerateError.
std::complex<double> continuous_kernel(double p, double u0, double up);

}  // namespace omnivat
