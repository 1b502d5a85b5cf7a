#include "omnivat/numeric/linalg.hpp"

#include "omnivat/errors.hpp"

#include <Eigen/Eigenvalues>

namespace omnivat {

SymEig sym_eig(const RealMatrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionError("sym_eig: matrix must be square and non-empty");
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw SymmetryError("sym_eig: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw IterationLimitError("sym_eig: eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

RealVector softmax(const RealVector& v) {
  if (v.size() == 0) throw DimensionError("softmax: empty vector");
  RealVector e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

RealMatrix relu(const RealMatrix& x) { return x.cwiseMax(0.0); }

ComplexMatrix relu(const ComplexMatrix& x) {
  return {x.re.cwiseMax(0.0), x.im.cwiseMax(0.0)};
}

RealVector l2_normalize(const RealVector& v) {
  const double n = v.norm();
  if (!(n > kNormFloor)) throw DegenerateError("l2_normalize: near-zero vector");
  return v / n;
}

}  // namespace omnivat
