#pragma once

#include <Eigen/Dense>

#include <complex>

namespace omnivat {

using RealMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Complex matrix stored as two real planes of equal shape.
struct ComplexMatrix {
  RealMatrix re;
  RealMatrix im;

  ComplexMatrix() = default;
  ComplexMatrix(RealMatrix real, RealMatrix imag)
      : re(std::move(real)), im(std::move(imag)) {}

  static ComplexMatrix Zero(Index rows, Index cols) {
    return {RealMatrix::Zero(rows, cols), RealMatrix::Zero(rows, cols)};
  }
  static ComplexMatrix FromReal(const RealMatrix& real) {
    return {real, RealMatrix::Zero(real.rows(), real.cols())};
  }
  static ComplexMatrix FromEigen(const Eigen::MatrixXcd& m) {
    return {m.real(), m.imag()};
  }

  Index rows() const { return re.rows(); }
  Index cols() const { return re.cols(); }

  Eigen::MatrixXcd ToEigen() const {
    Eigen::MatrixXcd out(rows(), cols());
    out.real() = re;
    out.imag() = im;
    return out;
  }

  ComplexMatrix adjoint() const {
    return {re.transpose(), -im.transpose()};
  }

  bool allFinite() const { return re.allFinite() && im.allFinite(); }

  /// Real row vector [Re | Im] of length 2 * size, row-major within a plane.
  RealMatrix Flattened() const {
    RealMatrix out(1, 2 * re.size());
    out.leftCols(re.size()) = re.reshaped<Eigen::RowMajor>().transpose();
    out.rightCols(im.size()) = im.reshaped<Eigen::RowMajor>().transpose();
    return out;
  }
};

inline ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
  return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}

inline ComplexMatrix operator+(const ComplexMatrix& a, const ComplexMatrix& b) {
  return {a.re + b.re, a.im + b.im};
}

inline ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b) {
  return {a.re - b.re, a.im - b.im};
}

using ComplexVector = ComplexMatrix;

}  // namespace omnivat
