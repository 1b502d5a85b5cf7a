#pragma once

#include "omnivat/numeric/types.hpp"

namespace omnivat {

struct SymEig {
  RealVector values;   // ascending
  RealMatrix vectors;  // orthonormal columns, column k pairs with values[k]
};

/// Eigendecomposition of a real symmetric matrix. Throws SymmetryError when
/// the input deviates from symmetry by more than 1e-12, DimensionError when
/// it is not square, IterationLimitError if the solver does not converge.
SymEig sym_eig(const RealMatrix& m);

/// Numerically stable softmax (max-shifted). Throws DimensionError on empty input.
RealVector softmax(const RealVector& v);

RealMatrix relu(const RealMatrix& x);
ComplexMatrix relu(const ComplexMatrix& x);

inline constexpr double kNormFloor = 1e-12;

/// Returns v / ||v||_2. Throws DegenerateError when ||v||_2 <= 1e-12.
RealVector l2_normalize(const RealVector& v);

}  // namespace omnivat
