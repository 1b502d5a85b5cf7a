#pragma once

#include "omnivat/numeric/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace omnivat {

/// One measured invariant: pass iff measured < tolerance.
struct CheckRow {
  std::string suite;
  std::string name;
  double measured = 0;
  double tolerance = 0;
  bool pass = false;
};

/// Unitarity, additivity, F_0 = I, 4-periodicity and F_1 = DFT for N in
/// {4, 8, 16, 64} over seven orders. inject_fault shifts one Hermite index
/// of every plan before measuring.
std::vector<CheckRow> check_dfrft(bool inject_fault = false);

struct JointGradientReport {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t scalars = 0;
  std::string worst;  // tensor[index] with the largest error
  double seconds = 0;
};

/// Central differences of step h against the tape on the joint loss of a
/// D=8, E=2, R=2, B=4 model, over every trainable scalar including p.
/// Relative error is |g - fd| / max(|g|, |fd|, 1e-7).
JointGradientReport joint_gradient_check(std::uint64_t seed = 7, double h = 1e-4);

std::vector<CheckRow> check_gradients();
/// Identical-node and orthogonal-layer NOD values.
std::vector<CheckRow> check_nod();
/// Node counts of every generator at R = 1..5.
std::vector<CheckRow> check_tree();

}  // namespace omnivat
