#include "omnivat/dfrft.hpp"

#include "omnivat/errors.hpp"
#include "omnivat/numeric/linalg.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numbers>
#include <numeric>

namespace omnivat {

namespace {

RealMatrix build_commuting_matrix(Index n) {
  RealMatrix s = RealMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    s(i, i) = 2.0 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                             static_cast<double>(n)) -
              4.0;
    s(i, (i + 1) % n) += 1.0;
    s(i, (i + n - 1) % n) += 1.0;
  }
  return s;
}

// Orthonormal bases of the even (v[n] = v[-n]) and odd subspaces.
RealMatrix parity_basis(Index n, bool even) {
  const Index pairs = (n - 1) / 2;
  const bool has_nyquist = n % 2 == 0;
  const Index dim = even ? 1 + pairs + (has_nyquist ? 1 : 0) : pairs;
  RealMatrix b = RealMatrix::Zero(n, dim);
  const double h = std::sqrt(0.5);
  Index col = 0;
  if (even) b(0, col++) = 1.0;
  for (Index k = 1; k <= pairs; ++k, ++col) {
    b(k, col) = h;
    b(n - k, col) = even ? h : -h;
  }
  if (even && has_nyquist) b(n / 2, col) = 1.0;
  return b;
}

void fix_sign(Eigen::Ref<RealVector> v) {
  const double tol = 1e-10 * v.cwiseAbs().maxCoeff();
  for (Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > tol) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

ComplexMatrix unitary_dft(Index n) {
  ComplexMatrix f = ComplexMatrix::Zero(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Index m = 0; m < n; ++m) {
    for (Index k = 0; k < n; ++k) {
      // Reduce m*k mod n first to keep the angle small.
      const double angle = -2.0 * std::numbers::pi *
                           static_cast<double>((m * k) % n) / static_cast<double>(n);
      f.re(m, k) = scale * std::cos(angle);
      f.im(m, k) = scale * std::sin(angle);
    }
  }
  return f;
}

}  // namespace

FractionalOrder FractionalOrder::Parse(const std::string& text) {
  const std::string prefix = "fixed:";
  FractionalOrder order;
  std::string number = text;
  if (text.rfind(prefix, 0) == 0) {
    order.trainable = false;
    number = text.substr(prefix.size());
  }
  std::size_t used = 0;
  try {
    order.value = std::stod(number, &used);
  } catch (const std::exception&) {
    throw ConfigError("order: cannot parse '" + text + "'");
  }
  if (used != number.size() || !std::isfinite(order.value)) {
    throw ConfigError("order: cannot parse '" + text + "'");
  }
  return order;
}

std::string FractionalOrder::ToString() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return trainable ? std::string(buf) : "fixed:" + std::string(buf);
}

DfrftPlan::DfrftPlan(Index n) : n_(n) {
  if (n < 2) throw DimensionError("DfrftPlan: N must be at least 2");
  s_ = build_commuting_matrix(n);
  dft_ = unitary_dft(n);

  struct Column {
    RealVector v;
    double s_value;
    int index;
  };
  std::vector<Column> columns;
  for (bool even : {true, false}) {
    const RealMatrix basis = parity_basis(n, even);
    if (basis.cols() == 0) continue;
    const RealMatrix reduced = basis.transpose() * s_ * basis;
    // Symmetrize away rounding so the solver's symmetry check is exact.
    const SymEig eig = sym_eig(0.5 * (reduced + reduced.transpose()));
    const Index dim = basis.cols();
    for (Index rank = 0; rank < dim; ++rank) {
      const Index j = dim - 1 - rank;  // descending eigenvalue
      RealVector v = basis * eig.vectors.col(j);
      v.normalize();
      fix_sign(v);
      int index = static_cast<int>(2 * rank + (even ? 0 : 1));
      if (even && n % 2 == 0 && rank == dim - 1) index = static_cast<int>(n);
      columns.push_back({std::move(v), eig.values[j], index});
    }
  }
  std::sort(columns.begin(), columns.end(),
            [](const Column& a, const Column& b) { return a.index < b.index; });

  vectors_.resize(n, n);
  s_values_.resize(n);
  hermite_.resize(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) {
    vectors_.col(k) = columns[static_cast<std::size_t>(k)].v;
    s_values_[k] = columns[static_cast<std::size_t>(k)].s_value;
    hermite_[static_cast<std::size_t>(k)] = columns[static_cast<std::size_t>(k)].index;
  }
}

ComplexMatrix DfrftPlan::synthesize(double p, bool derivative) const {
  RealVector cre(n_), cim(n_);
  for (Index k = 0; k < n_; ++k) {
    const double phase = -std::numbers::pi * hermite_[static_cast<std::size_t>(k)] / 2.0;
    std::complex<double> c = std::polar(1.0, phase * p);
    if (derivative) c *= std::complex<double>(0.0, phase);
    cre[k] = c.real();
    cim[k] = c.imag();
  }
  return {vectors_ * cre.asDiagonal() * vectors_.transpose(),
          vectors_ * cim.asDiagonal() * vectors_.transpose()};
}

ComplexMatrix DfrftPlan::fractional_matrix(double p) const { return synthesize(p, false); }

ComplexMatrix DfrftPlan::order_gradient(double p) const { return synthesize(p, true); }

ComplexMatrix DfrftPlan::apply(double p, const ComplexMatrix& x) const {
  if (x.rows() != n_ || x.cols() != 1) {
    throw DimensionError("DfrftPlan::apply: expected a length-" + std::to_string(n_) +
                         " column");
  }
  return fractional_matrix(p) * x;
}

ComplexMatrix DfrftPlan::apply(double p, const RealVector& x) const {
  return apply(p, ComplexMatrix::FromReal(x));
}

DfrftPlan DfrftPlan::with_perturbed_index(Index column, int delta) const {
  DfrftPlan copy = *this;
  copy.hermite_.at(static_cast<std::size_t>(column)) += delta;
  return copy;
}

int zero_crossings(const RealVector& v) {
  const Index n = v.size();
  if (n == 0) return 0;
  const double tol = 1e-9 * v.cwiseAbs().maxCoeff();
  const Index lo = n % 2 ? -(n / 2) : -(n / 2) + 1;
  int count = 0;
  int last_sign = 0;
  for (Index m = lo; m <= n / 2; ++m) {
    const double x = v[(m % n + n) % n];
    if (std::abs(x) <= tol) continue;
    const int sign = x > 0.0 ? 1 : -1;
    if (last_sign != 0 && sign != last_sign) ++count;
    last_sign = sign;
  }
  return count;
}

void FractionalMatrixCache::refresh(double p) {
  if (p_ && std::abs(*p_ - p) <= 1e-15) return;
  f_ = plan_->fractional_matrix(p);
  df_ = plan_->order_gradient(p);
  p_ = p;
}

const ComplexMatrix& FractionalMatrixCache::matrix(double p) {
  refresh(p);
  return f_;
}

const ComplexMatrix& FractionalMatrixCache::gradient(double p) {
  refresh(p);
  return df_;
}

ComplexVar fractional_transform_rows(GradTape& tape, FractionalMatrixCache& cache, Var p,
                                     const ComplexVar& x) {
  const double order = p.scalar();
  const ComplexMatrix& f = cache.matrix(order);
  const ComplexMatrix& df = cache.gradient(order);
  if (x.re.cols() != f.cols()) {
    throw DimensionError("fractional_transform_rows: row length must equal plan size");
  }
  // (Xr + jXi)(A + jB)^T with F = A + jB.
  Var rr = tape.param_linear(x.re, p, f.re, df.re);
  Var ii = tape.param_linear(x.im, p, f.im, df.im);
  Var ri = tape.param_linear(x.re, p, f.im, df.im);
  Var ir = tape.param_linear(x.im, p, f.re, df.re);
  return {tape.sub(rr, ii), tape.add(ri, ir)};
}

std::complex<double> continuous_kernel(double p, double u0, double up) {
  const double alpha = p * std::numbers::pi / 2.0;
  const double s = std::sin(alpha);
  if (std::abs(s) < 1e-12) {
    throw DegenerateError("continuous_kernel: Dirac delta at alpha = n*pi");
  }
  const double cot = std::cos(alpha) / s;
  const double csc = 1.0 / s;
  const std::complex<double> amp =
      std::sqrt(std::complex<double>(1.0, -cot) / (2.0 * std::numbers::pi));
  const double phase = u0 * u0 * cot / 2.0 - up * u0 * csc + up * up * cot / 2.0;
  return amp * std::polar(1.0, phase);
}

}  // namespace omnivat
