#include "omnivat/numeric/tape.hpp"

#include "omnivat/errors.hpp"
#include "omnivat/numeric/linalg.hpp"

#include <cmath>

namespace omnivat {

namespace {

void require_same_shape(const char* op, const RealMatrix& a, const RealMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch (" +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
  }
}

RealMatrix softmax_rows_value(const RealMatrix& a) {
  RealMatrix out(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    out.row(r) = softmax(a.row(r).transpose()).transpose();
  }
  return out;
}

}  // namespace

void GradTape::check_same_tape(Var v) const {
  if (v.tape() != this) throw Error("GradTape: variable belongs to another tape");
}

Var GradTape::push(OpKind kind, RealMatrix value, BackwardFn fn) {
  if (!value.allFinite()) {
    throw Error("GradTape: non-finite value produced");
  }
  nodes_.push_back(Node{kind, std::move(value), {}, false, std::move(fn), {}});
  return Var(this, nodes_.size() - 1);
}

void GradTape::accumulate(std::size_t id, const RealMatrix& g) {
  Node& n = nodes_[id];
  if (n.kind == OpKind::kConstant) return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

Var GradTape::leaf(RealMatrix value) {
  return push(OpKind::kLeaf, std::move(value), nullptr);
}

Var GradTape::constant(RealMatrix value) {
  return push(OpKind::kConstant, std::move(value), nullptr);
}

Var GradTape::matmul(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
  const std::size_t ia = a.id(), ib = b.id();
  return push(OpKind::kMatmul, a.value() * b.value(),
              [ia, ib](GradTape& t, const RealMatrix& g) {
                t.accumulate(ia, g * t.val(ib).transpose());
                t.accumulate(ib, t.val(ia).transpose() * g);
              });
}

Var GradTape::add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return push(OpKind::kAdd, a.value() + b.value(),
              [ia, ib](GradTape& t, const RealMatrix& g) {
                t.accumulate(ia, g);
                t.accumulate(ib, g);
              });
}

Var GradTape::sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return push(OpKind::kSub, a.value() - b.value(),
              [ia, ib](GradTape& t, const RealMatrix& g) {
                t.accumulate(ia, g);
                t.accumulate(ib, -g);
              });
}

Var GradTape::mul(Var a, Var b) {
  require_same_shape("mul", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return push(OpKind::kMul, a.value().cwiseProduct(b.value()),
              [ia, ib](GradTape& t, const RealMatrix& g) {
                t.accumulate(ia, g.cwiseProduct(t.val(ib)));
                t.accumulate(ib, g.cwiseProduct(t.val(ia)));
              });
}

Var GradTape::add_row(Var m, Var row) {
  if (row.rows() != 1 || row.cols() != m.cols()) {
    throw DimensionError("add_row: row must be 1 x cols(m)");
  }
  const std::size_t im = m.id(), ir = row.id();
  RealMatrix out = m.value().rowwise() + row.value().row(0);
  return push(OpKind::kAddRow, std::move(out),
              [im, ir](GradTape& t, const RealMatrix& g) {
                t.accumulate(im, g);
                t.accumulate(ir, g.colwise().sum());
              });
}

Var GradTape::scale(Var a, double c) {
  const std::size_t ia = a.id();
  return push(OpKind::kScale, c * a.value(),
              [ia, c](GradTape& t, const RealMatrix& g) { t.accumulate(ia, c * g); });
}

Var GradTape::relu(Var a) {
  const std::size_t ia = a.id();
  return push(OpKind::kRelu, omnivat::relu(a.value()),
              [ia](GradTape& t, const RealMatrix& g) {
                RealMatrix mask = (t.val(ia).array() > 0.0).cast<double>();
                t.accumulate(ia, g.cwiseProduct(mask));
              });
}

Var GradTape::softmax_rows(Var a) {
  const std::size_t ia = a.id();
  auto out = push(OpKind::kSoftmaxRows, softmax_rows_value(a.value()), nullptr);
  const std::size_t io = out.id();
  nodes_[io].backward = [ia, io](GradTape& t, const RealMatrix& g) {
    const RealMatrix& y = t.val(io);
    RealMatrix ga(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      ga.row(r) = y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
    t.accumulate(ia, ga);
  };
  return out;
}

Var GradTape::mean_rows(Var a) {
  const std::size_t ia = a.id();
  const Index n = a.rows();
  return push(OpKind::kMeanRows, a.value().colwise().mean(),
              [ia, n](GradTape& t, const RealMatrix& g) {
                t.accumulate(ia, g.replicate(n, 1) / static_cast<double>(n));
              });
}

Var GradTape::sum(Var a) {
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  RealMatrix out(1, 1);
  out(0, 0) = a.value().sum();
  return push(OpKind::kSum, std::move(out),
              [ia, r, c](GradTape& t, const RealMatrix& g) {
                t.accumulate(ia, RealMatrix::Constant(r, c, g(0, 0)));
              });
}

Var GradTape::transpose(Var a) {
  const std::size_t ia = a.id();
  return push(OpKind::kTranspose, a.value().transpose(),
              [ia](GradTape& t, const RealMatrix& g) {
                t.accumulate(ia, g.transpose());
              });
}

Var GradTape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row count differs");
    cols += p.cols();
  }
  RealMatrix out(rows, cols);
  std::vector<std::pair<std::size_t, Index>> spans;
  Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    spans.emplace_back(p.id(), p.cols());
    at += p.cols();
  }
  return push(OpKind::kConcatCols, std::move(out),
              [spans](GradTape& t, const RealMatrix& g) {
                Index off = 0;
                for (const auto& [id, w] : spans) {
                  t.accumulate(id, g.middleCols(off, w));
                  off += w;
                }
              });
}

Var GradTape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const Index cols = parts[0].cols();
  Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw DimensionError("concat_rows: column count differs");
    rows += p.rows();
  }
  RealMatrix out(rows, cols);
  std::vector<std::pair<std::size_t, Index>> spans;
  Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    spans.emplace_back(p.id(), p.rows());
    at += p.rows();
  }
  return push(OpKind::kConcatRows, std::move(out),
              [spans](GradTape& t, const RealMatrix& g) {
                Index off = 0;
                for (const auto& [id, h] : spans) {
                  t.accumulate(id, g.middleRows(off, h));
                  off += h;
                }
              });
}

Var GradTape::l2_normalize_rows(Var a) {
  const RealMatrix& x = a.value();
  RealVector norms = x.rowwise().norm();
  for (Index r = 0; r < norms.size(); ++r) {
    if (!(norms[r] > kNormFloor)) {
      throw DegenerateError("l2_normalize_rows: near-zero row " + std::to_string(r));
    }
  }
  RealMatrix y = norms.cwiseInverse().asDiagonal() * x;
  const std::size_t ia = a.id();
  auto out = push(OpKind::kL2NormalizeRows, std::move(y), nullptr);
  const std::size_t io = out.id();
  nodes_[io].backward = [ia, io, norms](GradTape& t, const RealMatrix& g) {
    const RealMatrix& y = t.val(io);
    RealMatrix ga(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      ga.row(r) = (g.row(r) - dot * y.row(r)) / norms[r];
    }
    t.accumulate(ia, ga);
  };
  return out;
}

Var GradTape::kl_softmax(Var p_logits, Var q_logits, double q_floor) {
  require_same_shape("kl_softmax", p_logits.value(), q_logits.value());
  if (p_logits.rows() != 1) throw DimensionError("kl_softmax: expects 1 x n rows");
  const RealVector p = softmax(p_logits.value().row(0).transpose());
  const RealVector q = softmax(q_logits.value().row(0).transpose());
  const RealVector q_clamped = q.cwiseMax(q_floor);
  // p log p with the 0 log 0 = 0 convention.
  RealVector log_ratio(p.size());
  for (Index i = 0; i < p.size(); ++i) {
    log_ratio[i] = p[i] > 0.0 ? std::log(p[i]) - std::log(q_clamped[i]) : 0.0;
  }
  RealMatrix out(1, 1);
  out(0, 0) = p.dot(log_ratio);
  const std::size_t ip = p_logits.id(), iq = q_logits.id();
  return push(OpKind::kKlSoftmax, std::move(out),
              [ip, iq, p, q, q_floor, log_ratio](GradTape& t, const RealMatrix& g) {
                const double s = g(0, 0);
                const double mean_u = p.dot(log_ratio);
                RealMatrix gp = (s * p.cwiseProduct((log_ratio.array() - mean_u).matrix()))
                                    .transpose();
                t.accumulate(ip, gp);
                // Clamped entries carry no gradient through log q.
                double mass = 0.0;
                RealVector gq = RealVector::Zero(q.size());
                for (Index i = 0; i < q.size(); ++i) {
                  if (q[i] >= q_floor) {
                    mass += p[i];
                    gq[i] -= p[i];
                  }
                }
                gq += mass * q;
                t.accumulate(iq, (s * gq).transpose());
              });
}

Var GradTape::softmax_cross_entropy(Var logits, Index label) {
  if (logits.rows() != 1) throw DimensionError("softmax_cross_entropy: expects 1 x C");
  if (label < 0 || label >= logits.cols()) {
    throw RangeError("softmax_cross_entropy: label out of range");
  }
  const RealVector z = logits.value().row(0).transpose();
  const double zmax = z.maxCoeff();
  const double lse = zmax + std::log((z.array() - zmax).exp().sum());
  RealMatrix out(1, 1);
  out(0, 0) = lse - z[label];
  const RealVector prob = softmax(z);
  const std::size_t il = logits.id();
  return push(OpKind::kSoftmaxCrossEntropy, std::move(out),
              [il, prob, label](GradTape& t, const RealMatrix& g) {
                RealVector d = prob;
                d[label] -= 1.0;
                t.accumulate(il, (g(0, 0) * d).transpose());
              });
}

Var GradTape::frobenius(Var a, double eps) {
  const double sq = a.value().squaredNorm();
  const double root = std::sqrt(sq + eps * eps);
  RealMatrix out(1, 1);
  out(0, 0) = std::sqrt(sq);
  const std::size_t ia = a.id();
  return push(OpKind::kFrobenius, std::move(out),
              [ia, root](GradTape& t, const RealMatrix& g) {
                const RealMatrix& x = t.val(ia);
                if (root == 0.0) {
                  t.accumulate(ia, RealMatrix::Zero(x.rows(), x.cols()));
                  return;
                }
                t.accumulate(ia, (g(0, 0) / root) * x);
              });
}

Var GradTape::param_linear(Var x, Var p, RealMatrix m, RealMatrix dm_dp) {
  if (p.rows() != 1 || p.cols() != 1) throw DimensionError("param_linear: p must be 1 x 1");
  if (m.cols() != x.cols() || m.rows() != dm_dp.rows() || m.cols() != dm_dp.cols()) {
    throw DimensionError("param_linear: matrix shape mismatch");
  }
  const std::size_t ix = x.id(), ip = p.id();
  RealMatrix y = x.value() * m.transpose();
  return push(OpKind::kParamLinear, std::move(y),
              [ix, ip, m = std::move(m), dm = std::move(dm_dp)](GradTape& t,
                                                                 const RealMatrix& g) {
                t.accumulate(ix, g * m);
                RealMatrix gp(1, 1);
                gp(0, 0) = (g.cwiseProduct(t.val(ix) * dm.transpose())).sum();
                t.accumulate(ip, gp);
              });
}

Var GradTape::opaque(std::string name, RealMatrix value, std::span<const Var> parents) {
  for (const Var& v : parents) check_same_tape(v);
  auto out = push(OpKind::kOpaque, std::move(value), nullptr);
  nodes_[out.id()].name = std::move(name);
  return out;
}

ComplexVar GradTape::complex_leaf(const ComplexMatrix& v) {
  return {leaf(v.re), leaf(v.im)};
}

ComplexVar GradTape::complex_constant(const ComplexMatrix& v) {
  return {constant(v.re), constant(v.im)};
}

ComplexVar GradTape::add(const ComplexVar& a, const ComplexVar& b) {
  return {add(a.re, b.re), add(a.im, b.im)};
}

ComplexVar GradTape::relu(const ComplexVar& a) { return {relu(a.re), relu(a.im)}; }

ComplexVar GradTape::matmul(const ComplexVar& a, Var real) {
  return {matmul(a.re, real), matmul(a.im, real)};
}

Var GradTape::flatten(const ComplexVar& a) {
  if (a.re.rows() != 1) throw DimensionError("flatten: expects a single row");
  const Var parts[] = {a.re, a.im};
  return concat_cols(parts);
}

void GradTape::backward(Var loss) {
  check_same_tape(loss);
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw DimensionError("backward: loss must be a 1 x 1 node");
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  nodes_[loss.id()].grad = RealMatrix::Ones(1, 1);
  nodes_[loss.id()].has_grad = true;
  last_visits_ = 0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    ++last_visits_;
    if (n.kind == OpKind::kOpaque) {
      throw UnsupportedOpError("backward: no derivative rule for '" + n.name + "'");
    }
    if (n.backward) {
      // The closure may append to other nodes' grads but never to its own.
      const RealMatrix g = n.grad;
      n.backward(*this, g);
    }
  }
}

RealMatrix GradTape::grad(Var v) const {
  check_same_tape(v);
  const Node& n = nodes_[v.id()];
  if (!n.has_grad) return RealMatrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

}  // namespace omnivat
