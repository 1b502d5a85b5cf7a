#pragma once

#include "omnivat/numeric/types.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace omnivat {

class GradTape;

/// Handle to a value recorded on a GradTape. Cheap to copy; valid while the
/// tape is alive.
class Var {
 public:
  Var() = default;

  const RealMatrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  std::size_t id() const { return id_; }
  GradTape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class GradTape;
  Var(GradTape* tape, std::size_t id) : tape_(tape), id_(id) {}

  GradTape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// A complex quantity carried on the tape as two real planes.
struct ComplexVar {
  Var re;
  Var im;
};

enum class OpKind {
  kLeaf,
  kConstant,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kAddRow,
  kScale,
  kRelu,
  kSoftmaxRows,
  kMeanRows,
  kSum,
  kTranspose,
  kConcatCols,
  kConcatRows,
  kL2NormalizeRows,
  kKlSoftmax,
  kSoftmaxCrossEntropy,
  kFrobenius,
  kParamLinear,
  kOpaque,
};

/// Define-by-run reverse-mode gradient recorder over dense real matrices.
///
/// Nodes are appended in evaluation order, so the record is already a
/// topological order; backward() walks it once from the loss to the first
/// node. Gradients accumulate additively across fan-out. A tape is confined
/// to one thread.
class GradTape {
 public:
  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  Var leaf(RealMatrix value);
  Var constant(RealMatrix value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  /// m (n x d) plus a 1 x d row broadcast to every row.
  Var add_row(Var m, Var row);
  Var scale(Var a, double c);
  Var relu(Var a);
  Var softmax_rows(Var a);
  /// n x d -> 1 x d column means.
  Var mean_rows(Var a);
  /// Sum of all entries as a 1 x 1 node.
  Var sum(Var a);
  Var transpose(Var a);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  /// Each row scaled to unit L2 norm; throws DegenerateError on a row with
  /// norm <= 1e-12.
  Var l2_normalize_rows(Var a);
  /// KL(softmax(p_logits) || softmax(q_logits)) for 1 x n rows, with q
  /// clamped below at q_floor inside the logarithm.
  Var kl_softmax(Var p_logits, Var q_logits, double q_floor = 1e-12);
  /// -log softmax(logits)[label] for a 1 x C row.
  Var softmax_cross_entropy(Var logits, Index label);
  /// Frobenius norm. The derivative uses a / sqrt(sum a^2 + eps^2), which
  /// stays bounded at a = 0; eps = 0 gives a zero subgradient there.
  Var frobenius(Var a, double eps = 0.0);
  /// y = x * m(p)^T for a matrix family m(p) evaluated at the scalar node p,
  /// with dm_dp its derivative at the same p.
  Var param_linear(Var x, Var p, RealMatrix m, RealMatrix dm_dp);
  /// Records a value with no derivative rule. backward() throws
  /// UnsupportedOpError if a gradient reaches it.
  Var opaque(std::string name, RealMatrix value, std::span<const Var> parents);

  // Complex helpers built from the primitives above.
  ComplexVar complex_leaf(const ComplexMatrix& v);
  ComplexVar complex_constant(const ComplexMatrix& v);
  ComplexVar add(const ComplexVar& a, const ComplexVar& b);
  ComplexVar relu(const ComplexVar& a);
  /// Real matrix acting on both planes from the right.
  ComplexVar matmul(const ComplexVar& a, Var real);
  /// [Re | Im] flattened to a 1 x 2n row; input must be a single row.
  Var flatten(const ComplexVar& a);

  /// Reverse sweep from a 1 x 1 loss node.
  void backward(Var loss);

  /// Gradient of the last backward() with respect to v. Zero if v did not
  /// influence the loss.
  RealMatrix grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(Var v) const { return nodes_[v.id()].kind; }
  /// Nodes processed by the last backward(); each at most once.
  std::size_t last_sweep_visits() const { return last_visits_; }

 private:
  friend class Var;
  using BackwardFn = std::function<void(GradTape&, const RealMatrix& g)>;

  struct Node {
    OpKind kind;
    RealMatrix value;
    RealMatrix grad;
    bool has_grad = false;
    BackwardFn backward;
    std::string name;
  };

  Var push(OpKind kind, RealMatrix value, BackwardFn fn);
  void accumulate(std::size_t id, const RealMatrix& g);
  const RealMatrix& val(std::size_t id) const { return nodes_[id].value; }
  void check_same_tape(Var v) const;

  std::vector<Node> nodes_;
  std::size_t last_visits_ = 0;
};

inline const RealMatrix& Var::value() const { return tape_->val(id_); }

}  // namespace omnivat
