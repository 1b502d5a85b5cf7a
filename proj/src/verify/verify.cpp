#include "omnivat/verify.hpp"

#include "omnivat/dfrft.hpp"
#include "omnivat/dtg.hpp"
#include "omnivat/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace omnivat {

namespace {

double frob(const ComplexMatrix& m) {
  return std::sqrt(m.re.squaredNorm() + m.im.squaredNorm());
}

ComplexMatrix identity(Index n) { return ComplexMatrix::FromReal(RealMatrix::Identity(n, n)); }

CheckRow row(std::string suite, std::string name, double measured, double tolerance) {
  return {std::move(suite), std::move(name), measured, tolerance, measured < tolerance};
}

RealMatrix gaussian(std::mt19937_64& rng, Index rows, Index cols, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  RealMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

double joint_value(const ModelParams& params, const DfrftPlan& plan,
                   std::span<const TrainSample> batch, const TrainConfig& config) {
  GradTape tape;
  FractionalMatrixCache cache(plan);
  const ModelVars vars = ModelVars::Leaves(tape, params);
  return joint_loss(tape, cache, vars, batch, config).total.scalar();
}

}  // namespace

std::vector<CheckRow> check_dfrft(bool inject_fault) {
  const double orders[] = {0.0, 0.25, 0.5, 1.0, 1.37, 2.0, 3.9};
  std::vector<CheckRow> rows;
  for (Index n : {4, 8, 16, 64}) {
    DfrftPlan plan(n);
    if (inject_fault) plan = plan.with_perturbed_index(n / 2, 1);
    double unitary = 0, additive = 0, period = 0;
    for (double p : orders) {
      const ComplexMatrix f = plan.fractional_matrix(p);
      unitary = std::max(unitary, frob(f.adjoint() * f - identity(n)));
      period = std::max(period, frob(plan.fractional_matrix(p + 4.0) - f));
      for (double q : orders) {
        additive = std::max(additive, frob(f * plan.fractional_matrix(q) -
                                           plan.fractional_matrix(p + q)));
      }
    }
    const std::string tag = "N=" + std::to_string(n);
    rows.push_back(row("dfrft", tag + " unitarity", unitary, 1e-9));
    rows.push_back(row("dfrft", tag + " additivity", additive, 1e-9));
    rows.push_back(row("dfrft", tag + " order 0 is identity",
                       frob(plan.fractional_matrix(0.0) - identity(n)), 1e-9));
    rows.push_back(row("dfrft", tag + " period 4", period, 1e-9));
    rows.push_back(row("dfrft", tag + " order 1 is the DFT",
                       frob(plan.fractional_matrix(1.0) - plan.dft_matrix()), 1e-8));
  }
  return rows;
}

JointGradientReport joint_gradient_check(std::uint64_t seed, double h) {
  const auto start = std::chrono::steady_clock::now();
  TrainConfig config;
  config.dim = 8;
  config.expansion = 2;
  config.depth = 2;
  config.batch = 4;
  config.seed = seed;
  config.init_noise = 0.1;
  const Index classes = 3;
  const DfrftPlan plan(config.dim);

  ModelParams params = ModelParams::Init(config, classes);
  std::mt19937_64 rng(seed);
  // Biases start at zero; move them off it so the ReLUs are not all
  // switched on the same side.
  params.bias = gaussian(rng, 1, classes, 0.1);
  params.mffa.ffn_b1 = gaussian(rng, 1, config.dim, 0.1);
  params.mffa.ffn_b2 = gaussian(rng, 1, config.dim, 0.1);
  std::vector<TrainSample> batch;
  for (int i = 0; i < 4; ++i) {
    batch.push_back({gaussian(rng, 1, config.dim, 0.5), gaussian(rng, 1, config.dim, 0.5),
                     gaussian(rng, 1, config.dim, 0.5), i % 2});
  }

  GradTape tape;
  FractionalMatrixCache cache(plan);
  const ModelVars vars = ModelVars::Leaves(tape, params);
  tape.backward(joint_loss(tape, cache, vars, batch, config).total);

  JointGradientReport report;
  report.scalars = params.scalar_count();
  auto tensors = params.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const RealMatrix g = tape.grad(vars.all[k]);
    RealMatrix& t = *tensors[k].second;
    for (Index i = 0; i < t.size(); ++i) {
      const double x0 = t.data()[i];
      t.data()[i] = x0 + h;
      const double up = joint_value(params, plan, batch, config);
      t.data()[i] = x0 - h;
      const double down = joint_value(params, plan, batch, config);
      t.data()[i] = x0;
      const double fd = (up - down) / (2 * h);
      const double gi = g.data()[i];
      const double rel = std::abs(gi - fd) / std::max({std::abs(gi), std::abs(fd), 1e-7});
      if (rel > report.max_rel_error || report.checked == 0) {
        report.max_rel_error = rel;
        report.worst = tensors[k].first + "[" + std::to_string(i) + "]";
      }
      ++report.checked;
    }
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<CheckRow> check_gradients() {
  const JointGradientReport r = joint_gradient_check();
  std::vector<CheckRow> rows;
  rows.push_back(row("gradients", "joint loss, " + std::to_string(r.checked) + " scalars (worst " +
                                      r.worst + ")",
                     r.max_rel_error, 1e-4));
  rows.push_back(row("gradients", "every scalar checked",
                     static_cast<double>(r.scalars - r.checked), 0.5));
  return rows;
}

std::vector<CheckRow> check_nod() {
  std::vector<CheckRow> rows;
  std::mt19937_64 rng(3);
  ComplexMatrix node(gaussian(rng, 1, 6, 1.0), gaussian(rng, 1, 6, 1.0));
  const double norm = frob(node);
  node.re /= norm;
  node.im /= norm;
  for (std::size_t n : {2u, 4u}) {
    ExpansionTree tree;
    tree.layers.push_back({node});
    tree.layers.push_back(std::vector<ComplexMatrix>(n, node));
    rows.push_back(row("nod", std::to_string(n) + " identical nodes give sqrt(n(n-1))",
                       std::abs(nod_loss(tree) - std::sqrt(n * (n - 1.0))), 1e-9));
  }
  // Permutations send e0 to orthogonal basis vectors in every layer.
  const Index d = 4;
  TreeWeights w = TreeWeights::Identity(d, 3);
  auto swap = [d](Index a, Index b) {
    RealMatrix m = RealMatrix::Identity(d, d);
    m.row(a).swap(m.row(b));
    return m;
  };
  w.at(1, 0, 1) = swap(0, 1);
  w.at(2, 0, 1) = swap(0, 2);
  w.at(2, 1, 1) = swap(1, 3);
  RealMatrix e0 = RealMatrix::Zero(1, d);
  e0(0, 0) = 1;
  const ExpansionTree tree = expand_tree(ComplexMatrix::FromReal(e0), w);
  rows.push_back(row("nod", "orthogonal layers give 0", std::abs(nod_loss(tree)), 1e-9));
  return rows;
}

std::vector<CheckRow> check_tree() {
  std::vector<CheckRow> rows;
  std::mt19937_64 rng(5);
  const Index d = 4;
  const ComplexMatrix root(gaussian(rng, 1, d, 1.0), gaussian(rng, 1, d, 1.0));
  for (Generator g : {Generator::kDtg, Generator::kInterp, Generator::kSeries,
                      Generator::kParallel}) {
    double worst = 0;
    for (Index r = 1; r <= 5; ++r) {
      const TreeWeights w = TreeWeights::Random(d, r, 0.1, rng);
      const double expected = std::pow(2.0, static_cast<double>(r)) - 1;
      worst = std::max(worst,
                       std::abs(static_cast<double>(expand_tree(root, w, g).node_count()) - expected));
    }
    rows.push_back(row("tree", std::string(to_string(g)) + " has 2^R - 1 nodes for R = 1..5",
                       worst, 0.5));
  }
  const TreeWeights w3 = TreeWeights::Identity(d, 3);
  rows.push_back(row("tree", "R = 3 gives 7 nodes",
                     std::abs(static_cast<double>(expand_tree(root, w3).node_count()) - 7.0), 0.5));
  return rows;
}

}  // namespace omnivat
