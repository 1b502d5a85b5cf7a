#include "omnivat/dtg.hpp"

#include "omnivat/errors.hpp"

#include <string>

namespace omnivat {

namespace {

ComplexVar linear(GradTape& tape, const ComplexVar& x, Var w) {
  Var wt = tape.transpose(w);
  return {tape.matmul(x.re, wt), tape.matmul(x.im, wt)};
}

ComplexVar blend(GradTape& tape, const ComplexVar& a, const ComplexVar& b, double t) {
  return {tape.add(tape.scale(a.re, 1.0 - t), tape.scale(b.re, t)),
          tape.add(tape.scale(a.im, 1.0 - t), tape.scale(b.im, t))};
}

// Splits a flat node list into layers of 2, 4, 8, ... under the root.
TreeLayers into_layers(const ComplexVar& root, const std::vector<ComplexVar>& nodes) {
  TreeLayers layers{{root}};
  std::size_t at = 0, width = 2;
  while (at < nodes.size()) {
    layers.emplace_back(nodes.begin() + at, nodes.begin() + at + width);
    at += width;
    width *= 2;
  }
  return layers;
}

ComplexMatrix values(const ComplexVar& v) { return {v.re.value(), v.im.value()}; }

}  // namespace

const char* to_string(Generator g) {
  switch (g) {
    case Generator::kDtg:
      return "dtg";
    case Generator::kInterp:
      return "interp";
    case Generator::kSeries:
      return "series";
    case Generator::kParallel:
      return "parallel";
  }
  return "?";
}

Generator parse_generator(std::string_view name) {
  for (Generator g : {Generator::kDtg, Generator::kInterp, Generator::kSeries,
                      Generator::kParallel}) {
    if (name == to_string(g)) return g;
  }
  throw ConfigError("unknown generator '" + std::string(name) +
                    "' (expected dtg, interp, series or parallel)");
}

std::size_t TreeWeights::count_for(Index depth) {
  if (depth < 1) throw DimensionError("tree depth must be at least 1");
  return 2 * ((std::size_t{1} << (depth - 1)) - 1);
}

std::size_t TreeWeights::flat_index(Index r, Index m, Index n) {
  return count_for(r) + 2 * static_cast<std::size_t>(m) + static_cast<std::size_t>(n);
}

TreeWeights TreeWeights::Identity(Index dim, Index depth) {
  TreeWeights w;
  w.depth = depth;
  w.matrices.assign(count_for(depth), RealMatrix::Identity(dim, dim));
  return w;
}

TreeWeights TreeWeights::Random(Index dim, Index depth, double noise, std::mt19937_64& rng) {
  TreeWeights w = Identity(dim, depth);
  std::normal_distribution<double> normal(0.0, noise);
  for (RealMatrix& m : w.matrices) {
    for (Index i = 0; i < m.size(); ++i) m.data()[i] += normal(rng);
  }
  return w;
}

std::size_t ExpansionTree::node_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.size();
  return n;
}

TreeLayers expand_tree(GradTape& tape, const ComplexVar& root, std::span<const Var> weights,
                       Index depth, Generator generator) {
  const std::size_t count = TreeWeights::count_for(depth);
  if (weights.size() != count) {
    throw DimensionError("expand_tree: depth " + std::to_string(depth) + " needs " +
                         std::to_string(count) + " matrices, got " +
                         std::to_string(weights.size()));
  }
  const Index dim = root.re.cols();
  if (root.re.rows() != 1) throw DimensionError("expand_tree: root must be a single row");
  for (const Var& w : weights) {
    if (w.rows() != dim || w.cols() != dim) {
      throw DimensionError("expand_tree: tree matrices must be D x D");
    }
  }

  if (generator == Generator::kDtg) {
    TreeLayers layers{{root}};
    for (Index r = 1; r < depth; ++r) {
      std::vector<ComplexVar> next;
      const auto& parents = layers.back();
      for (std::size_t m = 0; m < parents.size(); ++m) {
        for (Index n = 0; n < 2; ++n) {
          next.push_back(linear(tape, parents[m],
                                weights[TreeWeights::flat_index(r, static_cast<Index>(m), n)]));
        }
      }
      layers.push_back(std::move(next));
    }
    return layers;
  }

  std::vector<ComplexVar> nodes;
  for (std::size_t k = 0; k < count; ++k) {
    switch (generator) {
      case Generator::kInterp: {
        const double t = static_cast<double>(k + 1) / static_cast<double>(count);
        nodes.push_back(blend(tape, root, linear(tape, root, weights[k]), t));
        break;
      }
      case Generator::kSeries:
        nodes.push_back(linear(tape, k == 0 ? root : nodes.back(), weights[k]));
        break;
      default:
        nodes.push_back(linear(tape, root, weights[k]));
        break;
    }
  }
  return into_layers(root, nodes);
}

Var gram(GradTape& tape, std::span<const ComplexVar> layer) {
  if (layer.empty()) throw DimensionError("gram: empty layer");
  std::vector<Var> rows;
  for (const ComplexVar& node : layer) rows.push_back(tape.flatten(node));
  Var unit = tape.l2_normalize_rows(tape.concat_rows(rows));
  return tape.matmul(unit, tape.transpose(unit));
}

Var nod_loss(GradTape& tape, const TreeLayers& tree, double eps) {
  Var total = tape.constant(RealMatrix::Zero(1, 1));
  for (const auto& layer : tree) {
    if (layer.size() < 2) continue;
    const Index n = static_cast<Index>(layer.size());
    Var diff = tape.sub(gram(tape, layer), tape.constant(RealMatrix::Identity(n, n)));
    total = tape.add(total, tape.frobenius(diff, eps));
  }
  return total;
}

std::pair<ComplexVar, ComplexVar> enhance(GradTape& tape, const TreeLayers& tree,
                                          const ComplexVar& vis, const ComplexVar& tac) {
  std::vector<Var> re, im;
  for (const auto& layer : tree) {
    for (const ComplexVar& node : layer) {
      re.push_back(node.re);
      im.push_back(node.im);
    }
  }
  if (re.empty()) throw DimensionError("enhance: empty tree");
  if (re[0].cols() != vis.re.cols() || re[0].cols() != tac.re.cols()) {
    throw DimensionError("enhance: node and feature widths differ");
  }
  const ComplexVar mean{tape.mean_rows(tape.concat_rows(re)), tape.mean_rows(tape.concat_rows(im))};
  return {tape.add(vis, mean), tape.add(tac, mean)};
}

ExpansionTree expand_tree(const ComplexMatrix& root, const TreeWeights& weights,
                          Generator generator) {
  GradTape tape;
  std::vector<Var> w;
  for (const RealMatrix& m : weights.matrices) w.push_back(tape.constant(m));
  ExpansionTree tree;
  for (const auto& layer :
       expand_tree(tape, tape.complex_constant(root), w, weights.depth, generator)) {
    std::vector<ComplexMatrix> nodes;
    for (const ComplexVar& node : layer) nodes.push_back(values(node));
    tree.layers.push_back(std::move(nodes));
  }
  return tree;
}

RealMatrix gram(std::span<const ComplexMatrix> layer) {
  GradTape tape;
  std::vector<ComplexVar> nodes;
  for (const ComplexMatrix& m : layer) nodes.push_back(tape.complex_constant(m));
  return gram(tape, nodes).value();
}

double nod_loss(const ExpansionTree& tree, double eps) {
  GradTape tape;
  TreeLayers layers;
  for (const auto& layer : tree.layers) {
    std::vector<ComplexVar> nodes;
    for (const ComplexMatrix& m : layer) nodes.push_back(tape.complex_constant(m));
    layers.push_back(std::move(nodes));
  }
  return nod_loss(tape, layers, eps).scalar();
}

std::pair<ComplexMatrix, ComplexMatrix> enhance(const ExpansionTree& tree, const ComplexMatrix& vis,
                                                const ComplexMatrix& tac) {
  GradTape tape;
  TreeLayers layers;
  for (const auto& layer : tree.layers) {
    std::vector<ComplexVar> nodes;
    for (const ComplexMatrix& m : layer) nodes.push_back(tape.complex_constant(m));
    layers.push_back(std::move(nodes));
  }
  const auto [v, t] =
      enhance(tape, layers, tape.complex_constant(vis), tape.complex_constant(tac));
  return {values(v), values(t)};
}

}  // namespace omnivat
