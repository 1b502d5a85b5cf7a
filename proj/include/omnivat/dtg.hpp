#pragma once

#include "omnivat/numeric/tape.hpp"
#include "omnivat/numeric/types.hpp"

#include <cstddef>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace omnivat {

/// How the 2^R - 2 non-root nodes are produced from the root.
enum class Generator {
  kDtg,       // binary tree: child n of parent m is W[r][m][n] * parent
  kInterp,    // node k = (1 - a_k) root + a_k W_k root, a_k = k / count
  kSeries,    // node k = W_k node_{k-1}, node_0 = root
  kParallel,  // node k = W_k root
};

const char* to_string(Generator g);
/// Throws ConfigError on an unknown name.
Generator parse_generator(std::string_view name);

/// D x D tree matrices stored layer by layer: for r = 1..R-1, parents
/// m = 0..2^(r-1)-1, children n in {0, 1}.
struct TreeWeights {
  Index depth = 1;
  std::vector<RealMatrix> matrices;

  static TreeWeights Identity(Index dim, Index depth);
  /// Identity plus N(0, noise^2) entries.
  static TreeWeights Random(Index dim, Index depth, double noise, std::mt19937_64& rng);

  static std::size_t count_for(Index depth);
  /// Flat position of W[r][m][n]; r is 1-based, m and n 0-based.
  static std::size_t flat_index(Index r, Index m, Index n);

  const RealMatrix& at(Index r, Index m, Index n) const { return matrices[flat_index(r, m, n)]; }
  RealMatrix& at(Index r, Index m, Index n) { return matrices[flat_index(r, m, n)]; }
};

/// layers[r - 1] holds the 2^(r-1) nodes of layer r, each a 1 x D row.
struct ExpansionTree {
  std::vector<std::vector<ComplexMatrix>> layers;

  Index depth() const { return static_cast<Index>(layers.size()); }
  std::size_t node_count() const;
};

using TreeLayers = std::vector<std::vector<ComplexVar>>;

TreeLayers expand_tree(GradTape& tape, const ComplexVar& root, std::span<const Var> weights,
                       Index depth, Generator generator = Generator::kDtg);
/// Cosine Gram matrix of the layer's flattened [Re | Im] nodes.
Var gram(GradTape& tape, std::span<const ComplexVar> layer);
/// Sum over layers of ||A - I||_F. Single-node layers contribute nothing.
Var nod_loss(GradTape& tape, const TreeLayers& tree, double eps = 1e-8);
/// Mean of every node added to each modality feature.
std::pair<ComplexVar, ComplexVar> enhance(GradTape& tape, const TreeLayers& tree,
                                          const ComplexVar& vis, const ComplexVar& tac);

ExpansionTree expand_tree(const ComplexMatrix& root, const TreeWeights& weights,
                          Generator generator = Generator::kDtg);
RealMatrix gram(std::span<const ComplexMatrix> layer);
double nod_loss(const ExpansionTree& tree, double eps = 1e-8);
std::pair<ComplexMatrix, ComplexMatrix> enhance(const ExpansionTree& tree, const ComplexMatrix& vis,
                                                const ComplexMatrix& tac);

}  // namespace omnivat
