#pragma once

#include "pagemix/degree_model.hpp"
#include "pagemix/graph_gen.hpp"
#include "pagemix/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <vector>

namespace testing {

using namespace pagemix;

inline Digraph complete3() { return Digraph::from_adjacency({{1, 2}, {0, 2}, {0, 1}}); }

/// Out-degrees uniform in [lo, hi]; for DCM the in-degrees are a shuffled
/// copy, so the sums agree but d- differs from d+ pointwise.
inline DegreeSequence random_sequence(Index n, int lo, int hi, Model model, Rng& rng) {
  std::vector<int> out(static_cast<std::size_t>(n));
  for (auto& d : out) d = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
  if (model == Model::OCM) return DegreeSequence::build(out, std::nullopt, model);
  std::vector<int> in = out;
  for (std::size_t i = in.size(); i > 1; --i) std::swap(in[i - 1], in[rng.below(i)]);
  return DegreeSequence::build(out, in, model);
}

/// Dense P from the adjacency lists, independent of TransitionKernel.
inline Eigen::MatrixXd dense_kernel(const Digraph& g) {
  const Index n = g.n();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (Vertex x = 0; x < static_cast<Vertex>(n); ++x) {
    const auto out = g.out_neighbors(x);
    if (out.empty()) {
      p(x, x) = 1.0;
      continue;
    }
    for (const Vertex y : out) p(x, y) += 1.0 / static_cast<double>(out.size());
  }
  return p;
}

/// Solves (I - (1-alpha) P^T) pi = alpha lambda.
inline Eigen::VectorXd dense_pagerank(const Eigen::MatrixXd& p, double alpha, const Eigen::VectorXd& lambda) {
  const Index n = p.rows();
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - (1.0 - alpha) * p.transpose();
  return a.partialPivLu().solve(alpha * lambda);
}

inline Eigen::VectorXd random_distribution(Index n, Rng& rng) {
  Eigen::VectorXd w(n);
  for (Index i = 0; i < n; ++i) w(i) = rng.uniform() + 1e-3;
  return w / w.sum();
}

}  // namespace testing
