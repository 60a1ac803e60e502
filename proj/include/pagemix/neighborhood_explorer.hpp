#pragma once

#include "pagemix/common.hpp"
#include "pagemix/degree_model.hpp"
#include "pagemix/graph_gen.hpp"
#include "pagemix/walk_engine.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace pagemix {

/// H and T_ent read off a realized graph: mu_in is in-degree/m for DCM
/// provenance and uniform for OCM.
EntropicTime entropic_time(const Digraph& g);
ProbVector mu_in(const Digraph& g);

/// Weight-thresholded out-tree of a root z.
///
/// Tails are revealed one at a time, always the eligible tail of maximal weight
/// (height <= t_max, weight >= w_min). Ties go to the lower endpoint vertex id,
/// then the lower global tail index. A revealed head whose vertex is already
/// in the tree counts towards kappa but adds no node.
struct ExplorationTree {
  struct Node {
    Vertex mark = 0;
    std::int32_t parent = -1;   ///< node index, -1 for the root
    int height = 0;
    std::int64_t tail = -1;     ///< edge of G that created the node
    std::int64_t den = 1;       ///< product of d+ along the root path
    double weight() const { return 1.0 / static_cast<double>(den); }
  };

  Vertex root = 0;
  std::vector<Node> nodes;
  std::int64_t kappa = 0;       ///< revealed tails
  std::int64_t duplicates = 0;  ///< revealed tails landing on a vertex already in the tree
  double eta = 0.1;
  int t_max = 0;
  double w_min = 0.0;           ///< n^(-1 + eta^2)
  Index n = 0;

  double kappa_bound() const { return std::pow(static_cast<double>(n), 1.0 - eta * eta / 2.0); }
};

/// Requires eta in (0, 1/2) and t >= 0.
ExplorationTree explore_out_tree(const Digraph& g, Vertex z, int t, double eta = 0.1);

/// Distinct vertices at height exactly t in the tree, ascending.
std::vector<Vertex> annulus(const ExplorationTree& tree, int t);

/// Probability that the simple walk from the root follows tree edges for t
/// steps: the surviving mass at height t.
double walk_in_tree_probability(const Digraph& g, const ExplorationTree& tree, int t);

/// "node_id parent_id mark height weight", one node per line.
void write_tree(std::ostream& out, const ExplorationTree& tree);

struct DecompositionResult {
  double a = 0.0;          ///< A = 1 - (1-alpha)^(cut+1)
  ProbVector mu_lambda;
  double eta = 0.0;
  int t = 0;
  int cut = 0;             ///< floor((1-eta) T_ent) - t
  double residual = 0.0;   ///< ||pi P^t - A mu_lambda - (1-A) pi0||
};

/// mu_lambda = (1/A) sum_{k<=cut} alpha (1-alpha)^k lambda P^(k+t). Throws
/// EtaTooLarge when t > floor((1 - 2 eta) T_ent).
DecompositionResult mu_lambda_decomposition(const TransitionKernel& k, const WalkParams& params, int t, double eta,
                                            double t_ent, const ProbVector& pi, const ProbVector& pi0);

struct IntersectionReport {
  int max_count = 0;            ///< max over full-length paths of |A_x(t) cap V(p)|
  std::int64_t paths = 0;       ///< number of paths of length exactly u
  std::size_t annulus_size = 0;
  double k_bound = 0.0;         ///< (9 + 3 log2 Delta) / eta^2
};

/// One pass over T_z(u) in creation order, counting visits to A_x(t) along each root
/// path of length u. Requires t <= u <= floor((1-eta) T_ent).
IntersectionReport path_annulus_intersections(const Digraph& g, Vertex x, Vertex z, int t, int u, double eta);

/// Vertices z whose out-ball of depth ceil(log_Delta(n)/10) is a directed tree:
/// every out-edge explored from depth < radius reaches a vertex not seen before.
std::vector<Vertex> tree_like_vertices(const Digraph& g, int delta);

/// Radius used by tree_like_vertices.
int tree_like_radius(Index n, int delta);

struct SingularityRow {
  Vertex x = 0;
  std::string lambda_label;
  int t = 0;
  double tv_value = 0.0;
};

struct SingularityReport {
  std::vector<SingularityRow> rows;
  double min_value = 1.0;
};

/// ||P^t(x,.) - pi_{alpha,lambda} P^t|| for every start and resampling law.
SingularityReport singularity_diagnostic(const TransitionKernel& k, double alpha, int t,
                                         std::span<const WalkParams> lambdas, std::span<const Vertex> starts,
                                         double tol = 1e-10);

/// Default resampling set: dirac at each of `diracs`, uniform and mu_in.
std::vector<WalkParams> default_lambda_set(const Digraph& g, double alpha, std::span<const Vertex> diracs);

/// CSV with columns x,lambda_label,t,tv_value.
void write_singularity_csv(std::ostream& out, const SingularityReport& report, bool header = true);

}  // namespace pagemix
