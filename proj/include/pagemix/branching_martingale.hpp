#pragma once

#include "pagemix/common.hpp"
#include "pagemix/degree_model.hpp"
#include "pagemix/graph_gen.hpp"
#include "pagemix/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pagemix {

/// How model-2 offspring sets are drawn.
///   PerMark: one Bernoulli(d+_j / n) per mark j, O(n) per node.
///   Thinned: per out-degree class, a Binomial count followed by a uniform
///            subset of that size. Same law (independent equal-p Bernoullis
///            are exchangeable within a class), O(offspring) per node.
enum class OffspringSampling { PerMark, Thinned };

struct GWNode {
  Vertex mark = 0;
  std::int32_t parent = -1;  ///< index into the previous generation
  double den = 1.0;          ///< prod of d+ over the path below the root (exact below 2^53)

  double weight() const { return 1.0 / den; }
};

/// Marked Galton-Watson in-tree, stored generation by generation.
struct MarkedGWTree {
  Model model = Model::DCM;
  Vertex root = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<GWNode>> levels;

  int depth() const { return static_cast<int>(levels.size()) - 1; }
};

/// Offspring rule of either model.
///   model 1 (DCM): a node with mark j has d-_j children, marks iid with
///                  probability d+_k / m (a uniform tail's owner).
///   model 2 (OCM): child with mark j present independently w.p. d+_j / n.
class GWSampler {
 public:
  GWSampler(const DegreeSequence& seq, Model model, OffspringSampling sampling = OffspringSampling::PerMark);

  Model model() const { return model_; }
  Index n() const { return static_cast<Index>(out_.size()); }
  int out_degree(Vertex j) const { return out_[static_cast<std::size_t>(j)]; }
  int in_degree(Vertex j) const { return in_[static_cast<std::size_t>(j)]; }

  /// Appends the children marks of a node with mark `mark` (ascending for model 2).
  void children(Vertex mark, Rng& rng, std::vector<Vertex>& out) const;

 private:
  Model model_;
  OffspringSampling sampling_;
  std::vector<int> out_;
  std::vector<int> in_;
  std::vector<Vertex> tail_owner_;
  struct DegreeClass {
    int degree = 0;
    std::vector<Vertex> members;
    std::vector<double> count_cdf;  ///< CDF of Binomial(|members|, degree / n)
  };
  std::vector<DegreeClass> classes_;
};

/// root = nullopt draws the root mark uniformly from [n].
MarkedGWTree sample_gw_tree(const DegreeSequence& seq, Model model, std::optional<Vertex> root, int depth,
                            std::uint64_t seed, OffspringSampling sampling = OffspringSampling::PerMark);
MarkedGWTree sample_gw_tree(const GWSampler& sampler, std::optional<Vertex> root, int depth, std::uint64_t seed);

/// X_t(phi) = sum over generation t of phi(mark) * w. Terms are summed per
/// weight class and divided once, so equal-weight generations are exact.
double weight_functional(const MarkedGWTree& tree, const Eigen::VectorXd& phi, int t);

/// n mu_in as (n d-_x) / m for model 1 and 1 for model 2, without the rounding of n * (d-_x / m).
Eigen::VectorXd scaled_mu_in(const DegreeSequence& seq, Model model);

/// M_t = n X_t(mu_in) for t = 0..t_max.
std::vector<double> martingale_path(const MarkedGWTree& tree, const DegreeSequence& seq, int t_max);

/// Delta_t = M_{t+1} - M_t for t = 0..t_max-1, evaluated generation by
/// generation as sum_x n mu_in(x) w(x) psi(x). For model 1 each child term
/// carries the integer factor d-_y - d+_y, so Delta vanishes identically when
/// d- = d+ pointwise.
std::vector<double> martingale_increments(const MarkedGWTree& tree, const DegreeSequence& seq, int t_max);

struct MonteCarloRow {
  std::string quantity;
  int t = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  double target = 0.0;
  double z_score = 0.0;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  bool pass = false;
};

/// Exact E[(M_t - n X_t(lambda))^2] under a uniform root. With
/// phi = n (mu_in - lambda) it is (1/n) sum phi^2 at t = 0 and C(lambda) rho^(t-1)
/// for t >= 1, where C(lambda) = (1/n) sum phi^2 / d+ (model 1), resp.
/// (1/n) sum phi^2 / d+ (1 - d+/n) (model 2).
double lambda_second_moment(const DegreeSequence& seq, Model model, const ProbVector& lambda, int t);

/// All per-t rows from one batch of trees of depth max(t)+1:
///   M_mean      E[M_t] vs 1                                   |z| <= 3
///   Delta_mean  E[Delta_t] vs 0                               |z| <= 3
///   Delta_sq    E[Delta_t^2] vs C(1-rho)rho^t                  |z| <= 3
/// and, when lambda is given,
///   lambda_l2        E[(M_t - n X_t(lambda))^2] <= gamma(lambda) rho^t + 3 SE
///   lambda_l2_exact  the same moment vs lambda_second_moment   |z| <= 3
std::vector<MonteCarloRow> martingale_rows(const DegreeSequence& seq, Model model, const std::vector<int>& times,
                                           const std::optional<ProbVector>& lambda, std::int64_t samples,
                                           std::uint64_t seed, OffspringSampling sampling = OffspringSampling::PerMark);

MonteCarloRow variance_law_check(const DegreeSequence& seq, Model model, int t, std::int64_t samples,
                                 std::uint64_t seed, OffspringSampling sampling = OffspringSampling::PerMark);

MonteCarloRow lambda_l2_check(const DegreeSequence& seq, Model model, const ProbVector& lambda, int t,
                              std::int64_t samples, std::uint64_t seed,
                              OffspringSampling sampling = OffspringSampling::PerMark);

struct MInfinityMoments {
  double mean = 0.0;
  double mean_se = 0.0;
  double variance = 0.0;
  double variance_se = 0.0;
  double target_variance = 0.0;  ///< Var(M_0) + C
  std::int64_t samples = 0;
};

/// Moments of M_{deep_t} as a stand-in for M_infinity; requires rho^deep_t <= 1e-6.
MInfinityMoments m_infinity_moments(const DegreeSequence& seq, Model model, int deep_t, std::int64_t samples,
                                    std::uint64_t seed, OffspringSampling sampling = OffspringSampling::PerMark);

/// Var(M_0) = (n/m^2) sum d-^2 - 1 for model 1, 0 for model 2.
double initial_variance(const DegreeSequence& seq, Model model);

/// CSV with columns quantity,t,estimate,std_error,target,z_score,samples,seed.
void write_monte_carlo_csv(std::ostream& out, const std::vector<MonteCarloRow>& rows, bool header = true);

/// Reverse breadth-first search to depth t. layers[k] holds the vertices at
/// in-distance exactly k; edges lists every in-edge (source, target) explored
/// from a vertex of depth < t, with multiplicity. is_tree holds iff every
/// explored edge reached a vertex not seen before.
struct InNeighborhood {
  Vertex center = 0;
  std::vector<std::vector<Vertex>> layers;
  std::vector<std::pair<Vertex, Vertex>> edges;
  bool is_tree = true;
  std::size_t size = 0;
};

InNeighborhood explore_in_neighborhood(const Digraph& g, Vertex v, int t);

struct CouplingReport {
  std::int64_t trials = 0;
  std::int64_t failures = 0;  ///< non-tree in-neighbourhoods
  double fraction = 0.0;
  double bound = 0.0;
  double ci_upper = 0.0;       ///< bound + 3 sqrt(bound (1 - bound) / trials)
  bool pass = false;
};

/// Coupling-failure bound: Delta^(2t+3)/m for DCM, Delta^(3t) (log n)^4 / n for OCM.
double coupling_bound(const DegreeSequence& seq, Model model, int t);

/// Samples graphs on substreams of `seed` and explores the in-neighbourhoods of
/// `vertices_per_graph` uniformly drawn vertices in each. Throws BoundVacuous
/// when the bound is >= 1.
CouplingReport coupling_agreement(const DegreeSequence& seq, int t, int graph_samples, int vertices_per_graph,
                                  std::uint64_t seed);

}  // namespace pagemix
