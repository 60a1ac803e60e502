#pragma once

#include "pagemix/common.hpp"
#include "pagemix/degree_model.hpp"
#include "pagemix/graph_gen.hpp"
#include "pagemix/rng.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pagemix {

/// Simple-random-walk kernel P(x,y) = m(x,y)/d+_x with multi-edges merged.
/// Rows of vertices without out-edges are identity rows.
///
/// Both P and its transpose are kept row-major: P for point queries, P^T for
/// the row-parallel product nu -> nu P, where every output entry has one
/// writer and a fixed summation order.
class TransitionKernel {
 public:
  using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  TransitionKernel() = default;
  explicit TransitionKernel(const Digraph& g);
  /// From an explicit row-stochastic matrix (tests, small hand kernels).
  explicit TransitionKernel(Sparse p);

  Index n() const { return p_.rows(); }
  double probability(Vertex x, Vertex y) const { return p_.coeff(x, y); }
  const Sparse& matrix() const { return p_; }
  Index sink_rows() const { return sinks_; }

  /// out = in * P (row-vector convention). `out` must not alias `in`.
  void apply(const Eigen::VectorXd& in, Eigen::VectorXd& out) const;

  /// out = (1 - alpha) in * P + alpha * mass(in) * lambda.
  void apply(const Eigen::VectorXd& in, Eigen::VectorXd& out, double alpha, const Eigen::VectorXd& lambda) const;

 private:
  void finish();

  Sparse p_;
  Sparse pt_;
  Index sinks_ = 0;
};

TransitionKernel srw_kernel(const Digraph& g);

/// alpha in [0,1]; alpha = 1 is the degenerate always-teleport walk.
struct WalkParams {
  double alpha = 0.0;
  ProbVector lambda;
  std::string label = "custom";

  WalkParams() = default;
  WalkParams(double a, ProbVector l, std::string name = "custom");
};

/// mu P^t, or mu P_{alpha,lambda}^t with the teleport applied as a rank-one
/// update each step.
ProbVector evolve(const ProbVector& mu, const TransitionKernel& k, int t);
ProbVector evolve(const ProbVector& mu, const TransitionKernel& k, int t, const WalkParams& params);

/// Lazy power iteration nu <- (nu + nu P)/2 from the uniform vector until
/// ||nu P - nu|| <= tol. Throws NoConvergence after max_sweeps.
ProbVector stationary_srw(const TransitionKernel& k, double tol = 1e-12, int max_sweeps = 100000);

struct PageRankStationary {
  ProbVector distribution;
  int truncation = 0;       ///< K, the last power kept
  double error_bound = 0.0; ///< (1 - alpha)^(K+1)
};

/// alpha * sum_{k<=K} (1-alpha)^k lambda P^k, renormalized, with
/// K = ceil(log(tol) / log(1 - alpha)). Throws AlphaZero.
PageRankStationary stationary_pagerank(const TransitionKernel& k, const WalkParams& params, double tol = 1e-12);

/// Same series cut at an explicit K.
ProbVector pagerank_series(const TransitionKernel& k, const WalkParams& params, int K);

template <typename A, typename B>
double tv(const Eigen::MatrixBase<A>& mu, const Eigen::MatrixBase<B>& nu) {
  if (mu.size() != nu.size()) throw Error(ErrorCode::LengthMismatch, "tv of vectors of different length");
  return 0.5 * compensated_sum((mu - nu).cwiseAbs());
}

inline double tv(const ProbVector& mu, const ProbVector& nu) { return tv(mu.values(), nu.values()); }

struct ProfileContext {
  std::string start = "max";
  double alpha = 0.0;
  std::string lambda_label = "none";
  double t_ent = 0.0;
  Index n = 0;
  std::uint64_t seed = 0;
};

struct DistanceProfile {
  std::vector<int> times;
  std::vector<double> values;
  ProfileContext context;
};

/// Exact D(t) = max over starts of ||delta_x P^t - target|| at each listed
/// time (times ascending), by dense evolution. With params the walk is the
/// PageRank walk. Every value is checked against (1 - alpha)^t and a
/// BoundViolation is thrown if it exceeds it.
DistanceProfile distance_profile(const TransitionKernel& k, const ProbVector& target,
                                 const std::optional<WalkParams>& params, std::span<const Vertex> starts,
                                 std::span<const int> times);

/// Convenience form: builds the kernel and the stationary target from g.
DistanceProfile distance_profile(const Digraph& g, const std::optional<WalkParams>& params,
                                 std::span<const Vertex> starts, std::span<const int> times);

/// Least listed t with D(t) <= eps. Throws HorizonTooShort.
int mixing_time(const DistanceProfile& profile, double epsilon);

/// ceil(log(1/eps) / -log(1 - alpha)).
int mixing_time_bound(double alpha, double epsilon);

/// Residuals |D^x(t) - (1-alpha)^t ||delta_x P^t - pi P^t||| for t = 0..t_max,
/// both sides evolved independently.
std::vector<double> teleport_identity_residuals(const TransitionKernel& k, const WalkParams& params,
                                                const ProbVector& pi, Vertex x, int t_max);

double verify_teleport_identity(const Digraph& g, const WalkParams& params, Vertex x, int t);

/// CSV with columns t,value,alpha,lambda_label,start,n,seed,T_ent.
void write_profile_csv(std::ostream& out, const DistanceProfile& profile, bool header = true);

/// Trajectory sampling on a realized graph.
class WalkSampler {
 public:
  struct Step {
    Vertex vertex = 0;
    std::int64_t tail = -1;  ///< global edge index used, -1 for a teleport or a sink
  };

  WalkSampler(const Digraph& g, double alpha = 0.0, std::optional<ProbVector> lambda = std::nullopt);

  /// First time the teleport coin comes up: P(tau > t) = (1 - alpha)^t.
  std::int64_t first_teleport_time(Rng& rng) const;

  /// Path (X_0, ..., X_t) of the PageRank walk (simple walk when alpha = 0).
  std::vector<Step> path(Vertex x, int t, Rng& rng) const;

 private:
  const Digraph* g_;
  double alpha_;
  std::vector<double> cdf_;
};

}  // namespace pagemix
