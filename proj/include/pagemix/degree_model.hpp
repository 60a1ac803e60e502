#pragma once

#include "pagemix/common.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pagemix {

/// Dense probability vector over the vertex set [0, n).
///
/// Construction validates non-negativity and |sum - 1| <= tolerance, with the
/// sum taken in compensated arithmetic so the check is meaningful at n ~ 1e7.
class ProbVector {
 public:
  static constexpr double kDefaultTolerance = 1e-12;

  ProbVector() = default;
  explicit ProbVector(Eigen::VectorXd weights, double tolerance = kDefaultTolerance);

  static ProbVector uniform(Index n);
  static ProbVector dirac(Index n, Vertex z);
  /// Uniform over the given support (duplicates are ignored).
  static ProbVector uniform_on(Index n, std::span<const Vertex> support);
  /// Divides by the (compensated) sum; throws NotNormalized if it is not positive.
  static ProbVector normalized(Eigen::VectorXd weights, double tolerance = kDefaultTolerance);

  Index size() const { return weights_.size(); }
  double operator()(Index i) const { return weights_(i); }
  double operator[](Index i) const { return weights_(i); }
  const Eigen::VectorXd& values() const { return weights_; }
  double tolerance() const { return tolerance_; }

 private:
  Eigen::VectorXd weights_;
  double tolerance_ = kDefaultTolerance;
};

/// Validated in/out degree data with the derived constants m, Delta and <d>.
class DegreeSequence {
 public:
  /// Throws EmptySequence, LengthMismatch, MissingInDegrees (DCM without
  /// in-degrees), UnexpectedInDegrees (OCM with in-degrees), SumMismatch or
  /// MinDegree.
  static DegreeSequence build(std::vector<int> out_degrees, std::optional<std::vector<int>> in_degrees,
                              Model model);

  /// d+ = d- = d for every vertex (DCM) or d+ = d (OCM).
  static DegreeSequence regular(Index n, int d, Model model);

  Index n() const { return static_cast<Index>(out_.size()); }
  std::int64_t m() const { return m_; }
  int delta() const { return delta_; }
  double mean_degree() const { return static_cast<double>(m_) / static_cast<double>(n()); }
  Model model() const { return model_; }

  int out_degree(Vertex x) const { return out_[static_cast<std::size_t>(x)]; }
  /// Throws MissingInDegrees for OCM sequences.
  int in_degree(Vertex x) const;
  bool has_in_degrees() const { return in_.has_value(); }

  std::span<const int> out_degrees() const { return out_; }
  std::span<const int> in_degrees() const;

  /// Stable content hash (model, n, degrees) for provenance records.
  std::uint64_t hash() const;

 private:
  DegreeSequence() = default;

  std::vector<int> out_;
  std::optional<std::vector<int>> in_;
  Model model_ = Model::DCM;
  std::int64_t m_ = 0;
  int delta_ = 0;
};

/// Content hash shared by DegreeSequence::hash and graph provenance; pass an
/// empty in-degree span for OCM.
std::uint64_t sequence_hash(Model model, std::span<const int> out, std::span<const int> in);

/// Text format: a header line "model=DCM|OCM", then one line per vertex
/// "out_degree[,in_degree]". Blank lines and lines starting with '#' are skipped.
DegreeSequence read_degree_sequence(std::istream& in);
void write_degree_sequence(std::ostream& out, const DegreeSequence& seq);

/// In-degree distribution: d-_x / m for DCM, 1/n for OCM. The model argument
/// selects the formula; a DCM sequence may be evaluated under the OCM rule.
ProbVector mu_in(const DegreeSequence& seq);
ProbVector mu_in(const DegreeSequence& seq, Model model);

struct EntropicTime {
  double entropy = 0.0;  ///< H = sum_x mu_in(x) log d+_x
  double t_ent = 0.0;    ///< log n / H
};

EntropicTime entropic_time(const DegreeSequence& seq);

struct WidespreadReport {
  double max_mass = 0.0;
  double max_bound = 0.0;
  double ell2_statistic = 0.0;
  bool pass_i = false;
  bool pass_ii = false;
};

/// Finite-n reading of the widespread conditions:
///   (i)  max_x lambda(x) <= c1 * n^(-1/2 - delta)
///   (ii) (1/n) sum_j (1 - n lambda(j))^2 <= c2
WidespreadReport widespread_report(const ProbVector& lambda, double delta = 0.1, double c1 = 1.0, double c2 = 4.0);

inline constexpr double kInfiniteGamma = std::numeric_limits<double>::infinity();

/// Step function theta(s): 1 for s < 1, 0 for s > 1.
double theta(double s);

/// Limit of the rescaled distance profile for gamma = lim alpha * T_ent:
///   gamma = 0        -> theta(s)             (s in units of T_ent)
///   0 < gamma < inf  -> e^{-s} theta(s/gamma) (s in units of 1/alpha)
///   gamma = inf      -> e^{-s}
/// Throws DiscontinuityPoint at the jump (s = 1, resp. s = gamma).
double limit_profile(double gamma, double s);

enum class TimeUnit { EntropicTime, InverseAlpha };

struct LimitMixingTime {
  double value = 0.0;
  TimeUnit unit = TimeUnit::EntropicTime;
};

LimitMixingTime limit_mixing_time(double gamma, double epsilon);

struct BranchingConstants {
  double rho = 0.0;
  double c = 0.0;
};

/// rho = sum_j mu_in(j) / d+_j and the variance constant C of the limiting
/// martingale; the model argument picks the model-1 or model-2 formula.
BranchingConstants rho_and_C(const DegreeSequence& seq);
BranchingConstants rho_and_C(const DegreeSequence& seq, Model model);

/// gamma(lambda) = (n/2) sum_j (lambda(j) - mu_in(j))^2.
double gamma_lambda(const ProbVector& lambda, const DegreeSequence& seq);
double gamma_lambda(const ProbVector& lambda, const DegreeSequence& seq, Model model);

}  // namespace pagemix
