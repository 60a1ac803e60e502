#include "pagemix/walk_engine.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <utility>

namespace pagemix {

namespace {

double mass_tolerance(Index n) { return std::max(ProbVector::kDefaultTolerance, static_cast<double>(n) * 1e-15); }

ProbVector as_distribution(Eigen::VectorXd v) {
  const double tol = mass_tolerance(v.size());
  return ProbVector(std::move(v), tol);
}

// Slack for floating-point error when comparing a profile to (1 - alpha)^t.
constexpr double kBoundSlack = 1e-10;

}  // namespace

TransitionKernel::TransitionKernel(const Digraph& g) {
  const Index n = g.n();
  std::vector<Eigen::Triplet<double, int>> entries;
  entries.reserve(static_cast<std::size_t>(g.m() + n));
  std::vector<Vertex> row;
  for (Vertex x = 0; x < static_cast<Vertex>(n); ++x) {
    const auto out = g.out_neighbors(x);
    if (out.empty()) {
      entries.emplace_back(x, x, 1.0);
      ++sinks_;
      continue;
    }
    row.assign(out.begin(), out.end());
    std::sort(row.begin(), row.end());
    const double d = static_cast<double>(row.size());
    for (std::size_t i = 0; i < row.size();) {
      std::size_t j = i;
      while (j < row.size() && row[j] == row[i]) ++j;
      entries.emplace_back(x, row[i], static_cast<double>(j - i) / d);
      i = j;
    }
  }
  p_.resize(n, n);
  p_.setFromTriplets(entries.begin(), entries.end());
  finish();
}

TransitionKernel::TransitionKernel(Sparse p) : p_(std::move(p)) {
  if (p_.rows() != p_.cols()) throw Error(ErrorCode::InvalidArgument, "kernel must be square");
  p_.makeCompressed();
  for (Index x = 0; x < p_.rows(); ++x) {
    double sum = 0.0;
    for (Sparse::InnerIterator it(p_, x); it; ++it) {
      if (it.value() < 0.0) throw Error(ErrorCode::NotNormalized, "negative transition probability");
      sum += it.value();
    }
    if (std::abs(sum - 1.0) > 1e-12) throw Error(ErrorCode::NotNormalized, "kernel row does not sum to 1");
  }
  finish();
}

void TransitionKernel::finish() {
  p_.makeCompressed();
  pt_ = p_.transpose();
  pt_.makeCompressed();
}

void TransitionKernel::apply(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
  out.resize(n());
  const int* outer = pt_.outerIndexPtr();
  const int* inner = pt_.innerIndexPtr();
  const double* value = pt_.valuePtr();
  const double* src = in.data();
  double* dst = out.data();
  parallel_for(n(), [&](Index begin, Index end) {
    for (Index y = begin; y < end; ++y) {
      double acc = 0.0;
      for (int e = outer[y]; e < outer[y + 1]; ++e) acc += value[e] * src[inner[e]];
      dst[y] = acc;
    }
  });
}

void TransitionKernel::apply(const Eigen::VectorXd& in, Eigen::VectorXd& out, double alpha,
                             const Eigen::VectorXd& lambda) const {
  const double teleport = alpha * compensated_sum(in);
  const double keep = 1.0 - alpha;
  out.resize(n());
  const int* outer = pt_.outerIndexPtr();
  const int* inner = pt_.innerIndexPtr();
  const double* value = pt_.valuePtr();
  const double* src = in.data();
  const double* lam = lambda.data();
  double* dst = out.data();
  parallel_for(n(), [&](Index begin, Index end) {
    for (Index y = begin; y < end; ++y) {
      double acc = 0.0;
      for (int e = outer[y]; e < outer[y + 1]; ++e) acc += value[e] * src[inner[e]];
      dst[y] = keep * acc + teleport * lam[y];
    }
  });
}

TransitionKernel srw_kernel(const Digraph& g) { return TransitionKernel(g); }

WalkParams::WalkParams(double a, ProbVector l, std::string name)
    : alpha(a), lambda(std::move(l)), label(std::move(name)) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0,1]");
}

ProbVector evolve(const ProbVector& mu, const TransitionKernel& k, int t) {
  if (mu.size() != k.n()) throw Error(ErrorCode::LengthMismatch, "distribution length differs from kernel");
  Eigen::VectorXd cur = mu.values();
  Eigen::VectorXd next(k.n());
  for (int s = 0; s < t; ++s) {
    k.apply(cur, next);
    cur.swap(next);
  }
  return as_distribution(std::move(cur));
}

ProbVector evolve(const ProbVector& mu, const TransitionKernel& k, int t, const WalkParams& params) {
  if (mu.size() != k.n() || params.lambda.size() != k.n()) {
    throw Error(ErrorCode::LengthMismatch, "distribution length differs from kernel");
  }
  Eigen::VectorXd cur = mu.values();
  Eigen::VectorXd next(k.n());
  for (int s = 0; s < t; ++s) {
    k.apply(cur, next, params.alpha, params.lambda.values());
    cur.swap(next);
  }
  return as_distribution(std::move(cur));
}

ProbVector stationary_srw(const TransitionKernel& k, double tol, int max_sweeps) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
  const Index n = k.n();
  Eigen::VectorXd nu = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd step(n);
  double residual = 1.0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    k.apply(nu, step);
    residual = tv(step, nu);
    if (residual <= tol) return as_distribution(std::move(nu));
    nu = 0.5 * (nu + step);
    nu /= compensated_sum(nu);
  }
  throw Error(ErrorCode::NoConvergence,
              "residual " + format_double(residual) + " after " + std::to_string(max_sweeps) + " sweeps");
}

ProbVector pagerank_series(const TransitionKernel& k, const WalkParams& params, int K) {
  if (params.alpha <= 0.0) throw Error(ErrorCode::AlphaZero, "the series needs alpha > 0");
  if (params.lambda.size() != k.n()) throw Error(ErrorCode::LengthMismatch, "lambda length differs from kernel");
  const double alpha = params.alpha;
  Eigen::VectorXd term = params.lambda.values();
  Eigen::VectorXd next(k.n());
  Eigen::VectorXd acc = alpha * term;
  double coeff = alpha;
  for (int j = 1; j <= K; ++j) {
    k.apply(term, next);
    term.swap(next);
    coeff *= 1.0 - alpha;
    acc += coeff * term;
  }
  acc /= compensated_sum(acc);
  return as_distribution(std::move(acc));
}

PageRankStationary stationary_pagerank(const TransitionKernel& k, const WalkParams& params, double tol) {
  if (params.alpha <= 0.0) throw Error(ErrorCode::AlphaZero, "use stationary_srw for alpha = 0");
  if (!(tol > 0.0 && tol < 1.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must lie in (0,1)");
  PageRankStationary result;
  result.truncation = std::max(0, static_cast<int>(std::ceil(std::log(tol) / std::log1p(-params.alpha))));
  result.error_bound = std::pow(1.0 - params.alpha, result.truncation + 1);
  result.distribution = pagerank_series(k, params, result.truncation);
  return result;
}

DistanceProfile distance_profile(const TransitionKernel& k, const ProbVector& target,
                                 const std::optional<WalkParams>& params, std::span<const Vertex> starts,
                                 std::span<const int> times) {
  if (target.size() != k.n()) throw Error(ErrorCode::LengthMismatch, "target length differs from kernel");
  if (starts.empty()) throw Error(ErrorCode::InvalidArgument, "no start vertices");
  if (!std::is_sorted(times.begin(), times.end()) || (!times.empty() && times.front() < 0)) {
    throw Error(ErrorCode::InvalidArgument, "times must be non-negative and ascending");
  }
  const double alpha = params ? params->alpha : 0.0;
  DistanceProfile profile;
  profile.times.assign(times.begin(), times.end());
  profile.values.assign(times.size(), 0.0);
  profile.context.n = k.n();
  profile.context.alpha = alpha;
  profile.context.lambda_label = params ? params->label : "none";
  profile.context.start = starts.size() == 1 ? std::to_string(starts.front()) : "max";

  Eigen::VectorXd cur(k.n());
  Eigen::VectorXd next(k.n());
  for (const Vertex x : starts) {
    cur.setZero();
    cur(x) = 1.0;
    int now = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      for (; now < times[i]; ++now) {
        if (params) {
          k.apply(cur, next, alpha, params->lambda.values());
        } else {
          k.apply(cur, next);
        }
        cur.swap(next);
      }
      const double d = tv(cur, target.values());
      const double bound = std::pow(1.0 - alpha, times[i]);
      if (d > bound + kBoundSlack) {
        throw Error(ErrorCode::BoundViolation, "D(" + std::to_string(times[i]) + ") = " + format_double(d) +
                                                   " exceeds (1-alpha)^t = " + format_double(bound));
      }
      profile.values[i] = std::max(profile.values[i], d);
    }
  }
  return profile;
}

DistanceProfile distance_profile(const Digraph& g, const std::optional<WalkParams>& params,
                                 std::span<const Vertex> starts, std::span<const int> times) {
  const TransitionKernel k(g);
  const ProbVector target =
      params && params->alpha > 0.0 ? stationary_pagerank(k, *params).distribution : stationary_srw(k);
  auto profile = distance_profile(k, target, params, starts, times);
  profile.context.seed = g.provenance().seed;
  return profile;
}

int mixing_time(const DistanceProfile& profile, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must lie in (0,1)");
  for (std::size_t i = 0; i < profile.times.size(); ++i) {
    if (profile.values[i] <= epsilon) return profile.times[i];
  }
  throw Error(ErrorCode::HorizonTooShort, "distance never drops to " + format_double(epsilon));
}

int mixing_time_bound(double alpha, double epsilon) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0,1)");
  return static_cast<int>(std::ceil(std::log(1.0 / epsilon) / -std::log1p(-alpha)));
}

std::vector<double> teleport_identity_residuals(const TransitionKernel& k, const WalkParams& params,
                                                const ProbVector& pi, Vertex x, int t_max) {
  const Index n = k.n();
  Eigen::VectorXd walk = Eigen::VectorXd::Zero(n);
  walk(x) = 1.0;
  Eigen::VectorXd plain = walk;
  Eigen::VectorXd pushed = pi.values();
  Eigen::VectorXd next(n);
  std::vector<double> residuals;
  residuals.reserve(static_cast<std::size_t>(t_max) + 1);
  double damping = 1.0;
  for (int t = 0;; ++t) {
    const double lhs = tv(walk, pi.values());
    const double rhs = damping * tv(plain, pushed);
    residuals.push_back(std::abs(lhs - rhs));
    if (t == t_max) break;
    k.apply(walk, next, params.alpha, params.lambda.values());
    walk.swap(next);
    k.apply(plain, next);
    plain.swap(next);
    k.apply(pushed, next);
    pushed.swap(next);
    damping *= 1.0 - params.alpha;
  }
  return residuals;
}

double verify_teleport_identity(const Digraph& g, const WalkParams& params, Vertex x, int t) {
  const TransitionKernel k(g);
  const auto pi = stationary_pagerank(k, params).distribution;
  return teleport_identity_residuals(k, params, pi, x, t).back();
}

void write_profile_csv(std::ostream& out, const DistanceProfile& profile, bool header) {
  if (header) out << "t,value,alpha,lambda_label,start,n,seed,T_ent\n";
  const auto& c = profile.context;
  for (std::size_t i = 0; i < profile.times.size(); ++i) {
    out << profile.times[i] << ',' << format_double(profile.values[i]) << ',' << format_double(c.alpha) << ','
        << c.lambda_label << ',' << c.start << ',' << c.n << ',' << c.seed << ',' << format_double(c.t_ent) << '\n';
  }
}

WalkSampler::WalkSampler(const Digraph& g, double alpha, std::optional<ProbVector> lambda) : g_(&g), alpha_(alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0,1)");
  if (alpha > 0.0) {
    if (!lambda) throw Error(ErrorCode::InvalidArgument, "a teleporting walk needs lambda");
    cdf_.resize(static_cast<std::size_t>(lambda->size()));
    double acc = 0.0;
    for (Index i = 0; i < lambda->size(); ++i) cdf_[static_cast<std::size_t>(i)] = acc += (*lambda)(i);
  }
}

std::int64_t WalkSampler::first_teleport_time(Rng& rng) const {
  if (alpha_ <= 0.0) throw Error(ErrorCode::AlphaZero, "the walk never teleports");
  std::int64_t tau = 1;
  while (!rng.bernoulli(alpha_)) ++tau;
  return tau;
}

std::vector<WalkSampler::Step> WalkSampler::path(Vertex x, int t, Rng& rng) const {
  std::vector<Step> steps;
  steps.reserve(static_cast<std::size_t>(t) + 1);
  steps.push_back({x, -1});
  const auto& offsets = g_->out_offsets();
  for (int s = 0; s < t; ++s) {
    if (alpha_ > 0.0 && rng.bernoulli(alpha_)) {
      const double u = rng.uniform() * cdf_.back();
      const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
      x = static_cast<Vertex>(std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
      steps.push_back({x, -1});
      continue;
    }
    const int d = g_->out_degree(x);
    if (d == 0) {
      steps.push_back({x, -1});
      continue;
    }
    const auto tail = offsets[static_cast<std::size_t>(x)] + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(d)));
    x = g_->out_targets()[static_cast<std::size_t>(tail)];
    steps.push_back({x, tail});
  }
  return steps;
}

}  // namespace pagemix
