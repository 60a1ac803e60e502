#include "pagemix/branching_martingale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <unordered_set>

namespace pagemix {

GWSampler::GWSampler(const DegreeSequence& seq, Model model, OffspringSampling sampling)
    : model_(model), sampling_(sampling), out_(seq.out_degrees().begin(), seq.out_degrees().end()) {
  const Index n = seq.n();
  if (model == Model::DCM) {
    if (!seq.has_in_degrees()) throw Error(ErrorCode::MissingInDegrees, "model-1 tree needs in-degrees");
    in_.assign(seq.in_degrees().begin(), seq.in_degrees().end());
    tail_owner_.reserve(static_cast<std::size_t>(seq.m()));
    for (Vertex x = 0; x < n; ++x)
      tail_owner_.insert(tail_owner_.end(), static_cast<std::size_t>(out_[static_cast<std::size_t>(x)]), x);
    return;
  }
  in_.assign(static_cast<std::size_t>(n), 0);
  std::map<int, std::vector<Vertex>> by_degree;
  for (Vertex x = 0; x < n; ++x) {
    const int d = out_[static_cast<std::size_t>(x)];
    if (d > n) throw Error(ErrorCode::DegreeExceedsN, "out-degree exceeds n");
    by_degree[d].push_back(x);
  }
  const double nd = static_cast<double>(n);
  for (auto& [d, members] : by_degree) {
    DegreeClass c{d, std::move(members), {}};
    const auto size = static_cast<std::int64_t>(c.members.size());
    const double p = static_cast<double>(d) / nd;
    // Binomial pmf by the usual recurrence, in log space for the first term.
    double pmf = p >= 1.0 ? 0.0 : std::exp(static_cast<double>(size) * std::log1p(-p));
    double cdf = 0.0;
    for (std::int64_t k = 0; k <= size; ++k) {
      if (p >= 1.0) pmf = k == size ? 1.0 : 0.0;
      cdf += pmf;
      c.count_cdf.push_back(std::min(cdf, 1.0));
      if (cdf >= 1.0 - 1e-17 && k >= static_cast<std::int64_t>(p * static_cast<double>(size))) break;
      if (p < 1.0) pmf *= p / (1.0 - p) * static_cast<double>(size - k) / static_cast<double>(k + 1);
    }
    c.count_cdf.back() = 1.0;
    classes_.push_back(std::move(c));
  }
}

void GWSampler::children(Vertex mark, Rng& rng, std::vector<Vertex>& out) const {
  if (model_ == Model::DCM) {
    const int k = in_[static_cast<std::size_t>(mark)];
    for (int i = 0; i < k; ++i) out.push_back(tail_owner_[rng.below(tail_owner_.size())]);
    return;
  }
  const double n = static_cast<double>(out_.size());
  if (sampling_ == OffspringSampling::PerMark) {
    for (std::size_t j = 0; j < out_.size(); ++j)
      if (rng.uniform() < static_cast<double>(out_[j]) / n) out.push_back(static_cast<Vertex>(j));
    return;
  }
  const std::size_t first = out.size();
  thread_local std::vector<std::uint64_t> picked;
  for (const auto& [d, members, cdf] : classes_) {
    const auto size = static_cast<std::int64_t>(members.size());
    const double u = rng.uniform();
    const auto k = static_cast<std::int64_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    if (k == 0) continue;
    // Floyd's algorithm: a uniform k-subset of [0, size).
    picked.clear();
    for (std::int64_t j = size - k; j < size; ++j) {
      const auto r = rng.below(static_cast<std::uint64_t>(j) + 1);
      const bool seen = std::find(picked.begin(), picked.end(), r) != picked.end();
      picked.push_back(seen ? static_cast<std::uint64_t>(j) : r);
    }
    for (const auto i : picked) out.push_back(members[i]);
  }
  std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end());
}

MarkedGWTree sample_gw_tree(const GWSampler& sampler, std::optional<Vertex> root, int depth, std::uint64_t seed) {
  if (depth < 0) throw Error(ErrorCode::InvalidArgument, "depth must be non-negative");
  Rng rng(seed);
  MarkedGWTree tree;
  tree.model = sampler.model();
  tree.seed = seed;
  if (root) {
    if (*root < 0 || *root >= sampler.n()) throw Error(ErrorCode::InvalidArgument, "root mark out of range");
    tree.root = *root;
  } else {
    tree.root = static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(sampler.n())));
  }
  tree.levels.push_back({GWNode{tree.root, -1, 1.0}});
  std::vector<Vertex> marks;
  for (int h = 0; h < depth; ++h) {
    const auto& parents = tree.levels.back();
    std::vector<GWNode> next;
    for (std::size_t p = 0; p < parents.size(); ++p) {
      marks.clear();
      sampler.children(parents[p].mark, rng, marks);
      for (const Vertex c : marks)
        next.push_back({c, static_cast<std::int32_t>(p), parents[p].den * sampler.out_degree(c)});
    }
    tree.levels.push_back(std::move(next));
  }
  return tree;
}

MarkedGWTree sample_gw_tree(const DegreeSequence& seq, Model model, std::optional<Vertex> root, int depth,
                            std::uint64_t seed, OffspringSampling sampling) {
  return sample_gw_tree(GWSampler(seq, model, sampling), root, depth, seed);
}

double weight_functional(const MarkedGWTree& tree, const Eigen::VectorXd& phi, int t) {
  if (t < 0 || t > tree.depth()) throw Error(ErrorCode::InvalidArgument, "generation outside the sampled tree");
  std::map<double, std::vector<double>> by_den;
  for (const auto& node : tree.levels[static_cast<std::size_t>(t)]) by_den[node.den].push_back(phi(node.mark));
  std::vector<double> terms;
  terms.reserve(by_den.size());
  for (const auto& [den, values] : by_den) terms.push_back(compensated_sum(values) / den);
  return compensated_sum(terms);
}

Eigen::VectorXd scaled_mu_in(const DegreeSequence& seq, Model model) {
  const Index n = seq.n();
  if (model == Model::OCM) return Eigen::VectorXd::Ones(n);
  Eigen::VectorXd v(n);
  const double m = static_cast<double>(seq.m());
  for (Vertex x = 0; x < static_cast<Vertex>(n); ++x)
    v(x) = static_cast<double>(static_cast<std::int64_t>(n) * seq.in_degree(x)) / m;
  return v;
}

std::vector<double> martingale_path(const MarkedGWTree& tree, const DegreeSequence& seq, int t_max) {
  if (t_max > tree.depth()) throw Error(ErrorCode::InvalidArgument, "t_max beyond the sampled depth");
  const Eigen::VectorXd scaled = scaled_mu_in(seq, tree.model);
  std::vector<double> path;
  for (int t = 0; t <= t_max; ++t) path.push_back(weight_functional(tree, scaled, t));
  return path;
}

namespace {

// n mu_in(x) psi(x), the contribution of one node to the next increment,
// given its children's marks.
//   model 1: (n / m) sum_y (d-_y - d+_y) / d+_y
//   model 2: sum_y 1/d+_y - 1
double node_increment(const GWSampler& s, Model model, double n_over_m, std::span<const Vertex> kids) {
  double acc = 0.0;
  if (model == Model::DCM) {
    for (const Vertex y : kids)
      acc += static_cast<double>(s.in_degree(y) - s.out_degree(y)) / static_cast<double>(s.out_degree(y));
    return n_over_m * acc;
  }
  for (const Vertex y : kids) acc += 1.0 / static_cast<double>(s.out_degree(y));
  return acc - 1.0;
}

std::vector<double> increments_impl(const MarkedGWTree& tree, const GWSampler& s, double n_over_m, int t_max) {
  std::vector<double> deltas;
  std::vector<Vertex> kids;
  for (int t = 0; t < t_max; ++t) {
    const auto& parents = tree.levels[static_cast<std::size_t>(t)];
    const auto& children = tree.levels[static_cast<std::size_t>(t) + 1];
    std::vector<double> terms;
    terms.reserve(parents.size());
    std::size_t c = 0;
    for (std::size_t p = 0; p < parents.size(); ++p) {
      kids.clear();
      while (c < children.size() && children[c].parent == static_cast<std::int32_t>(p))
        kids.push_back(children[c++].mark);
      terms.push_back(node_increment(s, tree.model, n_over_m, kids) / parents[p].den);
    }
    deltas.push_back(compensated_sum(terms));
  }
  return deltas;
}

double n_over_m(const DegreeSequence& seq) { return static_cast<double>(seq.n()) / static_cast<double>(seq.m()); }

struct Moments {
  double mean = 0.0;
  double se = 0.0;
  double var = 0.0;
  double var_se = 0.0;
};

Moments moments(const std::vector<double>& values) {
  const auto count = static_cast<double>(values.size());
  Moments r;
  r.mean = compensated_sum(values) / count;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - r.mean) * (values[i] - r.mean);
  const double ss = compensated_sum(sq);
  r.var = values.size() > 1 ? ss / (count - 1.0) : 0.0;
  r.se = std::sqrt(r.var / count);
  // Standard error of the variance estimate from the spread of the squared deviations.
  const double m2 = ss / count;
  std::vector<double> dev(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) dev[i] = (sq[i] - m2) * (sq[i] - m2);
  r.var_se = values.size() > 1 ? std::sqrt(compensated_sum(dev) / (count - 1.0) / count) : 0.0;
  return r;
}

MonteCarloRow make_row(std::string quantity, int t, const std::vector<double>& values, double target,
                       std::uint64_t seed) {
  const Moments mo = moments(values);
  MonteCarloRow row;
  row.quantity = std::move(quantity);
  row.t = t;
  row.estimate = mo.mean;
  row.std_error = mo.se;
  row.target = target;
  row.samples = static_cast<std::int64_t>(values.size());
  row.seed = seed;
  if (mo.se > 0.0) {
    row.z_score = (mo.mean - target) / mo.se;
  } else {
    row.z_score = mo.mean == target ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mo.mean - target);
  }
  row.pass = std::abs(row.z_score) <= 3.0;
  return row;
}

}  // namespace

std::vector<double> martingale_increments(const MarkedGWTree& tree, const DegreeSequence& seq, int t_max) {
  if (t_max > tree.depth()) throw Error(ErrorCode::InvalidArgument, "increments need generation t_max");
  return increments_impl(tree, GWSampler(seq, tree.model), n_over_m(seq), t_max);
}

double initial_variance(const DegreeSequence& seq, Model model) {
  if (model == Model::OCM) return 0.0;
  std::vector<double> sq;
  sq.reserve(static_cast<std::size_t>(seq.n()));
  for (const int d : seq.in_degrees()) sq.push_back(static_cast<double>(d) * d);
  const double m = static_cast<double>(seq.m());
  return static_cast<double>(seq.n()) / (m * m) * compensated_sum(sq) - 1.0;
}

double lambda_second_moment(const DegreeSequence& seq, Model model, const ProbVector& lambda, int t) {
  if (t < 0) throw Error(ErrorCode::InvalidArgument, "negative t");
  if (lambda.size() != seq.n()) throw Error(ErrorCode::LengthMismatch, "lambda length differs from n");
  const double n = static_cast<double>(seq.n());
  const Eigen::VectorXd phi = n * (mu_in(seq, model).values() - lambda.values());
  if (t == 0) return compensated_sum(phi.array().square().matrix()) / n;
  Eigen::VectorXd terms(seq.n());
  for (Vertex j = 0; j < static_cast<Vertex>(seq.n()); ++j) {
    const double d = seq.out_degree(j);
    terms(j) = phi(j) * phi(j) / d * (model == Model::OCM ? 1.0 - d / n : 1.0);
  }
  return compensated_sum(terms) / n * std::pow(rho_and_C(seq, model).rho, t - 1);
}

std::vector<MonteCarloRow> martingale_rows(const DegreeSequence& seq, Model model, const std::vector<int>& times,
                                           const std::optional<ProbVector>& lambda, std::int64_t samples,
                                           std::uint64_t seed, OffspringSampling sampling) {
  if (times.empty() || samples < 2) throw Error(ErrorCode::InvalidArgument, "need times and at least two samples");
  const int t_top = *std::max_element(times.begin(), times.end());
  if (*std::min_element(times.begin(), times.end()) < 0) throw Error(ErrorCode::InvalidArgument, "negative t");
  if (lambda && lambda->size() != seq.n()) throw Error(ErrorCode::LengthMismatch, "lambda length differs from n");

  const GWSampler sampler(seq, model, sampling);
  const auto bc = rho_and_C(seq, model);
  const double ratio = n_over_m(seq);
  const double n = static_cast<double>(seq.n());
  const Eigen::VectorXd mu = mu_in(seq, model).values();
  Eigen::VectorXd phi;  // n (mu_in - lambda), so M_t - n X_t(lambda) = X_t(phi)
  if (lambda) phi = n * (mu - lambda->values());
  const Eigen::VectorXd scaled = scaled_mu_in(seq, model);

  const auto count = static_cast<std::size_t>(samples);
  const std::size_t span = static_cast<std::size_t>(t_top) + 1;
  std::vector<double> m_val(count * span), d_val(count * span), l_val(count * span);
  parallel_each(samples, [&](Index i) {
    const auto tree = sample_gw_tree(sampler, std::nullopt, t_top + 1, substream_seed(seed, static_cast<std::uint64_t>(i)));
    const auto deltas = increments_impl(tree, sampler, ratio, t_top + 1);
    for (std::size_t t = 0; t < span; ++t) {
      const std::size_t at = static_cast<std::size_t>(i) * span + t;
      m_val[at] = weight_functional(tree, scaled, static_cast<int>(t));
      d_val[at] = deltas[t];
      if (lambda) l_val[at] = weight_functional(tree, phi, static_cast<int>(t));
    }
  });

  const double gamma = lambda ? gamma_lambda(*lambda, seq, model) : 0.0;
  std::vector<MonteCarloRow> rows;
  std::vector<double> col(count);
  auto column = [&](const std::vector<double>& src, int t, bool square) {
    for (std::size_t i = 0; i < count; ++i) {
      const double v = src[i * span + static_cast<std::size_t>(t)];
      col[i] = square ? v * v : v;
    }
    return col;
  };
  for (const int t : times) {
    rows.push_back(make_row("M_mean", t, column(m_val, t, false), 1.0, seed));
    rows.push_back(make_row("Delta_mean", t, column(d_val, t, false), 0.0, seed));
    rows.push_back(make_row("Delta_sq", t, column(d_val, t, true), bc.c * (1.0 - bc.rho) * std::pow(bc.rho, t), seed));
    if (lambda) {
      auto row = make_row("lambda_l2", t, column(l_val, t, true), gamma * std::pow(bc.rho, t), seed);
      row.pass = row.estimate <= row.target + 3.0 * row.std_error;
      rows.push_back(std::move(row));
      rows.push_back(
          make_row("lambda_l2_exact", t, column(l_val, t, true), lambda_second_moment(seq, model, *lambda, t), seed));
    }
  }
  return rows;
}

MonteCarloRow variance_law_check(const DegreeSequence& seq, Model model, int t, std::int64_t samples,
                                 std::uint64_t seed, OffspringSampling sampling) {
  if (samples < 1000) throw Error(ErrorCode::InvalidArgument, "variance law check needs at least 1000 samples");
  const auto rows = martingale_rows(seq, model, {t}, std::nullopt, samples, seed, sampling);
  return *std::find_if(rows.begin(), rows.end(), [](const auto& r) { return r.quantity == "Delta_sq"; });
}

MonteCarloRow lambda_l2_check(const DegreeSequence& seq, Model model, const ProbVector& lambda, int t,
                              std::int64_t samples, std::uint64_t seed, OffspringSampling sampling) {
  const auto rows = martingale_rows(seq, model, {t}, lambda, samples, seed, sampling);
  return *std::find_if(rows.begin(), rows.end(), [](const auto& r) { return r.quantity == "lambda_l2"; });
}

MInfinityMoments m_infinity_moments(const DegreeSequence& seq, Model model, int deep_t, std::int64_t samples,
                                    std::uint64_t seed, OffspringSampling sampling) {
  if (samples < 2) throw Error(ErrorCode::InvalidArgument, "need at least two samples");
  const auto bc = rho_and_C(seq, model);
  if (deep_t < 0 || std::pow(bc.rho, deep_t) > 1e-6)
    throw Error(ErrorCode::InvalidArgument, "deep_t too small: rho^deep_t must be <= 1e-6");
  const GWSampler sampler(seq, model, sampling);
  const double ratio = n_over_m(seq);
  const Eigen::VectorXd scaled = scaled_mu_in(seq, model);

  // Generation by generation without keeping the tree: M_deep = M_0 + sum Delta_s.
  std::vector<double> values(static_cast<std::size_t>(samples));
  parallel_each(samples, [&](Index i) {
    Rng rng(substream_seed(seed, static_cast<std::uint64_t>(i)));
    const auto root = static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(seq.n())));
    std::vector<std::pair<Vertex, double>> gen{{root, 1.0}}, next;
    std::vector<double> parts{scaled(root)};
    std::vector<Vertex> kids;
    std::vector<double> terms;
    for (int s = 0; s < deep_t && !gen.empty(); ++s) {
      next.clear();
      terms.clear();
      for (const auto& [mark, den] : gen) {
        kids.clear();
        sampler.children(mark, rng, kids);
        terms.push_back(node_increment(sampler, model, ratio, kids) / den);
        for (const Vertex c : kids) next.emplace_back(c, den * sampler.out_degree(c));
      }
      parts.push_back(compensated_sum(terms));
      gen.swap(next);
    }
    values[static_cast<std::size_t>(i)] = compensated_sum(parts);
  });

  const Moments mo = moments(values);
  MInfinityMoments r;
  r.mean = mo.mean;
  r.mean_se = mo.se;
  r.variance = mo.var;
  r.variance_se = mo.var_se;
  r.target_variance = initial_variance(seq, model) + bc.c;
  r.samples = samples;
  return r;
}

void write_monte_carlo_csv(std::ostream& out, const std::vector<MonteCarloRow>& rows, bool header) {
  if (header) out << "quantity,t,estimate,std_error,target,z_score,samples,seed\n";
  for (const auto& r : rows)
    out << r.quantity << ',' << r.t << ',' << format_double(r.estimate) << ',' << format_double(r.std_error) << ','
        << format_double(r.target) << ',' << format_double(r.z_score) << ',' << r.samples << ',' << r.seed << '\n';
}

InNeighborhood explore_in_neighborhood(const Digraph& g, Vertex v, int t) {
  if (v < 0 || v >= g.n()) throw Error(ErrorCode::InvalidArgument, "vertex out of range");
  if (t < 0) throw Error(ErrorCode::InvalidArgument, "depth must be non-negative");
  InNeighborhood nb;
  nb.center = v;
  nb.layers.push_back({v});
  std::unordered_set<Vertex> seen{v};
  for (int k = 0; k < t; ++k) {
    std::vector<Vertex> layer;
    for (const Vertex y : nb.layers.back()) {
      for (const Vertex s : g.in_neighbors(y)) {
        nb.edges.emplace_back(s, y);
        if (!seen.insert(s).second) {
          nb.is_tree = false;
          continue;
        }
        layer.push_back(s);
      }
    }
    if (layer.empty()) break;
    nb.layers.push_back(std::move(layer));
  }
  nb.size = seen.size();
  return nb;
}

double coupling_bound(const DegreeSequence& seq, Model model, int t) {
  const double delta = seq.delta();
  if (model == Model::DCM) return std::pow(delta, 2 * t + 3) / static_cast<double>(seq.m());
  const double n = static_cast<double>(seq.n());
  if (static_cast<double>(t) > std::log(n) / (4.0 * std::log(delta)))
    throw Error(ErrorCode::InvalidArgument, "t beyond log n / (4 log Delta)");
  return std::pow(delta, 3 * t) * std::pow(std::log(n), 4) / n;
}

CouplingReport coupling_agreement(const DegreeSequence& seq, int t, int graph_samples, int vertices_per_graph,
                                  std::uint64_t seed) {
  if (graph_samples < 1 || vertices_per_graph < 1) throw Error(ErrorCode::InvalidArgument, "need samples");
  CouplingReport r;
  r.bound = coupling_bound(seq, seq.model(), t);
  if (r.bound >= 1.0) throw Error(ErrorCode::BoundVacuous, "coupling bound " + format_double(r.bound) + " >= 1");
  std::vector<std::int64_t> fails(static_cast<std::size_t>(graph_samples), 0);
  parallel_each(graph_samples, [&](Index k) {
    const auto graph_seed = substream_seed(seed, 2 * static_cast<std::uint64_t>(k));
    const Digraph g = sample_graph(seq, graph_seed);
    Rng rng(substream_seed(seed, 2 * static_cast<std::uint64_t>(k) + 1));
    for (int j = 0; j < vertices_per_graph; ++j) {
      const auto v = static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(g.n())));
      if (!explore_in_neighborhood(g, v, t).is_tree) ++fails[static_cast<std::size_t>(k)];
    }
  });
  for (const auto f : fails) r.failures += f;
  r.trials = static_cast<std::int64_t>(graph_samples) * vertices_per_graph;
  r.fraction = static_cast<double>(r.failures) / static_cast<double>(r.trials);
  r.ci_upper = r.bound + 3.0 * std::sqrt(r.bound * (1.0 - r.bound) / static_cast<double>(r.trials));
  r.pass = r.fraction <= r.ci_upper;
  return r;
}

}  // namespace pagemix
