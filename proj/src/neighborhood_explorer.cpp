#include "pagemix/neighborhood_explorer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <queue>
#include <tuple>
#include <unordered_map>

namespace pagemix {

ProbVector mu_in(const Digraph& g) {
  const Index n = g.n();
  if (g.provenance().model == Model::OCM) return ProbVector::uniform(n);
  Eigen::VectorXd w(n);
  for (Vertex y = 0; y < static_cast<Vertex>(n); ++y) w(y) = static_cast<double>(g.in_degree(y));
  return ProbVector::normalized(std::move(w));
}

EntropicTime entropic_time(const Digraph& g) {
  const ProbVector mu = mu_in(g);
  Eigen::VectorXd terms(g.n());
  for (Vertex x = 0; x < static_cast<Vertex>(g.n()); ++x) {
    const int d = g.out_degree(x);
    terms(x) = d > 0 ? mu(x) * std::log(static_cast<double>(d)) : 0.0;
  }
  EntropicTime e;
  e.entropy = compensated_sum(terms);
  e.t_ent = std::log(static_cast<double>(g.n())) / e.entropy;
  return e;
}

ExplorationTree explore_out_tree(const Digraph& g, Vertex z, int t, double eta) {
  if (!(eta > 0.0 && eta < 0.5)) throw Error(ErrorCode::InvalidArgument, "eta must lie in (0, 1/2)");
  if (t < 0) throw Error(ErrorCode::InvalidArgument, "height cap must be non-negative");
  ExplorationTree tree;
  tree.root = z;
  tree.eta = eta;
  tree.t_max = t;
  tree.n = g.n();
  const double nd = static_cast<double>(g.n());
  tree.w_min = std::pow(nd, -1.0 + eta * eta);
  const double max_den = std::pow(nd, 1.0 - eta * eta);

  // (den, endpoint vertex, tail index, node index); smallest first.
  using Tail = std::tuple<std::int64_t, Vertex, std::int64_t, std::int32_t>;
  std::priority_queue<Tail, std::vector<Tail>, std::greater<>> frontier;
  std::unordered_map<Vertex, std::int32_t> node_of;

  const auto& offsets = g.out_offsets();
  auto push_tails = [&](std::int32_t index) {
    const auto& node = tree.nodes[static_cast<std::size_t>(index)];
    const int d = g.out_degree(node.mark);
    if (d == 0 || node.height + 1 > t) return;
    const std::int64_t den = node.den * d;
    if (static_cast<double>(den) > max_den) return;
    for (auto e = offsets[static_cast<std::size_t>(node.mark)]; e < offsets[static_cast<std::size_t>(node.mark) + 1]; ++e) {
      frontier.emplace(den, node.mark, e, index);
    }
  };

  tree.nodes.push_back({z, -1, 0, -1, 1});
  node_of.emplace(z, 0);
  push_tails(0);
  while (!frontier.empty()) {
    const auto [den, from, tail, parent] = frontier.top();
    frontier.pop();
    ++tree.kappa;
    const Vertex head = g.out_targets()[static_cast<std::size_t>(tail)];
    if (node_of.contains(head)) {
      ++tree.duplicates;
      continue;
    }
    const auto index = static_cast<std::int32_t>(tree.nodes.size());
    const int height = tree.nodes[static_cast<std::size_t>(parent)].height + 1;
    tree.nodes.push_back({head, parent, height, tail, den});
    node_of.emplace(head, index);
    push_tails(index);
  }
  return tree;
}

std::vector<Vertex> annulus(const ExplorationTree& tree, int t) {
  if (t < 0 || t > tree.t_max) throw Error(ErrorCode::InvalidArgument, "annulus height outside the tree");
  std::vector<Vertex> ring;
  for (const auto& node : tree.nodes) {
    if (node.height == t) ring.push_back(node.mark);
  }
  std::sort(ring.begin(), ring.end());
  ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
  return ring;
}

double walk_in_tree_probability(const Digraph& g, const ExplorationTree& tree, int t) {
  if (t < 0 || t > tree.t_max) throw Error(ErrorCode::InvalidArgument, "time outside the tree");
  // Nodes are stored in creation order, so a parent always precedes its children.
  std::vector<double> mass(tree.nodes.size(), 0.0);
  mass[0] = 1.0;
  double survived = t == 0 ? 1.0 : 0.0;
  for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
    const auto& node = tree.nodes[i];
    if (node.height > t) continue;
    const auto& parent = tree.nodes[static_cast<std::size_t>(node.parent)];
    mass[i] = mass[static_cast<std::size_t>(node.parent)] / g.out_degree(parent.mark);
    if (node.height == t) survived += mass[i];
  }
  return std::min(1.0, survived);
}

void write_tree(std::ostream& out, const ExplorationTree& tree) {
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& node = tree.nodes[i];
    out << i << ' ' << node.parent << ' ' << node.mark << ' ' << node.height << ' ' << format_double(node.weight())
        << '\n';
  }
}

DecompositionResult mu_lambda_decomposition(const TransitionKernel& k, const WalkParams& params, int t, double eta,
                                            double t_ent, const ProbVector& pi, const ProbVector& pi0) {
  if (!(params.alpha > 0.0 && params.alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0,1)");
  if (!(eta > 0.0 && eta < 0.5)) throw Error(ErrorCode::InvalidArgument, "eta must lie in (0, 1/2)");
  const int horizon = static_cast<int>(std::floor((1.0 - 2.0 * eta) * t_ent));
  if (t < 0 || t > horizon) {
    throw Error(ErrorCode::EtaTooLarge,
                "t = " + std::to_string(t) + " exceeds floor((1-2 eta) T_ent) = " + std::to_string(horizon));
  }
  const double alpha = params.alpha;
  DecompositionResult r;
  r.eta = eta;
  r.t = t;
  r.cut = static_cast<int>(std::floor((1.0 - eta) * t_ent)) - t;
  r.a = -std::expm1(static_cast<double>(r.cut + 1) * std::log1p(-alpha));

  Eigen::VectorXd term = params.lambda.values();
  Eigen::VectorXd next(k.n());
  for (int s = 0; s < t; ++s) {
    k.apply(term, next);
    term.swap(next);
  }
  Eigen::VectorXd acc = alpha * term;
  double coeff = alpha;
  for (int j = 1; j <= r.cut; ++j) {
    k.apply(term, next);
    term.swap(next);
    coeff *= 1.0 - alpha;
    acc += coeff * term;
  }

  Eigen::VectorXd pushed = pi.values();
  for (int s = 0; s < t; ++s) {
    k.apply(pushed, next);
    pushed.swap(next);
  }
  r.residual = tv(pushed, (acc + (1.0 - r.a) * pi0.values()).eval());
  r.mu_lambda = ProbVector::normalized(acc / r.a, 1e-9);
  return r;
}

IntersectionReport path_annulus_intersections(const Digraph& g, Vertex x, Vertex z, int t, int u, double eta) {
  const double t_ent = entropic_time(g).t_ent;
  const int horizon = static_cast<int>(std::floor((1.0 - eta) * t_ent));
  if (t < 0 || t > u || u > horizon) {
    throw Error(ErrorCode::InvalidArgument, "need t <= u <= floor((1-eta) T_ent) = " + std::to_string(horizon));
  }
  IntersectionReport report;
  report.k_bound = (9.0 + 3.0 * std::log2(static_cast<double>(g.max_degree()))) / (eta * eta);

  const auto ring = annulus(explore_out_tree(g, x, t, eta), t);
  report.annulus_size = ring.size();
  const auto tz = explore_out_tree(g, z, u, eta);
  const std::size_t count = tz.nodes.size();

  // Visits to the annulus along each root path, filled in creation order.
  std::vector<int> hits(count, 0);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& node = tz.nodes[i];
    const int here = std::binary_search(ring.begin(), ring.end(), node.mark) ? 1 : 0;
    hits[i] = (node.parent < 0 ? 0 : hits[static_cast<std::size_t>(node.parent)]) + here;
    if (node.height == u) {
      ++report.paths;
      report.max_count = std::max(report.max_count, hits[i]);
    }
  }
  return report;
}

int tree_like_radius(Index n, int delta) {
  if (delta < 2) throw Error(ErrorCode::InvalidArgument, "Delta must be at least 2");
  const double hbar = std::log(static_cast<double>(n)) / std::log(static_cast<double>(delta)) / 10.0;
  return std::max(0, static_cast<int>(std::ceil(hbar)));
}

std::vector<Vertex> tree_like_vertices(const Digraph& g, int delta) {
  const int radius = tree_like_radius(g.n(), delta);
  std::vector<Vertex> result;
  std::vector<Vertex> seen;
  std::vector<Vertex> layer;
  std::vector<Vertex> next;
  for (Vertex z = 0; z < static_cast<Vertex>(g.n()); ++z) {
    seen.assign(1, z);
    layer.assign(1, z);
    bool is_tree = true;
    for (int depth = 0; depth < radius && is_tree; ++depth) {
      next.clear();
      for (const Vertex v : layer) {
        for (const Vertex w : g.out_neighbors(v)) {
          if (std::find(seen.begin(), seen.end(), w) != seen.end()) {
            is_tree = false;
            break;
          }
          seen.push_back(w);
          next.push_back(w);
        }
        if (!is_tree) break;
      }
      layer.swap(next);
    }
    if (is_tree) result.push_back(z);
  }
  return result;
}

SingularityReport singularity_diagnostic(const TransitionKernel& k, double alpha, int t,
                                         std::span<const WalkParams> lambdas, std::span<const Vertex> starts,
                                         double tol) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::AlphaZero, "the diagnostic needs alpha > 0");
  const Index n = k.n();
  std::vector<Eigen::VectorXd> walks;
  walks.reserve(starts.size());
  Eigen::VectorXd next(n);
  for (const Vertex x : starts) {
    Eigen::VectorXd cur = Eigen::VectorXd::Zero(n);
    cur(x) = 1.0;
    for (int s = 0; s < t; ++s) {
      k.apply(cur, next);
      cur.swap(next);
    }
    walks.push_back(std::move(cur));
  }
  SingularityReport report;
  for (const auto& params : lambdas) {
    WalkParams p = params;
    p.alpha = alpha;
    Eigen::VectorXd pushed = stationary_pagerank(k, p, tol).distribution.values();
    for (int s = 0; s < t; ++s) {
      k.apply(pushed, next);
      pushed.swap(next);
    }
    for (std::size_t i = 0; i < starts.size(); ++i) {
      const double value = tv(walks[i], pushed);
      report.rows.push_back({starts[i], params.label, t, value});
      report.min_value = std::min(report.min_value, value);
    }
  }
  return report;
}

std::vector<WalkParams> default_lambda_set(const Digraph& g, double alpha, std::span<const Vertex> diracs) {
  std::vector<WalkParams> set;
  for (const Vertex z : diracs) set.emplace_back(alpha, ProbVector::dirac(g.n(), z), "dirac(" + std::to_string(z) + ")");
  set.emplace_back(alpha, ProbVector::uniform(g.n()), "uniform");
  set.emplace_back(alpha, mu_in(g), "mu_in");
  return set;
}

void write_singularity_csv(std::ostream& out, const SingularityReport& report, bool header) {
  if (header) out << "x,lambda_label,t,tv_value\n";
  for (const auto& row : report.rows) {
    out << row.x << ',' << row.lambda_label << ',' << row.t << ',' << format_double(row.tv_value) << '\n';
  }
}

}  // namespace pagemix
