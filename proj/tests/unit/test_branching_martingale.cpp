#include "helpers.hpp"
#include "oracles.hpp"

#include "pagemix/branching_martingale.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

using namespace pagemix;
using namespace testing;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

// Exact law of the number of children in model 2: sum of independent Bernoulli(d+_j / n).
std::vector<double> offspring_pmf(const DegreeSequence& seq) {
  std::vector<double> pmf{1.0};
  const double n = static_cast<double>(seq.n());
  for (const int d : seq.out_degrees()) {
    const double p = d / n;
    std::vector<double> next(pmf.size() + 1, 0.0);
    for (std::size_t k = 0; k < pmf.size(); ++k) {
      next[k] += pmf[k] * (1.0 - p);
      next[k + 1] += pmf[k] * p;
    }
    pmf.swap(next);
  }
  return pmf;
}

void check_in_neighborhood(const Digraph& g, Vertex v, int t) {
  const auto nb = explore_in_neighborhood(g, v, t);
  std::map<Vertex, int> first;
  std::int64_t walks = 0;
  backward_walks(g, v, t, 0, first, walks);

  REQUIRE(nb.layers.front() == std::vector<Vertex>{v});
  std::map<Vertex, int> got;
  for (std::size_t k = 0; k < nb.layers.size(); ++k)
    for (const Vertex u : nb.layers[k]) CHECK(got.emplace(u, static_cast<int>(k)).second);
  CHECK(got == first);
  CHECK(nb.size == first.size());
  // A tree exactly when every walk of length <= t ends at its own vertex.
  CHECK(nb.is_tree == (walks == static_cast<std::int64_t>(first.size())));

  std::multiset<std::pair<Vertex, Vertex>> expect;
  for (const auto& [u, depth] : first)
    if (depth < t)
      for (const Vertex s : g.in_neighbors(u)) expect.emplace(s, u);
  CHECK(std::multiset<std::pair<Vertex, Vertex>>(nb.edges.begin(), nb.edges.end()) == expect);
}

}  // namespace

TEST_CASE("model-1 trees: offspring counts are d- of the mark") {
  Rng rng(1);
  const auto seq = random_sequence(40, 2, 5, Model::DCM, rng);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto tree = sample_gw_tree(seq, Model::DCM, std::nullopt, 4, s);
    for (int h = 0; h < tree.depth(); ++h) {
      std::vector<int> kids(tree.levels[static_cast<std::size_t>(h)].size(), 0);
      for (const auto& c : tree.levels[static_cast<std::size_t>(h) + 1]) ++kids[static_cast<std::size_t>(c.parent)];
      for (std::size_t p = 0; p < kids.size(); ++p)
        CHECK(kids[p] == seq.in_degree(tree.levels[static_cast<std::size_t>(h)][p].mark));
    }
  }
  const auto regular = DegreeSequence::regular(100, 3, Model::DCM);
  const auto tree = sample_gw_tree(regular, Model::DCM, 5, 5, 9);
  for (int h = 0; h <= 5; ++h) CHECK(tree.levels[static_cast<std::size_t>(h)].size() == std::pow(3, h));
  CHECK(tree.root == 5);
}

TEST_CASE("model-1 child marks follow d+_k / m") {
  const auto seq = DegreeSequence::build({2, 3, 4, 5, 2, 2, 6, 8}, std::vector<int>{4, 4, 4, 4, 4, 4, 4, 4}, Model::DCM);
  const GWSampler sampler(seq, Model::DCM);
  Rng rng(2024);
  std::vector<std::int64_t> counts(8, 0);
  std::vector<Vertex> kids;
  std::int64_t draws = 0;
  while (draws < 1000000) {
    kids.clear();
    sampler.children(static_cast<Vertex>(draws % 8), rng, kids);
    for (const Vertex k : kids) ++counts[static_cast<std::size_t>(k)];
    draws += static_cast<std::int64_t>(kids.size());
  }
  for (Vertex k = 0; k < 8; ++k) {
    const double p = static_cast<double>(seq.out_degree(k)) / static_cast<double>(seq.m());
    const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(draws));
    CHECK(std::abs(static_cast<double>(counts[static_cast<std::size_t>(k)]) / static_cast<double>(draws) - p) <=
          3.0 * sigma);
  }
}

TEST_CASE("model-2 offspring: distinct marks and mean <d>") {
  const auto seq = DegreeSequence::regular(1000, 3, Model::OCM);
  for (const auto sampling : {OffspringSampling::PerMark, OffspringSampling::Thinned}) {
    const GWSampler sampler(seq, Model::OCM, sampling);
    Rng rng(sampling == OffspringSampling::PerMark ? 11 : 12);
    std::vector<Vertex> kids;
    double sum = 0.0, sq = 0.0;
    const int nodes = 100000;
    for (int i = 0; i < nodes; ++i) {
      kids.clear();
      sampler.children(static_cast<Vertex>(i % 1000), rng, kids);
      CHECK(std::adjacent_find(kids.begin(), kids.end(), std::greater_equal<>()) == kids.end());
      sum += static_cast<double>(kids.size());
      sq += static_cast<double>(kids.size() * kids.size());
    }
    const double mean = sum / nodes;
    const double var = sq / nodes - mean * mean;
    CHECK(std::abs(mean - seq.mean_degree()) <= 3.0 * std::sqrt(var / nodes));
  }
}

TEST_CASE("model-2 thinned sampling has the per-mark law") {
  std::vector<int> out(30);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = 2 + static_cast<int>(j % 5);
  const auto seq = DegreeSequence::build(out, std::nullopt, Model::OCM);
  const auto pmf = offspring_pmf(seq);
  for (const auto sampling : {OffspringSampling::PerMark, OffspringSampling::Thinned}) {
    const GWSampler sampler(seq, Model::OCM, sampling);
    Rng rng(77);
    const int draws = 200000;
    std::vector<std::int64_t> present(30, 0), sizes(31, 0);
    std::vector<Vertex> kids;
    for (int i = 0; i < draws; ++i) {
      kids.clear();
      sampler.children(0, rng, kids);
      ++sizes[kids.size()];
      for (const Vertex k : kids) ++present[static_cast<std::size_t>(k)];
    }
    // Per-mark inclusion frequency, Bonferroni-adjusted over 30 marks.
    for (std::size_t j = 0; j < 30; ++j) {
      const double p = out[j] / 30.0;
      const double sigma = std::sqrt(p * (1.0 - p) / draws);
      CHECK(std::abs(static_cast<double>(present[j]) / draws - p) <= 4.5 * sigma);
    }
    // Offspring-count law: chi-square over cells with expectation >= 5.
    double chi2 = 0.0;
    int cells = 0;
    double pooled_obs = 0.0, pooled_exp = 0.0;
    for (std::size_t k = 0; k < pmf.size() && k < sizes.size(); ++k) {
      const double expect = pmf[k] * draws;
      if (expect >= 5.0) {
        chi2 += (static_cast<double>(sizes[k]) - expect) * (static_cast<double>(sizes[k]) - expect) / expect;
        ++cells;
      } else {
        pooled_obs += static_cast<double>(sizes[k]);
        pooled_exp += expect;
      }
    }
    if (pooled_exp > 0.0) {
      chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
      ++cells;
    }
    const double dof = cells - 1;
    CHECK(chi2 <= dof + 5.0 * std::sqrt(2.0 * dof));
  }
}

TEST_CASE("same seed gives the same tree") {
  const auto seq = DegreeSequence::regular(200, 3, Model::OCM);
  for (const auto sampling : {OffspringSampling::PerMark, OffspringSampling::Thinned}) {
    const auto a = sample_gw_tree(seq, Model::OCM, std::nullopt, 4, 42, sampling);
    const auto b = sample_gw_tree(seq, Model::OCM, std::nullopt, 4, 42, sampling);
    REQUIRE(a.levels.size() == b.levels.size());
    CHECK(a.root == b.root);
    for (std::size_t h = 0; h < a.levels.size(); ++h) {
      REQUIRE(a.levels[h].size() == b.levels[h].size());
      for (std::size_t i = 0; i < a.levels[h].size(); ++i) {
        CHECK(a.levels[h][i].mark == b.levels[h][i].mark);
        CHECK(a.levels[h][i].parent == b.levels[h][i].parent);
        CHECK(a.levels[h][i].den == b.levels[h][i].den);
      }
    }
  }
  CHECK_THROWS_AS(sample_gw_tree(seq, Model::OCM, std::nullopt, -1, 1), Error);
  CHECK(code_of([&] { sample_gw_tree(seq, Model::DCM, std::nullopt, 1, 1); }) == ErrorCode::MissingInDegrees);
}

TEST_CASE("weight functional examples") {
  Rng rng(8);
  const auto seq = random_sequence(30, 2, 4, Model::DCM, rng);
  const Eigen::VectorXd phi = Eigen::VectorXd::LinSpaced(30, 1.0, 30.0);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto tree = sample_gw_tree(seq, Model::DCM, std::nullopt, 3, s);
    CHECK(weight_functional(tree, phi, 0) == phi(tree.root));
    // Weight is the product of 1/d+ over the path below the root.
    for (int h = 1; h <= 3; ++h) {
      for (std::size_t i = 0; i < tree.levels[static_cast<std::size_t>(h)].size(); ++i) {
        double w = 1.0;
        std::size_t at = i;
        for (int k = h; k >= 1; --k) {
          const auto& node = tree.levels[static_cast<std::size_t>(k)][at];
          w /= seq.out_degree(node.mark);
          at = static_cast<std::size_t>(node.parent);
        }
        CHECK(tree.levels[static_cast<std::size_t>(h)][i].weight() == doctest::Approx(w).epsilon(1e-15));
      }
    }
  }

  // A model-2 tree that dies out has empty generations.
  const auto sparse = DegreeSequence::regular(50, 2, Model::OCM);
  bool saw_empty = false;
  for (std::uint64_t s = 0; s < 100 && !saw_empty; ++s) {
    const auto tree = sample_gw_tree(sparse, Model::OCM, std::nullopt, 3, s);
    if (tree.levels[3].empty()) {
      CHECK(weight_functional(tree, Eigen::VectorXd::Ones(50), 3) == 0.0);
      saw_empty = true;
    }
  }
  CHECK(saw_empty);
  const auto tree = sample_gw_tree(sparse, Model::OCM, std::nullopt, 2, 1);
  CHECK_THROWS_AS(weight_functional(tree, Eigen::VectorXd::Ones(50), 3), Error);
}

TEST_CASE("martingale path closed forms") {
  const auto regular = DegreeSequence::regular(100, 3, Model::DCM);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto tree = sample_gw_tree(regular, Model::DCM, std::nullopt, 6, s);
    for (const double m : martingale_path(tree, regular, 6)) CHECK(m == 1.0);
    for (const double d : martingale_increments(tree, regular, 6)) CHECK(d == 0.0);
    for (int t = 0; t <= 6; ++t) CHECK(weight_functional(tree, Eigen::VectorXd::Ones(100), t) == 1.0);
  }
  const auto ocm = DegreeSequence::build({2, 2, 3, 2, 4, 6, 2, 5, 3, 2}, std::nullopt, Model::OCM);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto tree = sample_gw_tree(ocm, Model::OCM, std::nullopt, 3, s);
    CHECK(martingale_path(tree, ocm, 3).front() == 1.0);
  }
}

TEST_CASE("pointwise d- = d+ conserves M_t but not the total weight") {
  const std::vector<int> deg{2, 2, 3, 4, 2, 3, 6, 5};
  const auto seq = DegreeSequence::build(deg, deg, Model::DCM);
  bool weight_moved = false;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto tree = sample_gw_tree(seq, Model::DCM, std::nullopt, 4, s);
    const auto path = martingale_path(tree, seq, 4);
    for (const double d : martingale_increments(tree, seq, 4)) CHECK(d == 0.0);
    for (const double m : path) CHECK(m == doctest::Approx(path.front()).epsilon(1e-14));
    for (int t = 1; t <= 4; ++t)
      weight_moved |= std::abs(weight_functional(tree, Eigen::VectorXd::Ones(8), t) - 1.0) > 1e-9;
  }
  CHECK(weight_moved);
}

TEST_CASE("martingale telescoping") {
  Rng rng(31);
  for (const Model model : {Model::DCM, Model::OCM}) {
    const auto seq = random_sequence(60, 2, 5, model, rng);
    for (std::uint64_t s = 0; s < 30; ++s) {
      const auto tree = sample_gw_tree(seq, model, std::nullopt, 5, s, OffspringSampling::Thinned);
      const auto path = martingale_path(tree, seq, 5);
      const auto deltas = martingale_increments(tree, seq, 5);
      double acc = path.front();
      for (int t = 0; t < 5; ++t) {
        acc += deltas[static_cast<std::size_t>(t)];
        CHECK(std::abs(path[static_cast<std::size_t>(t) + 1] - path[static_cast<std::size_t>(t)] -
                       deltas[static_cast<std::size_t>(t)]) <= 1e-12 * std::max(1.0, std::abs(path[t])));
        CHECK(std::abs(acc - path[static_cast<std::size_t>(t) + 1]) <= 1e-12 * std::max(1.0, std::abs(acc)));
      }
    }
  }
}

TEST_CASE("variance law: model 1 with d- = d+ gives exactly 0") {
  const auto seq = DegreeSequence::regular(100, 3, Model::DCM);
  for (int t = 0; t <= 2; ++t) {
    const auto row = variance_law_check(seq, Model::DCM, t, 1000, 5);
    CHECK(row.estimate == 0.0);
    CHECK(row.std_error == 0.0);
    CHECK(row.target == 0.0);
    CHECK(row.z_score == 0.0);
    CHECK(row.pass);
  }
  CHECK_THROWS_AS(variance_law_check(seq, Model::DCM, 0, 999, 5), Error);
}

TEST_CASE("variance law: model 2, d+ = 2, n = 100") {
  const auto seq = DegreeSequence::regular(100, 2, Model::OCM);
  const auto bc = rho_and_C(seq, Model::OCM);
  CHECK(bc.rho == doctest::Approx(0.5));
  CHECK(bc.c == doctest::Approx(0.98));
  const auto rows = martingale_rows(seq, Model::OCM, {0, 1, 2}, std::nullopt, 100000, 2718);
  for (const auto& row : rows) {
    MESSAGE(row.quantity, " t=", row.t, " est=", row.estimate, " target=", row.target, " z=", row.z_score);
    CHECK(row.pass);
    CHECK(std::abs(row.z_score) <= 3.0);
  }
}

TEST_CASE("variance law: model 1 with mixed degrees") {
  Rng rng(123);
  const auto seq = random_sequence(50, 2, 4, Model::DCM, rng);
  const auto rows = martingale_rows(seq, Model::DCM, {0, 1, 2}, std::nullopt, 100000, 99);
  for (const auto& row : rows) {
    MESSAGE(row.quantity, " t=", row.t, " est=", row.estimate, " target=", row.target, " z=", row.z_score);
    CHECK(row.pass);
  }
}

TEST_CASE("lambda l2 bound") {
  const auto regular = DegreeSequence::regular(100, 3, Model::DCM);
  const auto exact = lambda_l2_check(regular, Model::DCM, mu_in(regular), 2, 1000, 3);
  CHECK(exact.estimate == 0.0);
  CHECK(exact.pass);

  Rng rng(4);
  const auto mixed = random_sequence(40, 2, 5, Model::DCM, rng);
  CHECK(lambda_l2_check(mixed, Model::DCM, mu_in(mixed), 1, 1000, 3).estimate == 0.0);

  const auto ocm = DegreeSequence::regular(50, 3, Model::OCM);
  CHECK(lambda_l2_check(ocm, Model::OCM, ProbVector::uniform(50), 2, 1000, 3).estimate == 0.0);

  // lambda = delta_0: phi = 1 - n 1[j = 0]. At t = 0 the moment is (1/n) sum phi^2 = n - 1,
  // twice gamma(delta_0) = (n - 1)/2, so the bound gamma rho^t cannot hold there.
  const auto dirac = ProbVector::dirac(50, 0);
  const double gamma = gamma_lambda(dirac, ocm);
  CHECK(gamma == doctest::Approx(24.5));
  CHECK(lambda_second_moment(ocm, Model::OCM, dirac, 0) == doctest::Approx(49.0));
  const double c_lambda = (49.0 * 49.0 + 49.0) / 3.0 * (1.0 - 3.0 / 50.0) / 50.0;
  for (int t = 1; t <= 3; ++t)
    CHECK(lambda_second_moment(ocm, Model::OCM, dirac, t) == doctest::Approx(c_lambda * std::pow(1.0 / 3.0, t - 1)));

  const auto rows = martingale_rows(ocm, Model::OCM, {0, 1, 2}, dirac, 100000, 1618);
  for (const auto& row : rows) {
    if (row.quantity.rfind("lambda_l2", 0) != 0) continue;
    MESSAGE(row.quantity, " t=", row.t, " est=", row.estimate, " target=", row.target, " se=", row.std_error,
            " z=", row.z_score);
    if (row.quantity == "lambda_l2_exact") {
      // Exact second moment from the conditional-variance recursion.
      CHECK(std::abs(row.z_score) <= 3.0);
      // Consequence: the moment is at most gamma rho^(t-1) for t >= 1.
      if (row.t >= 1) CHECK(row.estimate <= gamma * std::pow(1.0 / 3.0, row.t - 1) + 3.0 * row.std_error);
    } else {
      // The bound gamma rho^t is exceeded by about the factor 2 (1 - d/n) / (d rho) = 1.88.
      CHECK_FALSE(row.pass);
      CHECK(row.estimate > row.target + 3.0 * row.std_error);
    }
  }

  // Model 1 with mixed degrees: the exact moment is matched as well.
  const auto mixed_rows = martingale_rows(mixed, Model::DCM, {0, 1, 2}, ProbVector::uniform(40), 100000, 2);
  for (const auto& row : mixed_rows)
    if (row.quantity == "lambda_l2_exact") CHECK(std::abs(row.z_score) <= 3.0);
}

TEST_CASE("variance summation identity") {
  Rng rng(6);
  for (const Model model : {Model::DCM, Model::OCM}) {
    const auto seq = random_sequence(80, 2, 6, model, rng);
    const auto bc = rho_and_C(seq, model);
    double sum = 0.0;
    for (int t = 0; t < 400; ++t) sum += bc.c * (1.0 - bc.rho) * std::pow(bc.rho, t);
    CHECK(sum == doctest::Approx(bc.c).epsilon(1e-12));
  }
  const auto regular = DegreeSequence::regular(10, 2, Model::DCM);
  CHECK(initial_variance(regular, Model::DCM) == doctest::Approx(0.0).scale(1.0));
  const auto seq = DegreeSequence::build({2, 4}, std::vector<int>{4, 2}, Model::DCM);
  CHECK(initial_variance(seq, Model::DCM) == doctest::Approx(2.0 / 36.0 * 20.0 - 1.0));
  CHECK(initial_variance(DegreeSequence::regular(10, 2, Model::OCM), Model::OCM) == 0.0);
}

TEST_CASE("M_infinity moments") {
  const auto regular = DegreeSequence::regular(100, 3, Model::DCM);
  const auto zero = m_infinity_moments(regular, Model::DCM, 13, 20, 1);
  CHECK(zero.variance == 0.0);
  CHECK(zero.mean == 1.0);
  CHECK(zero.target_variance == doctest::Approx(0.0).scale(1.0));
  CHECK_THROWS_AS(m_infinity_moments(regular, Model::DCM, 12, 20, 1), Error);

  const auto seq = DegreeSequence::regular(1000, 3, Model::OCM);
  const auto r = m_infinity_moments(seq, Model::OCM, 13, 100, 2, OffspringSampling::Thinned);
  MESSAGE("mean=", r.mean, "+-", r.mean_se, " var=", r.variance, "+-", r.variance_se, " target=", r.target_variance);
  CHECK(r.target_variance == doctest::Approx(0.4985).epsilon(1e-4));
  CHECK(std::abs(r.mean - 1.0) <= 3.0 * r.mean_se);
  CHECK(std::abs(r.variance - r.target_variance) <= 3.0 * r.variance_se);
}

TEST_CASE("Monte Carlo CSV layout") {
  const auto rows = martingale_rows(DegreeSequence::regular(100, 3, Model::DCM), Model::DCM, {1}, std::nullopt, 10, 7);
  std::ostringstream out;
  write_monte_carlo_csv(out, rows);
  CHECK(out.str() ==
        "quantity,t,estimate,std_error,target,z_score,samples,seed\n"
        "M_mean,1,1,0,1,0,10,7\n"
        "Delta_mean,1,0,0,0,0,10,7\n"
        "Delta_sq,1,0,0,0,0,10,7\n");
}

TEST_CASE("explore_in_neighborhood examples") {
  const auto g = complete3();
  const auto root = explore_in_neighborhood(g, 1, 0);
  CHECK(root.layers.size() == 1);
  CHECK(root.layers[0] == std::vector<Vertex>{1});
  CHECK(root.is_tree);
  CHECK(root.size == 1);
  CHECK(root.edges.empty());

  const auto cycle = Digraph::from_adjacency({{1}, {0}});
  CHECK_FALSE(explore_in_neighborhood(cycle, 0, 2).is_tree);
  CHECK(explore_in_neighborhood(cycle, 0, 1).is_tree);

  const auto loop = Digraph::from_adjacency({{0, 1}, {0}});
  CHECK_FALSE(explore_in_neighborhood(loop, 0, 1).is_tree);
  CHECK_THROWS_AS(explore_in_neighborhood(g, 5, 1), Error);
}

TEST_CASE("explore_in_neighborhood matches backward walk enumeration") {
  Rng rng(555);
  for (int r = 0; r < 100; ++r) {
    const Index n = 5 + static_cast<Index>(rng.below(96));
    const Model model = r % 2 ? Model::OCM : Model::DCM;
    const auto g = sample_graph(random_sequence(n, 2, 3, model, rng), rng.next());
    for (int t = 0; t <= 4; ++t) check_in_neighborhood(g, static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(n))), t);
  }
  const auto big = sample_dcm(DegreeSequence::regular(10000, 2, Model::DCM), 10);
  for (Vertex v = 0; v < 200; ++v) check_in_neighborhood(big, v * 37, 6);
}

TEST_CASE("coupling agreement") {
  const auto dcm = DegreeSequence::regular(100000, 3, Model::DCM);
  CHECK(coupling_bound(dcm, Model::DCM, 2) == doctest::Approx(2187.0 / 300000.0));
  const auto r = coupling_agreement(dcm, 2, 5, 2000, 8);
  MESSAGE("fraction=", r.fraction, " bound=", r.bound, " ci=", r.ci_upper);
  CHECK(r.trials == 10000);
  CHECK(r.pass);
  CHECK(r.fraction <= r.ci_upper);

  const auto zero = coupling_agreement(dcm, 0, 2, 100, 8);
  CHECK(zero.fraction == 0.0);
  CHECK(zero.failures == 0);

  const auto ocm = DegreeSequence::regular(100000, 3, Model::OCM);
  CHECK(code_of([&] { coupling_agreement(ocm, 2, 1, 10, 1); }) == ErrorCode::BoundVacuous);
  CHECK(code_of([&] { coupling_agreement(ocm, 1, 1, 10, 1); }) == ErrorCode::BoundVacuous);
  const auto ocm0 = coupling_agreement(ocm, 0, 2, 100, 3);
  CHECK(ocm0.fraction == 0.0);
  CHECK(ocm0.pass);
}
