// End-to-end acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance <path-to-pagemix-cli>
//
// Exit status is the number of failed criteria.

#include "helpers.hpp"
#include "oracles.hpp"

#include "pagemix/branching_martingale.hpp"
#include "pagemix/experiment_cli.hpp"
#include "pagemix/neighborhood_explorer.hpp"
#include "pagemix/walk_engine.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

using namespace pagemix;
using namespace testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;
  double seconds = 0.0;
};

std::map<int, Outcome> outcomes;

// Criterion 3 is a property of every profile and mixing time computed in the run.
struct UniversalBounds {
  std::int64_t profiles = 0;
  std::int64_t mixing_checks = 0;
  std::int64_t violations = 0;
  std::string first_violation;

  void mixing(int measured, double alpha, double eps, const std::string& where) {
    ++mixing_checks;
    const int bound = static_cast<int>(std::ceil(std::log(1.0 / eps) / alpha));
    if (measured > bound) violation(where + ": T(" + num(eps) + ") = " + std::to_string(measured) + " > " +
                                    std::to_string(bound));
  }
  void violation(const std::string& what) {
    if (violations++ == 0) first_violation = what;
  }
} universal;

template <typename Fn>
void run(int id, const char* name, Fn&& fn) {
  std::cerr << "[" << id << "] " << name << " ..." << std::endl;
  const auto start = Clock::now();
  Outcome out;
  try {
    out = fn();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("error: ") + e.what();
    if (const auto* err = dynamic_cast<const Error*>(&e); err && err->code() == ErrorCode::BoundViolation) {
      universal.violation(e.what());
    }
  }
  out.seconds = since(start);
  std::cerr << "    " << (out.pass ? "ok" : "failed") << " in " << num(out.seconds) << " s" << std::endl;
  outcomes[id] = out;
}

// Mixing times of a max-over-starts profile, fed to the universal bound.
void record_profile(const DistanceProfile& p, double alpha, const std::string& where) {
  ++universal.profiles;
  if (alpha <= 0.0) return;
  for (const double eps : {0.25, 0.5, 0.75}) {
    try {
      universal.mixing(mixing_time(p, eps), alpha, eps, where);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::HorizonTooShort) throw;
    }
  }
}

struct SmallInstance {
  Digraph g;
  WalkParams params;
  Vertex x = 0;
};

std::vector<SmallInstance> small_instances() {
  Rng rng(20240101);
  std::vector<SmallInstance> out;
  for (int r = 0; r < 50; ++r) {
    const Model model = r % 2 == 0 ? Model::DCM : Model::OCM;
    auto g = sample_graph(random_sequence(200, 2, 5, model, rng), rng.next());
    const double alpha = 0.01 + 0.89 * rng.uniform();
    ProbVector lambda;
    std::string label;
    switch (r % 3) {
      case 0: lambda = ProbVector::uniform(200); label = "uniform"; break;
      case 1: {
        const auto z = static_cast<Vertex>(rng.below(200));
        lambda = ProbVector::dirac(200, z);
        label = "dirac(" + std::to_string(z) + ")";
        break;
      }
      default: lambda = ProbVector::normalized(random_distribution(200, rng)); label = "random"; break;
    }
    const auto x = static_cast<Vertex>(rng.below(200));
    out.push_back({std::move(g), WalkParams(alpha, std::move(lambda), label), x});
  }
  return out;
}

Outcome criterion_1(const std::vector<SmallInstance>& instances) {
  const auto start = Clock::now();
  double worst = 0.0;
  for (const auto& inst : instances) {
    const TransitionKernel k(inst.g);
    const auto pi = stationary_pagerank(k, inst.params).distribution;
    for (const double r : teleport_identity_residuals(k, inst.params, pi, inst.x, 50)) worst = std::max(worst, r);
  }
  const double secs = since(start);
  return {worst <= 1e-10 && secs < 10.0,
          "max residual " + num(worst) + " over 50 instances, t <= 50 (" + num(secs) + " s, limit 10 s)"};
}

Outcome criterion_2(const std::vector<SmallInstance>& instances) {
  const auto start = Clock::now();
  double worst_dense = 0.0;
  double worst_fixed = 0.0;
  double worst_gap_excess = -1.0;
  for (const auto& inst : instances) {
    const TransitionKernel k(inst.g);
    const auto pr = stationary_pagerank(k, inst.params);
    const Eigen::VectorXd dense = dense_pagerank(dense_kernel(inst.g), inst.params.alpha, inst.params.lambda.values());
    worst_dense = std::max(worst_dense, tv(pr.distribution.values(), dense));

    const auto pi0 = stationary_srw(k);
    const auto fixed = stationary_pagerank(k, WalkParams(inst.params.alpha, pi0, "pi0")).distribution;
    worst_fixed = std::max(worst_fixed, tv(fixed, pi0));

    const int K = stationary_pagerank(k, inst.params, 1e-6).truncation;
    const double gap = tv(pagerank_series(k, inst.params, K), pagerank_series(k, inst.params, 2 * K));
    worst_gap_excess = std::max(worst_gap_excess, gap - std::pow(1.0 - inst.params.alpha, K + 1));
  }
  const double secs = since(start);
  const bool pass = worst_dense <= 1e-10 && worst_fixed <= 1e-9 && worst_gap_excess <= 0.0 && secs < 10.0;
  return {pass, "dense TV " + num(worst_dense) + ", |pi_{a,pi0} - pi0| " + num(worst_fixed) +
                    ", doubling gap - (1-a)^(K+1) <= " + num(worst_gap_excess) + " (" + num(secs) + " s, limit 10 s)"};
}

// Exact profiles over all 200 starts of each small instance, up to the
// mixing-time bound at eps = 0.25.
void small_profiles(const std::vector<SmallInstance>& instances) {
  std::vector<Vertex> starts(200);
  for (Vertex i = 0; i < 200; ++i) starts[static_cast<std::size_t>(i)] = i;
  for (std::size_t r = 0; r < instances.size(); ++r) {
    const auto& inst = instances[r];
    const TransitionKernel k(inst.g);
    const auto pi = stationary_pagerank(k, inst.params).distribution;
    const int horizon = static_cast<int>(std::ceil(std::log(4.0) / inst.params.alpha));
    std::vector<int> times(static_cast<std::size_t>(horizon) + 1);
    for (int t = 0; t <= horizon; ++t) times[static_cast<std::size_t>(t)] = t;
    record_profile(distance_profile(k, pi, inst.params, starts, times), inst.params.alpha,
                   "small instance " + std::to_string(r));
  }
}

ScenarioSpec big_spec(Index n, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.model = Model::DCM;
  spec.n = n;
  spec.seed = seed;
  spec.degrees.type = "regular";
  spec.degrees.d = 3;
  spec.start_sample = 20;
  return spec;
}

void record_scenario(const ScenarioResult& result, const std::string& where) {
  ++universal.profiles;
  for (const auto& c : result.checks) {
    if (c.name.rfind("mixing_time_bound", 0) == 0) {
      ++universal.mixing_checks;
      if (!c.pass) universal.violation(where + ": " + c.name + " [" + c.lambda_label + "] = " + num(c.value));
    }
  }
}

int failed_criteria() {
  int failed = 0;
  for (const auto& [id, o] : outcomes) failed += o.pass ? 0 : 1;
  return failed;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <pagemix-cli>\n";
    return 64;
  }
  const std::string cli = argv[1];
  const auto total = Clock::now();

  // n = 1e6: cutoff, scenario 2 and scenario 3 on one graph.
  {
    const auto spec = big_spec(1000000, 1001);
    std::cerr << "sampling the n = 1e6 graph" << std::endl;
    const Digraph g = build_graph(spec);
    const double t_ent = entropic_time(g).t_ent;
    const auto starts = sample_starts(spec, g.n());

    run(4, "cutoff", [&] {
      const auto start = Clock::now();
      const TransitionKernel k(g);
      const ProbVector pi0 = stationary_srw(k);
      const int early = static_cast<int>(std::ceil(0.6 * t_ent));
      const int late = static_cast<int>(std::ceil(1.8 * t_ent));
      const std::vector<int> times{early, late};
      const auto p = distance_profile(k, pi0, std::nullopt, starts, times);
      record_profile(p, 0.0, "cutoff");
      const double secs = since(start);
      return Outcome{p.values[0] >= 0.6 && p.values[1] <= 0.25 && secs < 120.0,
                     "T_ent " + num(t_ent) + ", D(" + std::to_string(early) + ") = " + num(p.values[0]) +
                         " >= 0.6, D(" + std::to_string(late) + ") = " + num(p.values[1]) + " <= 0.25 (" +
                         num(secs) + " s, limit 120 s)"};
    });

    run(5, "scenario 2, gamma = 1", [&] {
      auto s = spec;
      s.scenario = ScenarioKind::GammaFinite;
      s.gamma = 1.0;
      s.alpha_rule.type = "gamma";
      s.s_grid = {0.2, 0.4, 0.6, 0.8, 1.4, 1.6, 1.8, 2.0};
      s.lambda_set = {"uniform", "dirac_sample(1)", "mu_in"};
      const auto result = run_scenario(s, g);
      record_scenario(result, "scenario 2");
      return Outcome{result.max_deviation <= 0.15 && result.runtime_seconds < 300.0,
                     "max |D(s/a) - e^-s theta(s)| off |s-1| <= 0.25: " + num(result.max_deviation) +
                         " <= 0.15 (" + num(result.runtime_seconds) + " s, limit 300 s)"};
    });

    run(6, "scenario 3 pre-limit", [&] {
      auto s = spec;
      s.scenario = ScenarioKind::GammaInfinite;
      s.alpha_rule.value = 0.3;
      s.lambda_set = {"uniform", "dirac_sample(1)", "mu_in"};
      for (int t = 1; t < 0.8 * t_ent; ++t) s.s_grid.push_back(0.3 * t);
      const auto result = run_scenario(s, g);
      record_scenario(result, "scenario 3");
      return Outcome{result.reference_is_prelimit && result.max_deviation <= 0.05,
                     "max |D(t) - 0.7^t| for t <= " + std::to_string(result.rows.back().t) + ": " +
                         num(result.max_deviation) + " <= 0.05"};
    });
  }

  run(7, "singularity", [&] {
    auto spec = big_spec(500000, 1002);
    spec.scenario = ScenarioKind::GammaFinite;
    spec.gamma = 1.0;
    spec.alpha_rule.type = "gamma";
    spec.lambda_set = {"uniform", "mu_in", "dirac_sample(10)"};
    spec.singularity.t_ent_fractions = {0.5};
    const auto result = run_singularity(spec, build_graph(spec));
    const int t = result.report.rows.empty() ? 0 : result.report.rows.front().t;
    return Outcome{result.report.min_value >= 0.9 && result.report.rows.size() == 20 * 12,
                   "min ||P^t(x,.) - pi_{a,l} P^t|| at t = " + std::to_string(t) + " over " +
                       std::to_string(result.report.rows.size()) + " pairs: " + num(result.report.min_value) +
                       " >= 0.9"};
  });

  run(8, "martingale laws", [&] {
    const auto start = Clock::now();
    const auto seq = DegreeSequence::regular(1000, 3, Model::OCM);
    const auto bc = rho_and_C(seq, Model::OCM);
    const auto rows = martingale_rows(seq, Model::OCM, {0, 1, 2, 3}, ProbVector::dirac(1000, 0), 100000, 8080,
                                      OffspringSampling::Thinned);
    bool variance_ok = std::abs(bc.rho - 1.0 / 3.0) < 1e-15 && std::abs(bc.c - 0.4985) < 5e-5;
    bool stated_ok = true;
    std::string variance_z;
    std::string stated;
    std::string exact;
    for (const auto& r : rows) {
      if (r.quantity == "Delta_sq") {
        variance_ok = variance_ok && std::abs(r.z_score) <= 3.0;
        variance_z += (variance_z.empty() ? "" : ",") + num(r.z_score);
      }
      if (r.quantity == "lambda_l2") {
        stated_ok = stated_ok && r.pass;
        stated += (stated.empty() ? "" : "; ") + std::string("t=") + std::to_string(r.t) + " " + num(r.estimate) +
                  "+-" + num(r.std_error) + " vs " + num(r.target);
      }
      if (r.quantity == "lambda_l2_exact") exact += (exact.empty() ? "" : ",") + num(r.z_score);
    }
    const auto regular = DegreeSequence::regular(1000, 3, Model::DCM);
    bool zero_ok = true;
    for (const auto& r : martingale_rows(regular, Model::DCM, {0, 1, 2, 3}, std::nullopt, 10000, 8081)) {
      if (r.quantity == "Delta_sq" || r.quantity == "Delta_mean") zero_ok = zero_ok && r.estimate == 0.0 && r.pass;
    }
    const double secs = since(start);
    return Outcome{variance_ok && stated_ok && zero_ok && secs < 120.0,
                   "C = " + num(bc.c) + ", E[Delta_t^2] z = " + variance_z + (variance_ok ? " ok" : " FAILED") +
                       "; E[(M_t - nX_t(delta))^2] <= gamma rho^t + 3SE: " + (stated_ok ? "ok" : "FAILED") + " [" +
                       stated + "]; against C(l) rho^(t-1) z = " + exact + "; regular model 1 exact zero: " +
                       (zero_ok ? "ok" : "FAILED") + " (" + num(secs) + " s, limit 120 s)"};
  });

  run(9, "exploration oracles", [&] {
    Rng rng(909);
    const double eta = 0.3;
    std::int64_t explorations = 0;
    std::int64_t mismatches = 0;
    std::int64_t kappa_checked = 0;
    std::int64_t kappa_over = 0;
    for (int r = 0; r < 100; ++r) {
      const Model model = r % 2 == 0 ? Model::DCM : Model::OCM;
      const Index n = 10 + static_cast<Index>(rng.below(91));
      const Digraph g = sample_graph(random_sequence(n, 2, 4, model, rng), rng.next());
      const int horizon = static_cast<int>(std::floor((1.0 - eta) * entropic_time(g).t_ent));
      for (int t = 0; t <= std::max(horizon, 1); ++t) {
        const auto z = static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(n)));
        const auto tree = explore_out_tree(g, z, t, eta);
        const auto oracle = brute_force_tree(g, z, t, eta);
        bool same = tree.nodes.size() == oracle.nodes.size() && tree.kappa == oracle.kappa &&
                    tree.duplicates == oracle.duplicates;
        for (std::size_t i = 0; same && i < tree.nodes.size(); ++i) {
          const auto& a = tree.nodes[i];
          const auto& b = oracle.nodes[i];
          same = a.mark == b.mark && a.parent == b.parent && a.height == b.height && a.tail == b.tail && a.den == b.den;
        }
        mismatches += same ? 0 : 1;
        if (t <= horizon) {
          ++kappa_checked;
          kappa_over += static_cast<double>(tree.kappa) <= tree.kappa_bound() ? 0 : 1;
        }
        ++explorations;

        const auto nb = explore_in_neighborhood(g, z, t);
        std::map<Vertex, int> first;
        std::int64_t walks = 0;
        backward_walks(g, z, t, 0, first, walks);
        std::map<Vertex, int> got;
        for (std::size_t k = 0; k < nb.layers.size(); ++k)
          for (const Vertex u : nb.layers[k]) got.emplace(u, static_cast<int>(k));
        std::multiset<std::pair<Vertex, Vertex>> expect;
        for (const auto& [u, depth] : first)
          if (depth < t)
            for (const Vertex s : g.in_neighbors(u)) expect.emplace(s, u);
        const bool in_same = got == first && nb.size == first.size() &&
                             nb.is_tree == (walks == static_cast<std::int64_t>(first.size())) &&
                             std::multiset<std::pair<Vertex, Vertex>>(nb.edges.begin(), nb.edges.end()) == expect;
        mismatches += in_same ? 0 : 1;
        ++explorations;
      }
    }
    return Outcome{mismatches == 0 && kappa_over == 0,
                   std::to_string(explorations) + " explorations on 100 graphs, " + std::to_string(mismatches) +
                       " mismatches; kappa <= n^(1-eta^2/2) on " + std::to_string(kappa_checked - kappa_over) + "/" +
                       std::to_string(kappa_checked) + " out-trees with t <= (1-eta) T_ent"};
  });

  {
    const auto spec = big_spec(100000, 1003);
    const Digraph g = build_graph(spec);
    const double t_ent = entropic_time(g).t_ent;

    run(10, "path-annulus intersections", [&] {
      const double eta = 0.3;
      const int u = static_cast<int>(std::floor((1.0 - eta) * t_ent));
      const int t = u / 2;
      Rng rng(1010);
      std::int64_t worst = 0;
      int bound = 0;
      for (int i = 0; i < 100; ++i) {
        const auto x = static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(g.n())));
        const auto z = static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(g.n())));
        const auto report = path_annulus_intersections(g, x, z, t, u, eta);
        worst = std::max<std::int64_t>(worst, report.max_count);
        bound = static_cast<int>(std::ceil(report.k_bound));
      }
      const int expected = static_cast<int>(std::ceil((9.0 + 3.0 * std::log2(3.0)) / (eta * eta)));
      return Outcome{worst <= expected && bound == expected,
                     "u = " + std::to_string(u) + ", t = " + std::to_string(t) + ", max intersection " +
                         std::to_string(worst) + " <= " + std::to_string(expected)};
    });

    run(11, "widespread mixing", [&] {
      const WalkParams uniform(0.0, ProbVector::uniform(g.n()), "uniform");
      const int t = static_cast<int>(std::ceil(t_ent));
      const auto result = run_widespread(g, uniform, {t}, {1.0 / t_ent, 0.3}, 0.5, widespread_report(uniform.lambda));
      double worst = 0.0;
      std::string parts;
      for (const auto& r : result.rows) {
        if (r.quantity == "proxy_gap") continue;
        worst = std::max(worst, r.value);
        parts += (parts.empty() ? "" : ", ") + r.quantity + (r.quantity == "lambda_pt" ? "(t=" + std::to_string(r.t) : "(a=" + num(r.alpha)) +
                 ") " + num(r.value);
      }
      return Outcome{worst <= 0.05, parts + " <= 0.05"};
    });
  }

  run(12, "CLI determinism", [&] {
    const fs::path dir = fs::temp_directory_path() / ("pagemix_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    {
      std::ofstream cfg(dir / "run.json");
      cfg << R"J({
  "model": "DCM", "n": 3000, "seed": 12,
  "degrees": {"type": "uniform", "min": 2, "max": 5},
  "scenario": {"kind": "gamma_finite", "gamma": 1.0},
  "alpha_rule": {"type": "gamma"},
  "s_grid": [0.2, 0.6, 1.4, 2.0],
  "start_sample": 6,
  "lambda_set": ["uniform", "mu_in", "dirac_sample(2)"],
  "widespread": {"lambda": "uniform", "t_ent_multiples": [0.5, 1.0], "alphas": [0.3]},
  "singularity": {"t_ent_fractions": [0.5]},
  "tree": {"root": 7, "t": 4, "eta": 0.2},
  "martingale": [{"model": "OCM", "n": 300, "degrees": {"type": "regular", "d": 3},
                  "times": [0, 1, 2], "samples": 5000, "lambda": "dirac(0)", "sampling": "thinned"}]
})J";
    }
    const char* commands[] = {"generate", "profile", "scenario", "widespread", "singularity", "martingale", "tree"};
    int files = 0;
    std::string differing;
    for (const char* command : commands) {
      std::vector<fs::path> outs;
      for (const int threads : {1, 1, 3}) {
        const fs::path out = dir / (std::string(command) + "_" + std::to_string(outs.size()));
        const std::string line = "\"" + cli + "\" " + command + " --config \"" + (dir / "run.json").string() +
                                 "\" --out \"" + out.string() + "\" --threads " + std::to_string(threads) +
                                 " > /dev/null 2>&1";
        const int status = std::system(line.c_str());
        if (status != 0 && !(std::string(command) == "scenario" && WEXITSTATUS(status) == 3)) {
          throw std::runtime_error(std::string(command) + " exited with status " + std::to_string(status));
        }
        outs.push_back(out);
      }
      for (const auto& entry : fs::directory_iterator(outs[0])) {
        const auto name = entry.path().filename();
        if (name == "manifest.json") continue;
        ++files;
        const auto reference = read_file(entry.path());
        for (std::size_t i = 1; i < outs.size(); ++i) {
          if (read_file(outs[i] / name) != reference) differing += " " + std::string(command) + "/" + name.string();
        }
      }
    }
    fs::remove_all(dir);
    return Outcome{differing.empty() && files >= 10,
                   std::to_string(files) + " output files from 7 commands, byte-identical over 3 runs (threads 1, 1, 3)" +
                       (differing.empty() ? "" : "; differing:" + differing)};
  });

  const auto instances = small_instances();
  run(1, "teleport identity", [&] { return criterion_1(instances); });
  run(2, "stationary correctness", [&] { return criterion_2(instances); });
  run(3, "universal bounds", [&] {
    small_profiles(instances);
    return Outcome{universal.violations == 0,
                   std::to_string(universal.profiles) + " profiles (hard-asserted D(t) <= (1-a)^t), " +
                       std::to_string(universal.mixing_checks) + " mixing times within ceil(log(1/eps)/a)" +
                       (universal.violations ? "; first violation: " + universal.first_violation : "")};
  });

  const char* names[] = {"",
                         "teleport identity",
                         "stationary correctness",
                         "universal bounds",
                         "cutoff trend",
                         "scenario 2 profile",
                         "scenario 3 pre-limit",
                         "singularity",
                         "martingale laws",
                         "exploration oracles",
                         "path-annulus intersections",
                         "widespread mixing",
                         "CLI determinism"};
  for (const auto& [id, o] : outcomes) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << "  " << names[id] << ": " << o.detail << '\n';
  }
  const int failed = failed_criteria();
  std::cout << (12 - failed) << "/12 criteria pass (" << num(since(total)) << " s)\n";
  return failed;
}
