// pagemix: command-line driver for the PageRank mixing experiments.
//
//   pagemix <command> --config run.json [--seed S] [--out DIR] [--threads K] [--graph FILE]
//
// Every command writes its CSV files and a manifest.json into DIR.

#include "pagemix/experiment_cli.hpp"
#include "pagemix/neighborhood_explorer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace pagemix;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  unsigned threads = 1;
  std::string graph;
};

class Run {
 public:
  Run(const Options& opt, std::string command) : opt_(opt), command_(std::move(command)) {
    set_thread_count(opt.threads);
    spec_ = opt.config.empty() ? ScenarioSpec{} : load_scenario_spec(opt.config);
    if (opt.seed) spec_.seed = *opt.seed;
    validate(spec_);
    fs::create_directories(opt.out);
  }

  const ScenarioSpec& spec() const { return spec_; }

  const Digraph& graph() {
    if (!graph_) {
      if (opt_.graph.empty()) {
        graph_ = build_graph(spec_);
      } else {
        std::ifstream in(opt_.graph);
        if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open graph " + opt_.graph);
        graph_ = read_graph(in);
        if (graph_->n() != spec_.n) throw Error(ErrorCode::ConfigInvalid, "graph file does not match n");
      }
    }
    return *graph_;
  }

  /// Writes `body` to DIR/name, opened by the provenance line.
  template <typename Writer>
  void write(const std::string& name, Writer&& body, const std::string& extra = "") {
    std::ofstream file(fs::path(opt_.out) / name, std::ios::binary);
    if (!file) throw Error(ErrorCode::InvalidArgument, "cannot write " + name);
    file << provenance_line(command_, spec_, extra) << '\n';
    body(file);
    manifest_.outputs.push_back(name);
  }

  void summary(const std::string& key, const std::string& value) { manifest_.summary.emplace_back(key, value); }

  void finish() {
    manifest_.command = command_;
    manifest_.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream file(fs::path(opt_.out) / "manifest.json", std::ios::binary);
    write_manifest(file, spec_, manifest_);
  }

 private:
  Options opt_;
  std::string command_;
  ScenarioSpec spec_;
  std::optional<Digraph> graph_;
  Manifest manifest_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int cmd_generate(const Options& opt) {
  Run run(opt, "generate");
  const auto seq = build_sequence(run.spec());
  run.write("degrees.txt", [&](std::ostream& out) { write_degree_sequence(out, seq); });
  const auto& g = run.graph();
  run.write("graph.txt", [&](std::ostream& out) { write_graph(out, g); });
  const auto simple = inspect_simple(g);
  run.summary("n", std::to_string(g.n()));
  run.summary("m", std::to_string(g.m()));
  run.summary("self_loops", std::to_string(simple.self_loops));
  run.summary("multi_edge_pairs", std::to_string(simple.multi_edge_pairs));
  run.summary("t_ent", format_double(entropic_time(g).t_ent));
  run.finish();
  return 0;
}

int cmd_profile(const Options& opt) {
  Run run(opt, "profile");
  const auto& spec = run.spec();
  const auto& g = run.graph();
  const double t_ent = entropic_time(g).t_ent;
  const double alpha = derive_alpha(spec, t_ent);
  const auto starts = sample_starts(spec, g.n());
  const int t_max = spec.profile.t_max > 0 ? spec.profile.t_max : static_cast<int>(std::ceil(2.0 * t_ent));
  std::vector<int> times(static_cast<std::size_t>(t_max) + 1);
  for (int t = 0; t <= t_max; ++t) times[static_cast<std::size_t>(t)] = t;

  std::optional<WalkParams> params;
  if (alpha > 0.0) params = resolve_lambdas({spec.profile.lambda}, g, alpha, starts, RunSeeds(spec.seed).lambdas).front();
  auto profile = distance_profile(g, params, starts, times);
  profile.context.t_ent = t_ent;
  profile.context.seed = spec.seed;
  run.write("profile.csv", [&](std::ostream& out) { write_profile_csv(out, profile); });
  run.summary("alpha", format_double(alpha));
  run.summary("t_ent", format_double(t_ent));
  for (const double eps : {0.25, 0.5, 0.75}) {
    std::string value = "beyond_horizon";
    try {
      value = std::to_string(mixing_time(profile, eps));
    } catch (const Error&) {
    }
    run.summary("mixing_time_eps_" + format_double(eps), value);
  }
  run.finish();
  return 0;
}

int cmd_scenario(const Options& opt) {
  Run run(opt, "scenario");
  const auto result = run_scenario(run.spec(), run.graph());
  run.write("scenario.csv", [&](std::ostream& out) { write_scenario_csv(out, result); },
            "alpha=" + format_double(result.alpha) + " t_ent=" + format_double(result.t_ent));
  run.write("checks.csv", [&](std::ostream& out) { write_checks_csv(out, result.checks); });
  run.summary("alpha", format_double(result.alpha));
  run.summary("t_ent", format_double(result.t_ent));
  run.summary("max_deviation", format_double(result.max_deviation));
  run.summary("reference", result.reference_is_prelimit ? "prelimit" : "limit");
  run.summary("checks_pass", result.all_checks_pass() ? "true" : "false");
  run.finish();
  std::cout << "max deviation off the jump window: " << format_double(result.max_deviation) << '\n';
  for (const auto& c : result.checks) {
    if (!c.pass) std::cerr << "check failed: " << c.name << " [" << c.lambda_label << "] = " << c.value << '\n';
  }
  return result.all_checks_pass() ? 0 : 3;
}

int cmd_widespread(const Options& opt) {
  Run run(opt, "widespread");
  const auto result = run_widespread(run.spec(), run.graph());
  run.write("widespread.csv", [&](std::ostream& out) { write_widespread_csv(out, result); });
  run.summary("pass_i", result.report.pass_i ? "true" : "false");
  run.summary("pass_ii", result.report.pass_ii ? "true" : "false");
  run.finish();
  return 0;
}

int cmd_singularity(const Options& opt) {
  Run run(opt, "singularity");
  const auto result = run_singularity(run.spec(), run.graph());
  run.write("singularity.csv", [&](std::ostream& out) { write_singularity_csv(out, result.report); },
            "alpha=" + format_double(result.alpha) + " t_ent=" + format_double(result.t_ent));
  run.write("contrast.csv", [&](std::ostream& out) { write_contrast_csv(out, result.contrast); });
  run.summary("alpha", format_double(result.alpha));
  run.summary("min_tv", format_double(result.report.min_value));
  run.finish();
  std::cout << "min singularity distance: " << format_double(result.report.min_value) << '\n';
  return 0;
}

int cmd_martingale(const Options& opt) {
  Run run(opt, "martingale");
  const auto rows = run_martingale_suite(run.spec());
  run.write("martingale.csv", [&](std::ostream& out) { write_martingale_suite_csv(out, rows); });
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.row.pass ? 0 : 1;
  run.summary("rows", std::to_string(rows.size()));
  run.summary("failed_rows", std::to_string(failed));
  run.finish();
  std::cout << rows.size() - failed << " of " << rows.size() << " rows pass\n";
  return 0;
}

int cmd_tree(const Options& opt) {
  Run run(opt, "tree");
  const auto& spec = run.spec();
  const auto tree = explore_out_tree(run.graph(), spec.tree.root, spec.tree.t, spec.tree.eta);
  run.write("tree.txt", [&](std::ostream& out) { write_tree(out, tree); });
  run.summary("nodes", std::to_string(tree.nodes.size()));
  run.summary("kappa", std::to_string(tree.kappa));
  run.summary("kappa_bound", format_double(tree.kappa_bound()));
  run.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PageRank mixing experiments on random digraphs"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", opt.seed, "Override the configured seed");
  app.add_option("--out", opt.out, "Output directory");
  app.add_option("--threads", opt.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--graph", opt.graph, "Use a graph written by 'generate' instead of sampling")
      ->check(CLI::ExistingFile);

  int status = 0;
  const std::pair<const char*, int (*)(const Options&)> commands[] = {
      {"generate", cmd_generate},       {"profile", cmd_profile},       {"scenario", cmd_scenario},
      {"widespread", cmd_widespread},   {"singularity", cmd_singularity}, {"martingale", cmd_martingale},
      {"tree", cmd_tree},
  };
  const char* help[] = {"Sample the graph and write it with its degree sequence",
                        "Exact distance profile over the sampled starts",
                        "Trichotomy sweep over s_grid against the limit profile",
                        "Widespread-measure mixing distances",
                        "Singularity sweep and stationary contrast",
                        "Branching martingale Monte Carlo suite",
                        "Out-tree exploration from tree.root"};
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    const auto [name, fn] = commands[i];
    app.add_subcommand(name, help[i])->callback([&status, &opt, fn = fn] { status = fn(opt); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  return status;
}
