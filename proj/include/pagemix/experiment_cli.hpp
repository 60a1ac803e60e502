#pragma once

#include "pagemix/branching_martingale.hpp"
#include "pagemix/common.hpp"
#include "pagemix/degree_model.hpp"
#include "pagemix/graph_gen.hpp"
#include "pagemix/neighborhood_explorer.hpp"
#include "pagemix/walk_engine.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pagemix {

enum class ScenarioKind { GammaZero, GammaFinite, GammaInfinite };

std::string_view to_string(ScenarioKind kind);

/// Where the degree sequence comes from.
///   regular: d+ = d- = d
///   uniform: d+ iid uniform on [min, max]; for DCM d- is a shuffled copy of d+
///   file:    read_degree_sequence format
struct DegreeSource {
  std::string type = "regular";
  int d = 3;
  int min = 2;
  int max = 5;
  std::string path;
};

/// alpha = value (explicit), gamma / T_ent (gamma), or
/// c * T_ent^(-power) * (log T_ent)^(log_power) (schedule).
struct AlphaRule {
  std::string type = "explicit";
  double value = 0.0;
  double c = 1.0;
  double power = 1.0;
  double log_power = 0.0;
};

struct WidespreadSpec {
  std::string lambda = "uniform";
  std::vector<double> t_ent_multiples{1.0};  ///< t = ceil(multiple * T_ent)
  std::vector<double> alphas;                ///< explicit alphas for pi_{alpha,lambda}
  bool alpha_inverse_t_ent = true;           ///< also alpha = 1/T_ent
  double epsilon = 0.5;                      ///< proxy horizon h = ceil(epsilon * T_ent)
  double delta = 0.1;
  double c1 = 1.0;
  double c2 = 4.0;
};

struct SingularitySpec {
  std::vector<double> t_ent_fractions{0.5};  ///< t = ceil(fraction * T_ent)
  double tol = 1e-10;
};

struct ProfileSpec {
  std::string lambda = "uniform";
  int t_max = 0;  ///< 0: ceil(2 T_ent)
};

struct TreeSpec {
  Vertex root = 0;
  int t = 4;
  double eta = 0.1;
};

struct MartingaleCheck {
  Model model = Model::OCM;
  DegreeSource degrees;
  Index n = 1000;
  std::vector<int> times{0, 1, 2, 3};
  std::int64_t samples = 100000;
  std::string lambda;  ///< empty: no lambda rows
  OffspringSampling sampling = OffspringSampling::PerMark;
};

/// Validated experiment configuration. Every field has a JSON key of the same
/// name; see README for the layout.
struct ScenarioSpec {
  Model model = Model::DCM;
  DegreeSource degrees;
  Index n = 1000;
  std::uint64_t seed = 1;
  ScenarioKind scenario = ScenarioKind::GammaZero;
  double gamma = 0.0;
  AlphaRule alpha_rule;
  std::vector<double> s_grid;
  std::optional<Index> start_sample;  ///< nullopt: all vertices
  std::vector<std::string> lambda_set{"uniform"};

  WidespreadSpec widespread;
  SingularitySpec singularity;
  ProfileSpec profile;
  TreeSpec tree;
  std::vector<MartingaleCheck> martingale;

  /// Canonical JSON text of the effective configuration (keys sorted).
  std::string canonical_json() const;
  std::uint64_t config_hash() const;
};

inline constexpr double kJumpExclusion = 0.05;
inline constexpr double kJumpWindow = 0.25;

/// Parses and validates a JSON config; throws ConfigInvalid (ParseError for malformed JSON).
ScenarioSpec parse_scenario_spec(const std::string& json_text);
ScenarioSpec load_scenario_spec(const std::string& path);
void validate(const ScenarioSpec& spec);

/// Independent substreams of spec.seed used by every run.
struct RunSeeds {
  std::uint64_t graph = 0;
  std::uint64_t starts = 0;
  std::uint64_t lambdas = 0;
  std::uint64_t degrees = 0;
  std::uint64_t martingale = 0;

  explicit RunSeeds(std::uint64_t seed);
};

DegreeSequence build_sequence(const DegreeSource& source, Model model, Index n, std::uint64_t seed);
DegreeSequence build_sequence(const ScenarioSpec& spec);
Digraph build_graph(const ScenarioSpec& spec);

/// Start vertices: all of [n], or a uniform sample without replacement, ascending.
std::vector<Vertex> sample_starts(const ScenarioSpec& spec, Index n);

/// alpha after applying the rule to T_ent.
double derive_alpha(const ScenarioSpec& spec, double t_ent);

/// Round half up.
int round_time(double value);

/// Resolves lambda labels: uniform, mu_in, dirac(z), dirac_sample(k) (k
/// vertices outside `exclude`, drawn on `seed`), file:<path> (whitespace
/// separated weights, normalized).
std::vector<WalkParams> resolve_lambdas(const std::vector<std::string>& labels, const Digraph& g, double alpha,
                                        std::span<const Vertex> exclude, std::uint64_t seed);

struct ScenarioRow {
  double s = 0.0;
  int t = 0;
  Vertex x = 0;
  std::string lambda_label;
  double measured = 0.0;
  double limit = 0.0;     ///< theta(s), e^{-s} theta(s/gamma) or e^{-s}
  double prelimit = 0.0;  ///< (1-alpha)^t
  double deviation = 0.0; ///< against the reference target (see reference_is_prelimit)
};

struct CheckRow {
  std::string name;
  std::string lambda_label;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool pass = false;
};

struct ScenarioResult {
  std::vector<ScenarioRow> rows;
  /// Per lambda and eps in {0.25, 0.5, 0.75}, on the max-over-starts profile:
  ///   mixing_ratio_eps_*      T(eps)/T_ent in [0.8, 1.2]; scenario 1 with n >= 1e5
  ///   mixing_time_bound_eps_* T(eps) <= ceil(log(1/eps)/alpha); every alpha > 0
  std::vector<CheckRow> checks;
  double alpha = 0.0;
  double t_ent = 0.0;
  bool reference_is_prelimit = false;
  double max_deviation = 0.0;  ///< over rows with |s - jump| > kJumpWindow
  double runtime_seconds = 0.0;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::uint64_t graph_seed = 0;
  std::uint64_t starts_seed = 0;

  bool all_checks_pass() const;
};

/// Sweeps s_grid over every sampled start and lambda. The graph overload runs
/// on a prebuilt graph (it must match the spec's n).
ScenarioResult run_scenario(const ScenarioSpec& spec);
ScenarioResult run_scenario(const ScenarioSpec& spec, const Digraph& g);

struct WidespreadRow {
  std::string quantity;  ///< lambda_pt, pagerank, proxy_gap
  int t = 0;
  double alpha = 0.0;
  double value = 0.0;
};

struct WidespreadResult {
  WidespreadReport report;
  std::vector<WidespreadRow> rows;
};

/// ||lambda P^t - pi0|| for each t, ||pi_{alpha,lambda} - pi0|| for each alpha,
/// and ||mu_in P^h - pi0|| with h = ceil(epsilon T_ent).
WidespreadResult run_widespread(const Digraph& g, const WalkParams& lambda, std::vector<int> times,
                                const std::vector<double>& alphas, double epsilon, const WidespreadReport& report);
WidespreadResult run_widespread(const ScenarioSpec& spec, const Digraph& g);

struct ContrastRow {
  std::string lambda_label;
  double alpha = 0.0;
  double tv_value = 0.0;  ///< ||pi_{alpha,lambda} - pi0||
};

struct SingularityResult {
  SingularityReport report;
  std::vector<ContrastRow> contrast;
  double alpha = 0.0;
  double t_ent = 0.0;
};

SingularityResult run_singularity(const ScenarioSpec& spec, const Digraph& g);

struct MartingaleSuiteRow {
  Model model = Model::OCM;
  Index n = 0;
  MonteCarloRow row;
};

/// One martingale_rows batch per configured check, on substreams of the martingale seed.
std::vector<MartingaleSuiteRow> run_martingale_suite(const ScenarioSpec& spec);

struct Manifest {
  std::string command;
  std::vector<std::string> outputs;
  double runtime_seconds = 0.0;
  std::vector<std::pair<std::string, std::string>> summary;
};

/// JSON run manifest: command, effective config and its hash, every seed,
/// library versions, thread count, outputs, runtime and summary values.
void write_manifest(std::ostream& out, const ScenarioSpec& spec, const Manifest& manifest);

/// "# pagemix <kind> config_hash=<hex> seed=<u64> <extra>" line opening every CSV.
std::string provenance_line(const std::string& kind, const ScenarioSpec& spec, const std::string& extra = "");

void write_scenario_csv(std::ostream& out, const ScenarioResult& result);
void write_checks_csv(std::ostream& out, const std::vector<CheckRow>& checks);
void write_widespread_csv(std::ostream& out, const WidespreadResult& result);
void write_contrast_csv(std::ostream& out, const std::vector<ContrastRow>& rows);
void write_martingale_suite_csv(std::ostream& out, const std::vector<MartingaleSuiteRow>& rows);

}  // namespace pagemix
