#include "pagemix/experiment_cli.hpp"

#include "pagemix/neighborhood_explorer.hpp"
#include "pagemix/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#ifndef PAGEMIX_VERSION
#define PAGEMIX_VERSION "unknown"
#endif

namespace pagemix {

using json = nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) invalid(where + " must be an object");
  for (const auto& item : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; });
    if (!known) invalid("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    invalid(std::string("key '") + key + "' has the wrong type");
  }
}

Model model_from(const json& obj, Model fallback) {
  const auto it = obj.find("model");
  if (it == obj.end()) return fallback;
  if (!it->is_string()) invalid("model must be a string");
  try {
    return parse_model(it->get<std::string>());
  } catch (const Error&) {
    invalid("unknown model " + it->dump());
  }
}

DegreeSource degrees_from(const json& obj) {
  DegreeSource source;
  if (obj.is_null()) return source;
  check_keys(obj, "degrees", {"type", "d", "min", "max", "path"});
  source.type = get_or<std::string>(obj, "type", source.type);
  source.d = get_or<int>(obj, "d", source.d);
  source.min = get_or<int>(obj, "min", source.min);
  source.max = get_or<int>(obj, "max", source.max);
  source.path = get_or<std::string>(obj, "path", source.path);
  return source;
}

json degrees_to(const DegreeSource& source) {
  json j{{"type", source.type}};
  if (source.type == "regular") j["d"] = source.d;
  if (source.type == "uniform") {
    j["min"] = source.min;
    j["max"] = source.max;
  }
  if (source.type == "file") j["path"] = source.path;
  return j;
}

OffspringSampling sampling_from(const std::string& text) {
  if (text == "per_mark") return OffspringSampling::PerMark;
  if (text == "thinned") return OffspringSampling::Thinned;
  invalid("sampling must be per_mark or thinned");
}

std::string_view to_string(OffspringSampling s) { return s == OffspringSampling::PerMark ? "per_mark" : "thinned"; }

void validate_degrees(const DegreeSource& source, const std::string& where) {
  if (source.type == "regular") {
    if (source.d < 2) invalid(where + ": regular degree must be >= 2");
  } else if (source.type == "uniform") {
    if (source.min < 2 || source.max < source.min) invalid(where + ": uniform degrees need 2 <= min <= max");
  } else if (source.type == "file") {
    if (source.path.empty()) invalid(where + ": file source needs a path");
  } else {
    invalid(where + ": unknown degree source '" + source.type + "'");
  }
}

struct LambdaLabel {
  enum Kind { Uniform, MuIn, Dirac, DiracSample, File } kind = Uniform;
  std::int64_t value = 0;
  std::string path;
};

std::optional<std::int64_t> parse_call(const std::string& text, const std::string& name) {
  if (text.size() <= name.size() + 2 || text.compare(0, name.size() + 1, name + "(") != 0 || text.back() != ')') {
    return std::nullopt;
  }
  const std::string inner = text.substr(name.size() + 1, text.size() - name.size() - 2);
  std::size_t used = 0;
  std::int64_t value = 0;
  try {
    value = std::stoll(inner, &used);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (used != inner.size()) return std::nullopt;
  return value;
}

LambdaLabel parse_lambda_label(const std::string& text) {
  LambdaLabel label;
  if (text == "uniform") return label;
  if (text == "mu_in") {
    label.kind = LambdaLabel::MuIn;
    return label;
  }
  if (text.rfind("file:", 0) == 0 && text.size() > 5) {
    label.kind = LambdaLabel::File;
    label.path = text.substr(5);
    return label;
  }
  if (const auto z = parse_call(text, "dirac")) {
    label.kind = LambdaLabel::Dirac;
    label.value = *z;
    return label;
  }
  if (const auto k = parse_call(text, "dirac_sample")) {
    label.kind = LambdaLabel::DiracSample;
    label.value = *k;
    return label;
  }
  invalid("unknown lambda label '" + text + "'");
}

ProbVector read_lambda_file(const std::string& path, Index n) {
  std::ifstream in(path);
  if (!in) invalid("cannot open lambda file " + path);
  std::vector<double> weights;
  double w = 0.0;
  while (in >> w) weights.push_back(w);
  if (!in.eof()) invalid("malformed lambda file " + path);
  if (static_cast<Index>(weights.size()) != n) invalid("lambda file " + path + " does not have n entries");
  return ProbVector::normalized(Eigen::Map<Eigen::VectorXd>(weights.data(), n));
}

double jump_point(const ScenarioSpec& spec) {
  switch (spec.scenario) {
    case ScenarioKind::GammaZero: return 1.0;
    case ScenarioKind::GammaFinite: return spec.gamma;
    case ScenarioKind::GammaInfinite: return std::numeric_limits<double>::quiet_NaN();
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double limit_gamma(const ScenarioSpec& spec) {
  switch (spec.scenario) {
    case ScenarioKind::GammaZero: return 0.0;
    case ScenarioKind::GammaFinite: return spec.gamma;
    case ScenarioKind::GammaInfinite: return kInfiniteGamma;
  }
  return 0.0;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::GammaZero: return "gamma_zero";
    case ScenarioKind::GammaFinite: return "gamma_finite";
    case ScenarioKind::GammaInfinite: return "gamma_infinite";
  }
  return "unknown";
}

std::string ScenarioSpec::canonical_json() const {
  json j;
  j["model"] = std::string(to_string(model));
  j["degrees"] = degrees_to(degrees);
  j["n"] = n;
  j["seed"] = seed;
  j["scenario"] = json{{"kind", std::string(to_string(scenario))}};
  if (scenario == ScenarioKind::GammaFinite) j["scenario"]["gamma"] = gamma;
  j["alpha_rule"] = json{{"type", alpha_rule.type}};
  if (alpha_rule.type == "explicit") j["alpha_rule"]["value"] = alpha_rule.value;
  if (alpha_rule.type == "schedule") {
    j["alpha_rule"]["c"] = alpha_rule.c;
    j["alpha_rule"]["power"] = alpha_rule.power;
    j["alpha_rule"]["log_power"] = alpha_rule.log_power;
  }
  j["s_grid"] = s_grid;
  if (start_sample) {
    j["start_sample"] = *start_sample;
  } else {
    j["start_sample"] = "all";
  }
  j["lambda_set"] = lambda_set;
  j["widespread"] = json{{"lambda", widespread.lambda},
                         {"t_ent_multiples", widespread.t_ent_multiples},
                         {"alphas", widespread.alphas},
                         {"alpha_inverse_t_ent", widespread.alpha_inverse_t_ent},
                         {"epsilon", widespread.epsilon},
                         {"delta", widespread.delta},
                         {"c1", widespread.c1},
                         {"c2", widespread.c2}};
  j["singularity"] = json{{"t_ent_fractions", singularity.t_ent_fractions}, {"tol", singularity.tol}};
  j["profile"] = json{{"lambda", profile.lambda}, {"t_max", profile.t_max}};
  j["tree"] = json{{"root", tree.root}, {"t", tree.t}, {"eta", tree.eta}};
  json checks = json::array();
  for (const auto& c : martingale) {
    checks.push_back(json{{"model", std::string(to_string(c.model))},
                          {"degrees", degrees_to(c.degrees)},
                          {"n", c.n},
                          {"times", c.times},
                          {"samples", c.samples},
                          {"lambda", c.lambda},
                          {"sampling", std::string(to_string(c.sampling))}});
  }
  j["martingale"] = checks;
  return j.dump();
}

std::uint64_t ScenarioSpec::config_hash() const { return fnv1a(canonical_json()); }

ScenarioSpec parse_scenario_spec(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  check_keys(root, "config",
             {"model", "degrees", "n", "seed", "scenario", "alpha_rule", "s_grid", "start_sample", "lambda_set",
              "widespread", "singularity", "profile", "tree", "martingale"});
  ScenarioSpec spec;
  spec.model = model_from(root, spec.model);
  if (root.contains("degrees")) spec.degrees = degrees_from(root["degrees"]);
  spec.n = get_or<Index>(root, "n", spec.n);
  spec.seed = get_or<std::uint64_t>(root, "seed", spec.seed);

  if (root.contains("scenario")) {
    const json& sc = root["scenario"];
    std::string kind;
    if (sc.is_string()) {
      kind = sc.get<std::string>();
    } else {
      check_keys(sc, "scenario", {"kind", "gamma"});
      kind = get_or<std::string>(sc, "kind", "");
      spec.gamma = get_or<double>(sc, "gamma", 0.0);
    }
    if (kind == "gamma_zero") {
      spec.scenario = ScenarioKind::GammaZero;
    } else if (kind == "gamma_finite") {
      spec.scenario = ScenarioKind::GammaFinite;
    } else if (kind == "gamma_infinite") {
      spec.scenario = ScenarioKind::GammaInfinite;
    } else {
      invalid("unknown scenario '" + kind + "'");
    }
  }

  if (root.contains("alpha_rule")) {
    const json& ar = root["alpha_rule"];
    if (ar.is_number()) {
      spec.alpha_rule.value = ar.get<double>();
    } else {
      check_keys(ar, "alpha_rule", {"type", "value", "c", "power", "log_power"});
      spec.alpha_rule.type = get_or<std::string>(ar, "type", spec.alpha_rule.type);
      spec.alpha_rule.value = get_or<double>(ar, "value", spec.alpha_rule.value);
      spec.alpha_rule.c = get_or<double>(ar, "c", spec.alpha_rule.c);
      spec.alpha_rule.power = get_or<double>(ar, "power", spec.alpha_rule.power);
      spec.alpha_rule.log_power = get_or<double>(ar, "log_power", spec.alpha_rule.log_power);
    }
  }

  spec.s_grid = get_or<std::vector<double>>(root, "s_grid", spec.s_grid);
  if (root.contains("start_sample")) {
    const json& ss = root["start_sample"];
    if (ss.is_string()) {
      if (ss.get<std::string>() != "all") invalid("start_sample must be a count or \"all\"");
    } else if (ss.is_number_integer()) {
      spec.start_sample = ss.get<Index>();
    } else {
      invalid("start_sample must be a count or \"all\"");
    }
  }
  spec.lambda_set = get_or<std::vector<std::string>>(root, "lambda_set", spec.lambda_set);

  if (root.contains("widespread")) {
    const json& w = root["widespread"];
    check_keys(w, "widespread",
               {"lambda", "t_ent_multiples", "alphas", "alpha_inverse_t_ent", "epsilon", "delta", "c1", "c2"});
    auto& ws = spec.widespread;
    ws.lambda = get_or<std::string>(w, "lambda", ws.lambda);
    ws.t_ent_multiples = get_or<std::vector<double>>(w, "t_ent_multiples", ws.t_ent_multiples);
    ws.alphas = get_or<std::vector<double>>(w, "alphas", ws.alphas);
    ws.alpha_inverse_t_ent = get_or<bool>(w, "alpha_inverse_t_ent", ws.alpha_inverse_t_ent);
    ws.epsilon = get_or<double>(w, "epsilon", ws.epsilon);
    ws.delta = get_or<double>(w, "delta", ws.delta);
    ws.c1 = get_or<double>(w, "c1", ws.c1);
    ws.c2 = get_or<double>(w, "c2", ws.c2);
  }
  if (root.contains("singularity")) {
    const json& s = root["singularity"];
    check_keys(s, "singularity", {"t_ent_fractions", "tol"});
    spec.singularity.t_ent_fractions =
        get_or<std::vector<double>>(s, "t_ent_fractions", spec.singularity.t_ent_fractions);
    spec.singularity.tol = get_or<double>(s, "tol", spec.singularity.tol);
  }
  if (root.contains("profile")) {
    const json& p = root["profile"];
    check_keys(p, "profile", {"lambda", "t_max"});
    spec.profile.lambda = get_or<std::string>(p, "lambda", spec.profile.lambda);
    spec.profile.t_max = get_or<int>(p, "t_max", spec.profile.t_max);
  }
  if (root.contains("tree")) {
    const json& t = root["tree"];
    check_keys(t, "tree", {"root", "t", "eta"});
    spec.tree.root = get_or<Vertex>(t, "root", spec.tree.root);
    spec.tree.t = get_or<int>(t, "t", spec.tree.t);
    spec.tree.eta = get_or<double>(t, "eta", spec.tree.eta);
  }
  if (root.contains("martingale")) {
    const json& list = root["martingale"];
    if (!list.is_array()) invalid("martingale must be an array of checks");
    for (const json& item : list) {
      check_keys(item, "martingale check", {"model", "degrees", "n", "times", "samples", "lambda", "sampling"});
      MartingaleCheck c;
      c.model = model_from(item, c.model);
      if (item.contains("degrees")) c.degrees = degrees_from(item["degrees"]);
      c.n = get_or<Index>(item, "n", c.n);
      c.times = get_or<std::vector<int>>(item, "times", c.times);
      c.samples = get_or<std::int64_t>(item, "samples", c.samples);
      c.lambda = get_or<std::string>(item, "lambda", c.lambda);
      c.sampling = sampling_from(get_or<std::string>(item, "sampling", "per_mark"));
      spec.martingale.push_back(std::move(c));
    }
  }
  validate(spec);
  return spec;
}

ScenarioSpec load_scenario_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario_spec(buffer.str());
}

void validate(const ScenarioSpec& spec) {
  if (spec.n < 2) invalid("n must be at least 2");
  validate_degrees(spec.degrees, "degrees");

  if (spec.scenario == ScenarioKind::GammaFinite && !(spec.gamma > 0.0 && std::isfinite(spec.gamma))) {
    invalid("gamma_finite needs a finite gamma > 0");
  }
  const auto& ar = spec.alpha_rule;
  if (ar.type == "explicit") {
    if (!(ar.value >= 0.0 && ar.value < 1.0)) invalid("explicit alpha must lie in [0, 1)");
    if (ar.value == 0.0 && spec.scenario != ScenarioKind::GammaZero) invalid("alpha = 0 is only valid for gamma_zero");
  } else if (ar.type == "gamma") {
    if (spec.scenario != ScenarioKind::GammaFinite) invalid("alpha rule 'gamma' needs scenario gamma_finite");
  } else if (ar.type == "schedule") {
    if (!(ar.c > 0.0)) invalid("schedule constant c must be positive");
  } else {
    invalid("unknown alpha rule '" + ar.type + "'");
  }

  const double jump = jump_point(spec);
  for (const double s : spec.s_grid) {
    if (!(s >= 0.0) || !std::isfinite(s)) invalid("s values must be finite and non-negative");
    if (std::isfinite(jump) && std::abs(s - jump) < kJumpExclusion) {
      invalid("s = " + format_double(s) + " is within " + format_double(kJumpExclusion) + " of the jump at " +
              format_double(jump));
    }
  }
  if (spec.start_sample && (*spec.start_sample < 1 || *spec.start_sample > spec.n)) {
    invalid("start_sample must lie in [1, n]");
  }
  if (spec.lambda_set.empty()) invalid("lambda_set is empty");
  for (const auto& label : spec.lambda_set) {
    const auto parsed = parse_lambda_label(label);
    if (parsed.kind == LambdaLabel::Dirac && (parsed.value < 0 || parsed.value >= spec.n)) {
      invalid("dirac vertex out of range in '" + label + "'");
    }
    if (parsed.kind == LambdaLabel::DiracSample && parsed.value < 1) invalid("dirac_sample needs k >= 1");
  }

  const auto& ws = spec.widespread;
  parse_lambda_label(ws.lambda);
  for (const double a : ws.alphas) {
    if (!(a > 0.0 && a < 1.0)) invalid("widespread alphas must lie in (0, 1)");
  }
  for (const double mult : ws.t_ent_multiples) {
    if (!(mult >= 0.0)) invalid("widespread t_ent_multiples must be non-negative");
  }
  if (!(ws.epsilon > 0.0)) invalid("widespread epsilon must be positive");
  for (const double f : spec.singularity.t_ent_fractions) {
    if (!(f >= 0.0)) invalid("singularity t_ent_fractions must be non-negative");
  }
  if (!(spec.singularity.tol > 0.0)) invalid("singularity tol must be positive");
  parse_lambda_label(spec.profile.lambda);
  if (spec.profile.t_max < 0) invalid("profile t_max must be non-negative");
  if (spec.tree.root < 0 || spec.tree.root >= spec.n) invalid("tree root out of range");
  if (spec.tree.t < 0) invalid("tree height must be non-negative");
  if (!(spec.tree.eta > 0.0 && spec.tree.eta < 0.5)) invalid("tree eta must lie in (0, 1/2)");

  for (const auto& c : spec.martingale) {
    validate_degrees(c.degrees, "martingale degrees");
    if (c.n < 2) invalid("martingale n must be at least 2");
    if (c.times.empty()) invalid("martingale times are empty");
    for (const int t : c.times) {
      if (t < 0) invalid("martingale times must be non-negative");
    }
    if (c.samples < 2) invalid("martingale samples must be at least 2");
    if (!c.lambda.empty()) {
      const auto parsed = parse_lambda_label(c.lambda);
      if (parsed.kind == LambdaLabel::DiracSample) invalid("dirac_sample is not available for martingale checks");
      if (parsed.kind == LambdaLabel::Dirac && (parsed.value < 0 || parsed.value >= c.n)) {
        invalid("dirac vertex out of range in '" + c.lambda + "'");
      }
    }
  }
}

RunSeeds::RunSeeds(std::uint64_t seed)
    : graph(substream_seed(seed, 1)),
      starts(substream_seed(seed, 2)),
      lambdas(substream_seed(seed, 3)),
      degrees(substream_seed(seed, 4)),
      martingale(substream_seed(seed, 5)) {}

DegreeSequence build_sequence(const DegreeSource& source, Model model, Index n, std::uint64_t seed) {
  if (source.type == "regular") return DegreeSequence::regular(n, source.d, model);
  if (source.type == "file") {
    std::ifstream in(source.path);
    if (!in) invalid("cannot open degree file " + source.path);
    auto seq = read_degree_sequence(in);
    if (seq.n() != n) invalid("degree file " + source.path + " has n = " + std::to_string(seq.n()));
    if (seq.model() != model) invalid("degree file " + source.path + " is for the other model");
    return seq;
  }
  if (source.type == "uniform") {
    Rng rng(seed);
    const auto span = static_cast<std::uint64_t>(source.max - source.min + 1);
    std::vector<int> out(static_cast<std::size_t>(n));
    for (auto& d : out) d = source.min + static_cast<int>(rng.below(span));
    if (model == Model::OCM) return DegreeSequence::build(std::move(out), std::nullopt, model);
    std::vector<int> in = out;
    for (std::size_t i = in.size(); i > 1; --i) std::swap(in[i - 1], in[rng.below(i)]);
    return DegreeSequence::build(std::move(out), std::move(in), model);
  }
  invalid("unknown degree source '" + source.type + "'");
}

DegreeSequence build_sequence(const ScenarioSpec& spec) {
  return build_sequence(spec.degrees, spec.model, spec.n, RunSeeds(spec.seed).degrees);
}

Digraph build_graph(const ScenarioSpec& spec) { return sample_graph(build_sequence(spec), RunSeeds(spec.seed).graph); }

std::vector<Vertex> sample_starts(const ScenarioSpec& spec, Index n) {
  std::vector<Vertex> starts;
  if (!spec.start_sample || *spec.start_sample >= n) {
    starts.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) starts[static_cast<std::size_t>(i)] = static_cast<Vertex>(i);
    return starts;
  }
  // Floyd's subset sampling.
  Rng rng(RunSeeds(spec.seed).starts);
  std::set<Vertex> chosen;
  for (Index j = n - *spec.start_sample; j < n; ++j) {
    const auto v = static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(j) + 1));
    chosen.insert(chosen.count(v) ? static_cast<Vertex>(j) : v);
  }
  return {chosen.begin(), chosen.end()};
}

double derive_alpha(const ScenarioSpec& spec, double t_ent) {
  const auto& ar = spec.alpha_rule;
  double alpha = 0.0;
  if (ar.type == "explicit") {
    alpha = ar.value;
  } else if (ar.type == "gamma") {
    alpha = spec.gamma / t_ent;
  } else {
    alpha = ar.c * std::pow(t_ent, -ar.power) * std::pow(std::log(t_ent), ar.log_power);
  }
  const bool zero_ok = spec.scenario == ScenarioKind::GammaZero && alpha == 0.0;
  if (!zero_ok && !(alpha > 0.0 && alpha < 1.0)) {
    invalid("derived alpha = " + format_double(alpha) + " is outside (0, 1)");
  }
  return alpha;
}

int round_time(double value) { return static_cast<int>(std::floor(value + 0.5)); }

std::vector<WalkParams> resolve_lambdas(const std::vector<std::string>& labels, const Digraph& g, double alpha,
                                        std::span<const Vertex> exclude, std::uint64_t seed) {
  const Index n = g.n();
  std::vector<WalkParams> set;
  Rng rng(seed);
  std::set<Vertex> taken(exclude.begin(), exclude.end());
  for (const auto& text : labels) {
    const auto label = parse_lambda_label(text);
    switch (label.kind) {
      case LambdaLabel::Uniform: set.emplace_back(alpha, ProbVector::uniform(n), "uniform"); break;
      case LambdaLabel::MuIn: set.emplace_back(alpha, mu_in(g), "mu_in"); break;
      case LambdaLabel::Dirac:
        if (label.value < 0 || label.value >= n) invalid("dirac vertex out of range in '" + text + "'");
        set.emplace_back(alpha, ProbVector::dirac(n, static_cast<Vertex>(label.value)), text);
        break;
      case LambdaLabel::DiracSample: {
        if (static_cast<Index>(taken.size()) + label.value > n) invalid("not enough vertices for '" + text + "'");
        std::vector<Vertex> picks;
        while (static_cast<std::int64_t>(picks.size()) < label.value) {
          const auto z = static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(n)));
          if (taken.insert(z).second) picks.push_back(z);
        }
        std::sort(picks.begin(), picks.end());
        for (const Vertex z : picks) set.emplace_back(alpha, ProbVector::dirac(n, z), "dirac(" + std::to_string(z) + ")");
        break;
      }
      case LambdaLabel::File: set.emplace_back(alpha, read_lambda_file(label.path, n), text); break;
    }
  }
  return set;
}

bool ScenarioResult::all_checks_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckRow& c) { return c.pass; });
}

ScenarioResult run_scenario(const ScenarioSpec& spec) { return run_scenario(spec, build_graph(spec)); }

ScenarioResult run_scenario(const ScenarioSpec& spec, const Digraph& g) {
  const auto clock = std::chrono::steady_clock::now();
  validate(spec);
  if (spec.s_grid.empty()) invalid("s_grid is empty");
  if (g.n() != spec.n) invalid("graph has n = " + std::to_string(g.n()) + ", config says " + std::to_string(spec.n));

  const RunSeeds seeds(spec.seed);
  ScenarioResult result;
  result.config_hash = spec.config_hash();
  result.seed = spec.seed;
  result.graph_seed = seeds.graph;
  result.starts_seed = seeds.starts;
  result.t_ent = entropic_time(g).t_ent;
  result.alpha = derive_alpha(spec, result.t_ent);
  const double alpha = result.alpha;
  const bool scenario1 = spec.scenario == ScenarioKind::GammaZero;
  const bool scenario3 = spec.scenario == ScenarioKind::GammaInfinite;
  result.reference_is_prelimit = scenario3 && alpha * result.t_ent < 10.0;

  const TransitionKernel k(g);
  const auto starts = sample_starts(spec, g.n());

  // One walk family per lambda; alpha = 0 has a single lambda-free family.
  std::vector<std::optional<WalkParams>> walks;
  std::vector<ProbVector> targets;
  if (alpha == 0.0) {
    walks.emplace_back(std::nullopt);
    targets.push_back(stationary_srw(k));
  } else {
    for (auto& p : resolve_lambdas(spec.lambda_set, g, alpha, starts, seeds.lambdas)) {
      targets.push_back(stationary_pagerank(k, p).distribution);
      walks.emplace_back(std::move(p));
    }
  }

  std::vector<int> grid_t;
  for (const double s : spec.s_grid) grid_t.push_back(round_time(scenario1 ? s * result.t_ent : s / alpha));
  int horizon = *std::max_element(grid_t.begin(), grid_t.end());
  const double epsilons[] = {0.25, 0.5, 0.75};
  const bool check_cutoff = scenario1 && g.n() >= 100000;
  if (check_cutoff) horizon = std::max(horizon, static_cast<int>(std::ceil(1.2 * result.t_ent)) + 1);
  auto stated_bound = [alpha](double eps) { return static_cast<int>(std::ceil(std::log(1.0 / eps) / alpha)); };
  const bool check_bound = alpha > 0.0;
  if (check_bound) horizon = std::max(horizon, stated_bound(epsilons[0]));

  std::vector<int> all_times(static_cast<std::size_t>(horizon) + 1);
  for (int t = 0; t <= horizon; ++t) all_times[static_cast<std::size_t>(t)] = t;

  // Job (w, i): start i under walk family w. Each job owns its profile slot.
  const std::size_t per_walk = starts.size();
  std::vector<std::vector<double>> profiles(walks.size() * per_walk);
  parallel_each(static_cast<Index>(profiles.size()), [&](Index job) {
    const auto w = static_cast<std::size_t>(job) / per_walk;
    const auto i = static_cast<std::size_t>(job) % per_walk;
    const Vertex x = starts[i];
    profiles[static_cast<std::size_t>(job)] =
        distance_profile(k, targets[w], walks[w], std::span<const Vertex>(&x, 1), all_times).values;
  });

  auto label_of = [&](std::size_t w) { return walks[w] ? walks[w]->label : std::string("none"); };
  const double gamma = limit_gamma(spec);
  const double jump = jump_point(spec);
  for (std::size_t si = 0; si < spec.s_grid.size(); ++si) {
    const double s = spec.s_grid[si];
    const int t = grid_t[si];
    const double limit = limit_profile(gamma, s);
    const double prelimit = std::pow(1.0 - alpha, t);
    const double reference = result.reference_is_prelimit ? prelimit : limit;
    const bool in_window = std::isfinite(jump) && std::abs(s - jump) <= kJumpWindow;
    for (std::size_t w = 0; w < walks.size(); ++w) {
      for (std::size_t i = 0; i < per_walk; ++i) {
        ScenarioRow row;
        row.s = s;
        row.t = t;
        row.x = starts[i];
        row.lambda_label = label_of(w);
        row.measured = profiles[w * per_walk + i][static_cast<std::size_t>(t)];
        row.limit = limit;
        row.prelimit = prelimit;
        row.deviation = std::abs(row.measured - reference);
        if (!in_window) result.max_deviation = std::max(result.max_deviation, row.deviation);
        result.rows.push_back(std::move(row));
      }
    }
  }

  // Mixing times of the max-over-starts profile of each walk family.
  for (std::size_t w = 0; w < walks.size() && (check_cutoff || check_bound); ++w) {
    std::vector<double> worst(all_times.size(), 0.0);
    for (std::size_t i = 0; i < per_walk; ++i) {
      const auto& p = profiles[w * per_walk + i];
      for (std::size_t t = 0; t < worst.size(); ++t) worst[t] = std::max(worst[t], p[t]);
    }
    for (const double eps : epsilons) {
      const auto hit = std::find_if(worst.begin(), worst.end(), [eps](double d) { return d <= eps; });
      const int mix = hit == worst.end() ? horizon + 1 : static_cast<int>(hit - worst.begin());
      CheckRow check;
      check.lambda_label = label_of(w);
      if (check_cutoff) {
        check.name = "mixing_ratio_eps_" + format_double(eps);
        check.value = mix / result.t_ent;
        check.lower = 0.8;
        check.upper = 1.2;
        check.pass = hit != worst.end() && check.value >= check.lower && check.value <= check.upper;
        result.checks.push_back(check);
      }
      if (check_bound) {
        check.name = "mixing_time_bound_eps_" + format_double(eps);
        check.value = mix;
        check.lower = 0.0;
        check.upper = stated_bound(eps);
        check.pass = hit != worst.end() && check.value <= check.upper;
        result.checks.push_back(check);
      }
    }
  }
  result.runtime_seconds = seconds_since(clock);
  return result;
}

WidespreadResult run_widespread(const Digraph& g, const WalkParams& lambda, std::vector<int> times,
                                const std::vector<double>& alphas, double epsilon, const WidespreadReport& report) {
  WidespreadResult result;
  result.report = report;
  const TransitionKernel k(g);
  const ProbVector pi0 = stationary_srw(k);

  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  Eigen::VectorXd cur = lambda.lambda.values();
  Eigen::VectorXd next(g.n());
  int now = 0;
  for (const int t : times) {
    for (; now < t; ++now) {
      k.apply(cur, next);
      cur.swap(next);
    }
    result.rows.push_back({"lambda_pt", t, 0.0, tv(cur, pi0.values())});
  }
  for (const double a : alphas) {
    WalkParams p = lambda;
    p.alpha = a;
    result.rows.push_back({"pagerank", 0, a, tv(stationary_pagerank(k, p).distribution, pi0)});
  }
  const int h = static_cast<int>(std::ceil(epsilon * entropic_time(g).t_ent));
  result.rows.push_back({"proxy_gap", h, 0.0, tv(evolve(mu_in(g), k, h), pi0)});
  return result;
}

WidespreadResult run_widespread(const ScenarioSpec& spec, const Digraph& g) {
  validate(spec);
  const auto& ws = spec.widespread;
  const double t_ent = entropic_time(g).t_ent;
  const auto lambdas = resolve_lambdas({ws.lambda}, g, 0.0, {}, RunSeeds(spec.seed).lambdas);
  if (lambdas.size() != 1) invalid("widespread needs exactly one lambda");
  std::vector<int> times;
  for (const double mult : ws.t_ent_multiples) times.push_back(static_cast<int>(std::ceil(mult * t_ent)));
  std::vector<double> alphas = ws.alphas;
  if (ws.alpha_inverse_t_ent) alphas.insert(alphas.begin(), 1.0 / t_ent);
  const auto report = widespread_report(lambdas.front().lambda, ws.delta, ws.c1, ws.c2);
  return run_widespread(g, lambdas.front(), times, alphas, ws.epsilon, report);
}

SingularityResult run_singularity(const ScenarioSpec& spec, const Digraph& g) {
  validate(spec);
  SingularityResult result;
  result.t_ent = entropic_time(g).t_ent;
  result.alpha = derive_alpha(spec, result.t_ent);
  if (!(result.alpha > 0.0)) throw Error(ErrorCode::AlphaZero, "the singularity sweep needs alpha > 0");
  const TransitionKernel k(g);
  const auto starts = sample_starts(spec, g.n());
  const auto lambdas = resolve_lambdas(spec.lambda_set, g, result.alpha, starts, RunSeeds(spec.seed).lambdas);
  for (const double f : spec.singularity.t_ent_fractions) {
    const int t = static_cast<int>(std::ceil(f * result.t_ent));
    const auto part = singularity_diagnostic(k, result.alpha, t, lambdas, starts, spec.singularity.tol);
    result.report.rows.insert(result.report.rows.end(), part.rows.begin(), part.rows.end());
    result.report.min_value = std::min(result.report.min_value, part.min_value);
  }
  const ProbVector pi0 = stationary_srw(k);
  for (const auto& p : lambdas) {
    result.contrast.push_back(
        {p.label, result.alpha, tv(stationary_pagerank(k, p, spec.singularity.tol).distribution, pi0)});
  }
  return result;
}

std::vector<MartingaleSuiteRow> run_martingale_suite(const ScenarioSpec& spec) {
  validate(spec);
  if (spec.martingale.empty()) invalid("no martingale checks configured");
  const RunSeeds seeds(spec.seed);
  std::vector<MartingaleSuiteRow> out;
  for (std::size_t i = 0; i < spec.martingale.size(); ++i) {
    const auto& c = spec.martingale[i];
    const auto seq = build_sequence(c.degrees, c.model, c.n, substream_seed(seeds.degrees, i + 1));
    std::optional<ProbVector> lambda;
    if (!c.lambda.empty()) {
      const auto label = parse_lambda_label(c.lambda);
      switch (label.kind) {
        case LambdaLabel::Uniform: lambda = ProbVector::uniform(c.n); break;
        case LambdaLabel::MuIn: lambda = mu_in(seq, c.model); break;
        case LambdaLabel::Dirac: lambda = ProbVector::dirac(c.n, static_cast<Vertex>(label.value)); break;
        case LambdaLabel::File: lambda = read_lambda_file(label.path, c.n); break;
        case LambdaLabel::DiracSample: invalid("dirac_sample is not available for martingale checks");
      }
    }
    const auto rows =
        martingale_rows(seq, c.model, c.times, lambda, c.samples, substream_seed(seeds.martingale, i), c.sampling);
    for (const auto& row : rows) out.push_back({c.model, c.n, row});
  }
  return out;
}

std::string provenance_line(const std::string& kind, const ScenarioSpec& spec, const std::string& extra) {
  const RunSeeds seeds(spec.seed);
  std::string line = "# pagemix " + kind + " config_hash=" + hex64(spec.config_hash()) +
                     " seed=" + std::to_string(spec.seed) + " graph_seed=" + std::to_string(seeds.graph) +
                     " starts_seed=" + std::to_string(seeds.starts) + " lambda_seed=" + std::to_string(seeds.lambdas) +
                     " degree_seed=" + std::to_string(seeds.degrees) +
                     " martingale_seed=" + std::to_string(seeds.martingale);
  if (!extra.empty()) line += " " + extra;
  return line;
}

void write_scenario_csv(std::ostream& out, const ScenarioResult& result) {
  out << "s,t,x,lambda_label,measured,limit,prelimit,deviation\n";
  for (const auto& r : result.rows) {
    out << format_double(r.s) << ',' << r.t << ',' << r.x << ',' << r.lambda_label << ',' << format_double(r.measured)
        << ',' << format_double(r.limit) << ',' << format_double(r.prelimit) << ',' << format_double(r.deviation)
        << '\n';
  }
}

void write_checks_csv(std::ostream& out, const std::vector<CheckRow>& checks) {
  out << "name,lambda_label,value,lower,upper,pass\n";
  for (const auto& c : checks) {
    out << c.name << ',' << c.lambda_label << ',' << format_double(c.value) << ',' << format_double(c.lower) << ','
        << format_double(c.upper) << ',' << (c.pass ? "true" : "false") << '\n';
  }
}

void write_widespread_csv(std::ostream& out, const WidespreadResult& result) {
  out << "quantity,t,alpha,value\n";
  for (const auto& r : result.rows) {
    out << r.quantity << ',' << r.t << ',' << format_double(r.alpha) << ',' << format_double(r.value) << '\n';
  }
  const auto& w = result.report;
  out << "max_mass,0,0," << format_double(w.max_mass) << '\n';
  out << "max_bound,0,0," << format_double(w.max_bound) << '\n';
  out << "ell2_statistic,0,0," << format_double(w.ell2_statistic) << '\n';
  out << "pass_i,0,0," << (w.pass_i ? 1 : 0) << '\n';
  out << "pass_ii,0,0," << (w.pass_ii ? 1 : 0) << '\n';
}

void write_contrast_csv(std::ostream& out, const std::vector<ContrastRow>& rows) {
  out << "lambda_label,alpha,tv_value\n";
  for (const auto& r : rows) {
    out << r.lambda_label << ',' << format_double(r.alpha) << ',' << format_double(r.tv_value) << '\n';
  }
}

void write_martingale_suite_csv(std::ostream& out, const std::vector<MartingaleSuiteRow>& rows) {
  out << "model,n,quantity,t,estimate,std_error,target,z_score,samples,seed,pass\n";
  for (const auto& r : rows) {
    const auto& m = r.row;
    out << to_string(r.model) << ',' << r.n << ',' << m.quantity << ',' << m.t << ',' << format_double(m.estimate)
        << ',' << format_double(m.std_error) << ',' << format_double(m.target) << ',' << format_double(m.z_score)
        << ',' << m.samples << ',' << m.seed << ',' << (m.pass ? "true" : "false") << '\n';
  }
}

void write_manifest(std::ostream& out, const ScenarioSpec& spec, const Manifest& manifest) {
  const RunSeeds seeds(spec.seed);
  json j;
  j["command"] = manifest.command;
  j["config"] = json::parse(spec.canonical_json());
  j["config_hash"] = hex64(spec.config_hash());
  j["seeds"] = json{{"seed", spec.seed},
                    {"graph", seeds.graph},
                    {"starts", seeds.starts},
                    {"lambdas", seeds.lambdas},
                    {"degrees", seeds.degrees},
                    {"martingale", seeds.martingale}};
  j["versions"] = json{{"pagemix", PAGEMIX_VERSION},
                       {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                     std::to_string(EIGEN_MINOR_VERSION)},
                       {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                       {"compiler", __VERSION__}};
  j["threads"] = thread_count();
  j["outputs"] = manifest.outputs;
  j["runtime_seconds"] = manifest.runtime_seconds;
  json summary = json::object();
  for (const auto& [key, value] : manifest.summary) summary[key] = value;
  j["summary"] = summary;
  out << j.dump(2) << '\n';
}

}  // namespace pagemix
