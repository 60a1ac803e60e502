#include "pagemix/degree_model.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

namespace pagemix {

ProbVector::ProbVector(Eigen::VectorXd weights, double tolerance)
    : weights_(std::move(weights)), tolerance_(tolerance) {
  if (weights_.size() == 0) throw Error(ErrorCode::EmptySequence, "probability vector has no entries");
  if ((weights_.array() < 0.0).any() || !weights_.allFinite()) {
    throw Error(ErrorCode::NotNormalized, "probability vector has negative or non-finite entries");
  }
  const double total = compensated_sum(weights_);
  if (std::abs(total - 1.0) > tolerance_) {
    throw Error(ErrorCode::NotNormalized, "entries sum to " + std::to_string(total));
  }
}

ProbVector ProbVector::uniform(Index n) {
  if (n <= 0) throw Error(ErrorCode::EmptySequence, "uniform distribution on empty set");
  return ProbVector(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

ProbVector ProbVector::dirac(Index n, Vertex z) {
  if (z < 0 || z >= n) throw Error(ErrorCode::InvalidArgument, "dirac vertex out of range");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  w(z) = 1.0;
  return ProbVector(std::move(w));
}

ProbVector ProbVector::uniform_on(Index n, std::span<const Vertex> support) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (const Vertex v : support) {
    if (v < 0 || v >= n) throw Error(ErrorCode::InvalidArgument, "support vertex out of range");
    w(v) = 1.0;
  }
  return normalized(std::move(w));
}

ProbVector ProbVector::normalized(Eigen::VectorXd weights, double tolerance) {
  const double total = compensated_sum(weights);
  if (!(total > 0.0)) throw Error(ErrorCode::NotNormalized, "cannot normalize a vector with zero mass");
  weights /= total;
  return ProbVector(std::move(weights), tolerance);
}

DegreeSequence DegreeSequence::build(std::vector<int> out_degrees, std::optional<std::vector<int>> in_degrees,
                                     Model model) {
  if (out_degrees.empty()) throw Error(ErrorCode::EmptySequence, "empty out-degree sequence");
  if (model == Model::DCM && !in_degrees) {
    throw Error(ErrorCode::MissingInDegrees, "DCM requires an in-degree sequence");
  }
  if (model == Model::OCM && in_degrees) {
    throw Error(ErrorCode::UnexpectedInDegrees, "OCM fixes only out-degrees");
  }
  if (in_degrees && in_degrees->size() != out_degrees.size()) {
    throw Error(ErrorCode::LengthMismatch, "in/out degree sequences differ in length");
  }

  DegreeSequence seq;
  seq.model_ = model;
  std::int64_t out_sum = 0;
  int delta = 0;
  for (const int d : out_degrees) {
    if (d < 2) throw Error(ErrorCode::MinDegree, "out-degree " + std::to_string(d) + " < 2");
    out_sum += d;
    delta = std::max(delta, d);
  }
  if (in_degrees) {
    std::int64_t in_sum = 0;
    for (const int d : *in_degrees) {
      if (d < 2) throw Error(ErrorCode::MinDegree, "in-degree " + std::to_string(d) + " < 2");
      in_sum += d;
      delta = std::max(delta, d);
    }
    if (in_sum != out_sum) {
      throw Error(ErrorCode::SumMismatch,
                  "sum of out-degrees " + std::to_string(out_sum) + " != sum of in-degrees " + std::to_string(in_sum));
    }
  }
  seq.out_ = std::move(out_degrees);
  seq.in_ = std::move(in_degrees);
  seq.m_ = out_sum;
  seq.delta_ = delta;
  return seq;
}

DegreeSequence DegreeSequence::regular(Index n, int d, Model model) {
  std::vector<int> out(static_cast<std::size_t>(n), d);
  if (model == Model::DCM) return build(out, out, model);
  return build(std::move(out), std::nullopt, model);
}

int DegreeSequence::in_degree(Vertex x) const {
  if (!in_) throw Error(ErrorCode::MissingInDegrees, "sequence has no in-degrees");
  return (*in_)[static_cast<std::size_t>(x)];
}

std::span<const int> DegreeSequence::in_degrees() const {
  if (!in_) throw Error(ErrorCode::MissingInDegrees, "sequence has no in-degrees");
  return *in_;
}

std::uint64_t DegreeSequence::hash() const {
  return sequence_hash(model_, out_, in_ ? std::span<const int>(*in_) : std::span<const int>());
}

std::uint64_t sequence_hash(Model model, std::span<const int> out, std::span<const int> in) {
  std::string bytes;
  bytes.reserve(out.size() * 8 + 16);
  bytes += to_string(model);
  bytes += ':';
  for (std::size_t i = 0; i < out.size(); ++i) {
    bytes += std::to_string(out[i]);
    if (!in.empty()) {
      bytes += ',';
      bytes += std::to_string(in[i]);
    }
    bytes += ';';
  }
  return fnv1a(bytes);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

int parse_int(std::string_view s, std::size_t line_no) {
  s = trim(s);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad integer '" + std::string(s) + "'");
  }
  return value;
}

}  // namespace

DegreeSequence read_degree_sequence(std::istream& in) {
  std::string line;
  std::optional<Model> model;
  std::vector<int> out;
  std::vector<int> inn;
  bool any_in = false;
  bool any_without_in = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    if (!model) {
      if (!text.starts_with("model=")) throw Error(ErrorCode::ParseError, "missing 'model=' header");
      model = parse_model(trim(text.substr(6)));
      continue;
    }
    const auto comma = text.find(',');
    out.push_back(parse_int(text.substr(0, comma), line_no));
    if (comma != std::string_view::npos) {
      inn.push_back(parse_int(text.substr(comma + 1), line_no));
      any_in = true;
    } else {
      any_without_in = true;
    }
  }
  if (!model) throw Error(ErrorCode::ParseError, "missing 'model=' header");
  if (any_in && any_without_in) throw Error(ErrorCode::ParseError, "in-degrees given for some vertices only");
  std::optional<std::vector<int>> in_opt;
  if (any_in) in_opt = std::move(inn);
  return DegreeSequence::build(std::move(out), std::move(in_opt), *model);
}

void write_degree_sequence(std::ostream& out, const DegreeSequence& seq) {
  out << "model=" << to_string(seq.model()) << '\n';
  for (Index x = 0; x < seq.n(); ++x) {
    out << seq.out_degree(static_cast<Vertex>(x));
    if (seq.has_in_degrees()) out << ',' << seq.in_degree(static_cast<Vertex>(x));
    out << '\n';
  }
}

ProbVector mu_in(const DegreeSequence& seq) { return mu_in(seq, seq.model()); }

ProbVector mu_in(const DegreeSequence& seq, Model model) {
  const Index n = seq.n();
  if (model == Model::OCM) return ProbVector::uniform(n);
  const auto in = seq.in_degrees();
  Eigen::VectorXd w(n);
  const double m = static_cast<double>(seq.m());
  for (Index x = 0; x < n; ++x) w(x) = in[static_cast<std::size_t>(x)] / m;
  return ProbVector(std::move(w));
}

EntropicTime entropic_time(const DegreeSequence& seq) {
  const ProbVector mu = mu_in(seq);
  const auto out = seq.out_degrees();
  Eigen::VectorXd terms(seq.n());
  for (Index x = 0; x < seq.n(); ++x) terms(x) = mu(x) * std::log(static_cast<double>(out[static_cast<std::size_t>(x)]));
  EntropicTime result;
  result.entropy = compensated_sum(terms);
  result.t_ent = std::log(static_cast<double>(seq.n())) / result.entropy;
  return result;
}

WidespreadReport widespread_report(const ProbVector& lambda, double delta, double c1, double c2) {
  if (!(delta > 0.0 && delta <= 0.5) || !(c1 > 0.0) || !(c2 >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "widespread constants out of range");
  }
  const Index n = lambda.size();
  const double nd = static_cast<double>(n);
  WidespreadReport report;
  report.max_mass = lambda.values().maxCoeff();
  report.max_bound = c1 * std::pow(nd, -0.5 - delta);
  const Eigen::VectorXd dev = (1.0 - nd * lambda.values().array()).square().matrix();
  report.ell2_statistic = compensated_sum(dev) / nd;
  report.pass_i = report.max_mass <= report.max_bound;
  report.pass_ii = report.ell2_statistic <= c2;
  return report;
}

double theta(double s) {
  if (s == 1.0) throw Error(ErrorCode::DiscontinuityPoint, "theta is undefined at s = 1");
  return s < 1.0 ? 1.0 : 0.0;
}

double limit_profile(double gamma, double s) {
  if (!(s > 0.0)) throw Error(ErrorCode::InvalidArgument, "s must be positive");
  if (!(gamma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be non-negative");
  if (gamma == 0.0) return theta(s);
  if (std::isinf(gamma)) return std::exp(-s);
  if (s == gamma) throw Error(ErrorCode::DiscontinuityPoint, "profile jumps at s = gamma");
  return std::exp(-s) * (s < gamma ? 1.0 : 0.0);
}

LimitMixingTime limit_mixing_time(double gamma, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must lie in (0,1)");
  if (!(gamma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be non-negative");
  if (gamma == 0.0) return {1.0, TimeUnit::EntropicTime};
  if (std::isinf(gamma)) return {std::log(1.0 / epsilon), TimeUnit::InverseAlpha};
  if (epsilon < std::exp(-gamma)) return {1.0, TimeUnit::EntropicTime};
  return {std::log(1.0 / epsilon) / gamma, TimeUnit::EntropicTime};
}

BranchingConstants rho_and_C(const DegreeSequence& seq) { return rho_and_C(seq, seq.model()); }

BranchingConstants rho_and_C(const DegreeSequence& seq, Model model) {
  const ProbVector mu = mu_in(seq, model);
  const auto out = seq.out_degrees();
  const Index n = seq.n();
  Eigen::VectorXd terms(n);
  for (Index j = 0; j < n; ++j) terms(j) = mu(j) / out[static_cast<std::size_t>(j)];
  BranchingConstants k;
  k.rho = compensated_sum(terms);
  if (model == Model::OCM) {
    k.c = (k.rho - 1.0 / static_cast<double>(n)) / (1.0 - k.rho);
    return k;
  }
  const auto in = seq.in_degrees();
  const double m = static_cast<double>(seq.m());
  for (Index j = 0; j < n; ++j) {
    const double diff = in[static_cast<std::size_t>(j)] - out[static_cast<std::size_t>(j)];
    terms(j) = diff * diff / (m * out[static_cast<std::size_t>(j)]);
  }
  k.c = static_cast<double>(n) / (m * (1.0 - k.rho)) * compensated_sum(terms);
  return k;
}

double gamma_lambda(const ProbVector& lambda, const DegreeSequence& seq) {
  return gamma_lambda(lambda, seq, seq.model());
}

double gamma_lambda(const ProbVector& lambda, const DegreeSequence& seq, Model model) {
  if (lambda.size() != seq.n()) throw Error(ErrorCode::LengthMismatch, "lambda length differs from n");
  const ProbVector mu = mu_in(seq, model);
  const Eigen::VectorXd sq = (lambda.values() - mu.values()).array().square().matrix();
  return 0.5 * static_cast<double>(seq.n()) * compensated_sum(sq);
}

}  // namespace pagemix
