#include "pagemix/graph_gen.hpp"

#include "pagemix/rng.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>

namespace pagemix {

Digraph Digraph::from_adjacency(const std::vector<std::vector<Vertex>>& adjacency, Provenance provenance) {
  std::vector<std::int64_t> offsets;
  offsets.reserve(adjacency.size() + 1);
  offsets.push_back(0);
  std::vector<Vertex> targets;
  for (const auto& row : adjacency) {
    targets.insert(targets.end(), row.begin(), row.end());
    offsets.push_back(static_cast<std::int64_t>(targets.size()));
  }
  return from_csr(std::move(offsets), std::move(targets), provenance);
}

Digraph Digraph::from_csr(std::vector<std::int64_t> offsets, std::vector<Vertex> targets, Provenance provenance) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != static_cast<std::int64_t>(targets.size())) {
    throw Error(ErrorCode::InvalidArgument, "inconsistent adjacency offsets");
  }
  const auto n = static_cast<Vertex>(offsets.size() - 1);
  for (const Vertex y : targets) {
    if (y < 0 || y >= n) throw Error(ErrorCode::InvalidArgument, "edge target out of range");
  }
  Digraph g;
  g.out_offsets_ = std::move(offsets);
  g.out_targets_ = std::move(targets);
  g.provenance_ = provenance;
  g.build_reverse_index();
  return g;
}

void Digraph::build_reverse_index() {
  const auto n = static_cast<std::size_t>(this->n());
  in_offsets_.assign(n + 1, 0);
  for (const Vertex y : out_targets_) ++in_offsets_[static_cast<std::size_t>(y) + 1];
  for (std::size_t y = 0; y < n; ++y) in_offsets_[y + 1] += in_offsets_[y];
  in_sources_.resize(out_targets_.size());
  std::vector<std::int64_t> cursor(in_offsets_.begin(), in_offsets_.end() - 1);
  for (std::size_t x = 0; x < n; ++x) {
    for (auto e = out_offsets_[x]; e < out_offsets_[x + 1]; ++e) {
      const auto y = static_cast<std::size_t>(out_targets_[static_cast<std::size_t>(e)]);
      in_sources_[static_cast<std::size_t>(cursor[y]++)] = static_cast<Vertex>(x);
    }
  }
}

int Digraph::max_degree() const {
  int delta = 0;
  for (Vertex x = 0; x < static_cast<Vertex>(n()); ++x) delta = std::max({delta, out_degree(x), in_degree(x)});
  return delta;
}

std::vector<std::int64_t> dcm_matching(const DegreeSequence& seq, std::uint64_t seed) {
  if (seq.model() != Model::DCM) throw Error(ErrorCode::InvalidArgument, "DCM sampling needs a DCM sequence");
  std::vector<std::int64_t> heads(static_cast<std::size_t>(seq.m()));
  for (std::size_t i = 0; i < heads.size(); ++i) heads[i] = static_cast<std::int64_t>(i);
  Rng rng(seed);
  for (std::size_t i = heads.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(heads[i - 1], heads[j]);
  }
  return heads;
}

Digraph sample_dcm(const DegreeSequence& seq, std::uint64_t seed) {
  const auto matching = dcm_matching(seq, seed);
  const auto in = seq.in_degrees();
  std::vector<Vertex> head_owner;
  head_owner.reserve(static_cast<std::size_t>(seq.m()));
  for (Vertex y = 0; y < static_cast<Vertex>(seq.n()); ++y) {
    head_owner.insert(head_owner.end(), static_cast<std::size_t>(in[static_cast<std::size_t>(y)]), y);
  }
  std::vector<std::int64_t> offsets(static_cast<std::size_t>(seq.n()) + 1, 0);
  for (Vertex x = 0; x < static_cast<Vertex>(seq.n()); ++x) {
    offsets[static_cast<std::size_t>(x) + 1] = offsets[static_cast<std::size_t>(x)] + seq.out_degree(x);
  }
  std::vector<Vertex> targets(matching.size());
  for (std::size_t tail = 0; tail < matching.size(); ++tail) {
    targets[tail] = head_owner[static_cast<std::size_t>(matching[tail])];
  }
  return Digraph::from_csr(std::move(offsets), std::move(targets), {Model::DCM, seed, seq.hash()});
}

Digraph sample_ocm(const DegreeSequence& seq, std::uint64_t seed) {
  const Index n = seq.n();
  for (const int d : seq.out_degrees()) {
    if (d > n) throw Error(ErrorCode::DegreeExceedsN, "out-degree " + std::to_string(d) + " exceeds n");
  }
  Rng rng(seed);
  std::vector<std::int64_t> offsets(static_cast<std::size_t>(n) + 1, 0);
  std::vector<Vertex> targets;
  targets.reserve(static_cast<std::size_t>(seq.m()));
  // Partial Fisher-Yates over the virtual identity array [0, n); only the
  // displaced positions are stored.
  std::vector<std::pair<std::int64_t, std::int64_t>> scratch;
  auto lookup = [&scratch](std::int64_t pos) {
    for (const auto& [k, v] : scratch) {
      if (k == pos) return v;
    }
    return pos;
  };
  auto store = [&scratch](std::int64_t pos, std::int64_t value) {
    for (auto& [k, v] : scratch) {
      if (k == pos) {
        v = value;
        return;
      }
    }
    scratch.emplace_back(pos, value);
  };
  for (Vertex x = 0; x < static_cast<Vertex>(n); ++x) {
    const int d = seq.out_degree(x);
    scratch.clear();
    const auto row_begin = targets.size();
    for (std::int64_t i = 0; i < d; ++i) {
      const auto j = i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n - i)));
      const auto at_i = lookup(i);
      const auto at_j = lookup(j);
      store(j, at_i);
      store(i, at_j);
      targets.push_back(static_cast<Vertex>(at_j));
    }
    std::sort(targets.begin() + static_cast<std::ptrdiff_t>(row_begin), targets.end());
    offsets[static_cast<std::size_t>(x) + 1] = static_cast<std::int64_t>(targets.size());
  }
  return Digraph::from_csr(std::move(offsets), std::move(targets), {Model::OCM, seed, seq.hash()});
}

Digraph sample_graph(const DegreeSequence& seq, std::uint64_t seed) {
  return seq.model() == Model::DCM ? sample_dcm(seq, seed) : sample_ocm(seq, seed);
}

Digraph sample_simple(const DegreeSequence& seq, std::uint64_t seed, int max_retries) {
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    auto g = sample_graph(seq, substream_seed(seed, static_cast<std::uint64_t>(attempt)));
    if (inspect_simple(g).is_simple) return g;
  }
  throw Error(ErrorCode::RetryLimit, "no simple graph after " + std::to_string(max_retries) + " attempts");
}

SimpleReport inspect_simple(const Digraph& g) {
  SimpleReport report;
  std::vector<Vertex> row;
  for (Vertex x = 0; x < static_cast<Vertex>(g.n()); ++x) {
    const auto out = g.out_neighbors(x);
    row.assign(out.begin(), out.end());
    std::sort(row.begin(), row.end());
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i] == x) ++report.self_loops;
      if (i > 0 && row[i] == row[i - 1] && (i < 2 || row[i - 1] != row[i - 2])) ++report.multi_edge_pairs;
    }
  }
  report.is_simple = report.self_loops == 0 && report.multi_edge_pairs == 0;
  return report;
}

void write_graph(std::ostream& out, const Digraph& g) {
  const auto& p = g.provenance();
  out << g.n() << ' ' << g.m() << ' ' << to_string(p.model) << ' ' << p.seed << '\n';
  for (Vertex x = 0; x < static_cast<Vertex>(g.n()); ++x) {
    bool first = true;
    for (const Vertex y : g.out_neighbors(x)) {
      if (!first) out << ' ';
      out << y;
      first = false;
    }
    out << '\n';
  }
}

Digraph read_graph(std::istream& in) {
  std::string line;
  do {
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty graph file");
  } while (!line.empty() && line.front() == '#');
  std::istringstream header(line);
  std::int64_t n = 0;
  std::int64_t m = 0;
  std::string model_text;
  std::uint64_t seed = 0;
  if (!(header >> n >> m >> model_text >> seed) || n <= 0 || m < 0) {
    throw Error(ErrorCode::ParseError, "bad graph header '" + line + "'");
  }
  const Model model = parse_model(model_text);
  std::vector<std::int64_t> offsets;
  offsets.reserve(static_cast<std::size_t>(n) + 1);
  offsets.push_back(0);
  std::vector<Vertex> targets;
  targets.reserve(static_cast<std::size_t>(m));
  for (std::int64_t x = 0; x < n; ++x) {
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "graph file ends before vertex " + std::to_string(x));
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
      if (p == end) break;
      Vertex y = 0;
      const auto [next, ec] = std::from_chars(p, end, y);
      if (ec != std::errc{}) throw Error(ErrorCode::ParseError, "bad target on line for vertex " + std::to_string(x));
      targets.push_back(y);
      p = next;
    }
    offsets.push_back(static_cast<std::int64_t>(targets.size()));
  }
  if (static_cast<std::int64_t>(targets.size()) != m) throw Error(ErrorCode::ParseError, "edge count differs from header");

  std::vector<int> out_deg(static_cast<std::size_t>(n));
  std::vector<int> in_deg(static_cast<std::size_t>(n), 0);
  for (std::size_t x = 0; x < out_deg.size(); ++x) out_deg[x] = static_cast<int>(offsets[x + 1] - offsets[x]);
  for (const Vertex y : targets) {
    if (y < 0 || y >= n) throw Error(ErrorCode::ParseError, "edge target out of range");
    ++in_deg[static_cast<std::size_t>(y)];
  }
  const auto hash = sequence_hash(model, out_deg, model == Model::DCM ? std::span<const int>(in_deg) : std::span<const int>());
  return Digraph::from_csr(std::move(offsets), std::move(targets), {model, seed, hash});
}

}  // namespace pagemix
