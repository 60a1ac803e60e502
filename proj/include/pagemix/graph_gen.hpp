#pragma once

#include "pagemix/common.hpp"
#include "pagemix/degree_model.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace pagemix {

struct Provenance {
  Model model = Model::DCM;
  std::uint64_t seed = 0;
  std::uint64_t sequence_hash = 0;
};

/// Directed multigraph in compressed adjacency form. Out-lists keep edge
/// multiplicity; the reverse index lists, for each vertex, the sources of its
/// in-edges (with multiplicity, sources ascending).
class Digraph {
 public:
  Digraph() = default;

  static Digraph from_adjacency(const std::vector<std::vector<Vertex>>& adjacency, Provenance provenance = {});
  static Digraph from_csr(std::vector<std::int64_t> offsets, std::vector<Vertex> targets, Provenance provenance);

  Index n() const { return static_cast<Index>(out_offsets_.empty() ? 0 : out_offsets_.size() - 1); }
  std::int64_t m() const { return static_cast<std::int64_t>(out_targets_.size()); }

  std::span<const Vertex> out_neighbors(Vertex x) const {
    const auto b = out_offsets_[static_cast<std::size_t>(x)];
    return {out_targets_.data() + b, static_cast<std::size_t>(out_offsets_[static_cast<std::size_t>(x) + 1] - b)};
  }
  std::span<const Vertex> in_neighbors(Vertex y) const {
    const auto b = in_offsets_[static_cast<std::size_t>(y)];
    return {in_sources_.data() + b, static_cast<std::size_t>(in_offsets_[static_cast<std::size_t>(y) + 1] - b)};
  }
  int out_degree(Vertex x) const { return static_cast<int>(out_neighbors(x).size()); }
  int in_degree(Vertex y) const { return static_cast<int>(in_neighbors(y).size()); }
  int max_degree() const;

  const Provenance& provenance() const { return provenance_; }
  const std::vector<std::int64_t>& out_offsets() const { return out_offsets_; }
  const std::vector<Vertex>& out_targets() const { return out_targets_; }

  bool operator==(const Digraph& other) const {
    return out_offsets_ == other.out_offsets_ && out_targets_ == other.out_targets_;
  }

 private:
  void build_reverse_index();

  std::vector<std::int64_t> out_offsets_;
  std::vector<Vertex> out_targets_;
  std::vector<std::int64_t> in_offsets_;
  std::vector<Vertex> in_sources_;
  Provenance provenance_;
};

/// Uniform bijection from tails to heads. Tails and heads are numbered
/// vertex-major (vertex 0's stubs first); entry i is the head matched to tail i.
/// The head array is shuffled once by Fisher-Yates driven by Rng(seed).
std::vector<std::int64_t> dcm_matching(const DegreeSequence& seq, std::uint64_t seed);

/// Directed configuration model sample. Self-loops and multi-edges are kept.
Digraph sample_dcm(const DegreeSequence& seq, std::uint64_t seed);

/// Out-configuration model sample: each vertex independently gets a uniform
/// d+_x-subset of [0, n) as targets (partial Fisher-Yates), listed ascending.
/// Throws DegreeExceedsN if some d+_x > n.
Digraph sample_ocm(const DegreeSequence& seq, std::uint64_t seed);

/// Dispatches on seq.model().
Digraph sample_graph(const DegreeSequence& seq, std::uint64_t seed);

/// Rejection sampling conditioned on no self-loops and no multi-edges. Attempt
/// k uses substream_seed(seed, k). Throws RetryLimit after max_retries attempts.
Digraph sample_simple(const DegreeSequence& seq, std::uint64_t seed, int max_retries = 1000);

struct SimpleReport {
  bool is_simple = true;
  std::int64_t self_loops = 0;
  std::int64_t multi_edge_pairs = 0;  ///< ordered pairs (x,y) with m(x,y) >= 2
};

SimpleReport inspect_simple(const Digraph& g);

/// Header "n m model seed", then one line per vertex with its out-neighbours.
/// read_graph skips "#" lines before the header.
void write_graph(std::ostream& out, const Digraph& g);
Digraph read_graph(std::istream& in);

}  // namespace pagemix
