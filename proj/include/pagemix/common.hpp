#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace pagemix {

using Vertex = std::int32_t;
using Index = Eigen::Index;

enum class Model { DCM, OCM };

std::string_view to_string(Model model);
Model parse_model(std::string_view text);

enum class ErrorCode {
  InvalidArgument,
  EmptySequence,
  LengthMismatch,
  SumMismatch,
  MinDegree,
  MissingInDegrees,
  UnexpectedInDegrees,
  DegreeExceedsN,
  NotNormalized,
  DiscontinuityPoint,
  NoConvergence,
  AlphaZero,
  HorizonTooShort,
  EtaTooLarge,
  BoundVacuous,
  BoundViolation,
  RetryLimit,
  ParseError,
  ConfigInvalid,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Worker count used by the row-parallel kernels and replica loops.
/// Results never depend on it: every output element has a single writer and a
/// fixed reduction order.
void set_thread_count(unsigned threads);
unsigned thread_count();

namespace detail {
// Set while a thread runs a parallel_for chunk; nested loops then run inline.
inline thread_local bool in_parallel_region = false;

struct RegionGuard {
  bool saved = in_parallel_region;
  RegionGuard() { in_parallel_region = true; }
  ~RegionGuard() { in_parallel_region = saved; }
};
}  // namespace detail

/// Runs body(begin, end) over a static contiguous partition of [0, count).
/// Calls made from inside another parallel_for run on the calling thread.
template <typename Body>
void parallel_for(Index count, Body&& body) {
  const auto workers = static_cast<Index>(std::max(1u, thread_count()));
  if (workers == 1 || count < 2 * workers || detail::in_parallel_region) {
    body(Index{0}, count);
    return;
  }
  detail::RegionGuard guard;
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  const Index chunk = (count + workers - 1) / workers;
  for (Index w = 1; w < workers; ++w) {
    const Index begin = std::min(count, w * chunk);
    const Index end = std::min(count, begin + chunk);
    if (begin < end) pool.emplace_back([&body, begin, end] {
        detail::RegionGuard inner;
        body(begin, end);
      });
  }
  body(Index{0}, std::min(count, chunk));
}

/// body(i) for every i in [0, count), partitioned as parallel_for.
template <typename Body>
void parallel_each(Index count, Body&& body) {
  parallel_for(count, [&body](Index begin, Index end) {
    for (Index i = begin; i < end; ++i) body(i);
  });
}

/// Neumaier-compensated sum in index order.
template <typename Derived>
typename Derived::Scalar compensated_sum(const Eigen::DenseBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  Scalar sum{0};
  Scalar carry{0};
  for (Index i = 0; i < values.size(); ++i) {
    const Scalar v = values.derived().coeff(i);
    const Scalar t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

inline double compensated_sum(const std::vector<double>& values) {
  return compensated_sum(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size())));
}

/// FNV-1a, 64 bit.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

/// Round-trippable decimal (%.17g).
std::string format_double(double value);

}  // namespace pagemix
