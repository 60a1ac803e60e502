#include "pagemix/common.hpp"

#include <atomic>
#include <cstdio>

namespace pagemix {

namespace {
std::atomic<unsigned> g_threads{1};
}

std::string_view to_string(Model model) {
  return model == Model::DCM ? "DCM" : "OCM";
}

Model parse_model(std::string_view text) {
  if (text == "DCM" || text == "dcm" || text == "1") return Model::DCM;
  if (text == "OCM" || text == "ocm" || text == "2") return Model::OCM;
  throw Error(ErrorCode::ParseError, "unknown model '" + std::string(text) + "'");
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SumMismatch: return "SumMismatch";
    case ErrorCode::MinDegree: return "MinDegree";
    case ErrorCode::MissingInDegrees: return "MissingInDegrees";
    case ErrorCode::UnexpectedInDegrees: return "UnexpectedInDegrees";
    case ErrorCode::DegreeExceedsN: return "DegreeExceedsN";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::DiscontinuityPoint: return "DiscontinuityPoint";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::AlphaZero: return "AlphaZero";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::EtaTooLarge: return "EtaTooLarge";
    case ErrorCode::BoundVacuous: return "BoundVacuous";
    case ErrorCode::BoundViolation: return "BoundViolation";
    case ErrorCode::RetryLimit: return "RetryLimit";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

void set_thread_count(unsigned threads) { g_threads.store(std::max(1u, threads)); }

unsigned thread_count() { return g_threads.load(); }

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t hash = basis;
  for (const unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

}  // namespace pagemix
