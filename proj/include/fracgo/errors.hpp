#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracgo {

// All recoverable failures are thrown; callers that can retry (resonance
// jitter, theta refinement) catch the specific type.

struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SymbolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fourier division would hit a near-resonant frequency; carries the offenders.
struct ResonanceError : std::runtime_error {
  std::vector<std::array<double, 2>> offending;
  ResonanceError(const std::string& msg, std::vector<std::array<double, 2>> ks)
      : std::runtime_error(msg), offending(std::move(ks)) {}
};

// Grid too coarse for the requested frequency; carries required sizes.
struct ResolutionError : std::runtime_error {
  std::array<long, 2> required{0, 0};
  ResolutionError(const std::string& msg, std::array<long, 2> req)
      : std::runtime_error(msg), required(req) {}
};

struct QuadratureError : std::runtime_error {
  double estimate_coarse = 0, estimate_fine = 0;
  QuadratureError(const std::string& msg, double a, double b)
      : std::runtime_error(msg), estimate_coarse(a), estimate_fine(b) {}
};

struct TrappedRayError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CoverageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegeneratePhaseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RegimeError : DomainError {
  using DomainError::DomainError;
};

struct SupportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FrontError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CgBreakdownError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fracgo
