#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace osep {

// Thrown when a computation would exceed the configured size limits.
struct SizingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad arguments: wrong dimensions, unknown ids, malformed config.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input violates a numeric precondition (non-unitary, unnormalized, ...).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Budget {
  int max_total_qubits = 14;     // state vectors and low-rank factors
  int max_dense_qubits = 12;     // dense square matrices
  int max_twirl_log2 = 12;       // d^ell for twirl computations
  int max_dense_oracle_n = 5;    // largest n with a materialized swap oracle
  std::int64_t max_poly_degree = std::int64_t(1) << 22;
};

inline Budget& budget() {
  static Budget b;
  return b;
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

inline void require_size(bool ok, const std::string& what) {
  if (!ok) throw SizingError(what);
}

inline constexpr double kUnitaryTol = 1e-9;
inline constexpr double kSupportTau = 1e-10;

}  // namespace osep
