#pragma once

#include <stdexcept>
#include <string>

namespace lt {

// Error taxonomy. The CLI maps these onto its exit codes (see tools/lt.cpp):
// config/usage -> 1, convergence -> 2, cut locus / degenerate jet -> 3,
// ambiguous spectral gap -> 4.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Evaluation left the admissible window around the cost's smooth locus.
struct CutLocusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// det(b) fell below the invertibility floor.
struct SingularJetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A 1-form expected to be closed has too large an exterior derivative.
struct NotClosedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// w lost positivity at an accepted Newton iterate.
struct NonConvexBreakdownError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Kernel dimension could not be certified by the requested gap ratio.
struct SpectralGapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DensityMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lt
