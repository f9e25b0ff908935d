#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sdrl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Error categories. The CLI maps each one to a distinct exit code.
enum class ErrorKind {
  kInvalidArgument,    // precondition violated by the caller
  kNonFinite,          // NaN / Inf in numeric input
  kMissingFile,        // input file does not exist or cannot be opened
  kSchema,             // malformed, truncated, or structurally invalid file
  kVersion,            // file format version not supported
  kDimension,          // dimensionality inconsistency between artifacts
  kTooFewSamples,      // not enough data to proceed
  kDegenerate,         // every fitted candidate collapsed to an empty model
  kUnreachable,        // collection target could not be met
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

// Throws kNonFinite naming the first offending (row, col) of `m`.
void require_finite(const Matrix& m, const std::string& what);
void require_finite(const Vector& v, const std::string& what);

// SplitMix64 finalizer over (seed, stream); used to derive independent
// seeds for episodes, stages, and candidates.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Lower-case hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

}  // namespace sdrl
