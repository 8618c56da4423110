#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace attribex {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class ErrorKind {
  kMissingFile,
  kBadMagic,
  kBadVersion,
  kRowMismatch,
  kNonFinite,
  kDuplicateId,
  kParse,
  kInvalidArgument,
  kDimensionMismatch,
  kNotSymmetric,
  kNoConvergence,
  kDegenerate,
  kEmptyClass,
  kMissingArtifact,
  kConfig,
  kArtifactExists,
  kMixedHash,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Portable deterministic random source. The standard distributions are
// implementation-defined, so sampling is done here on top of mt19937_64 output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();                    // [0, 1)
  double normal();                     // standard normal, Box-Muller
  std::uint64_t below(std::uint64_t n);  // [0, n)

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace attribex
