#include "attribex/common.hpp"

#include <limits>

namespace attribex {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMissingFile: return "missing_file";
    case ErrorKind::kBadMagic: return "bad_magic";
    case ErrorKind::kBadVersion: return "bad_version";
    case ErrorKind::kRowMismatch: return "row_mismatch";
    case ErrorKind::kNonFinite: return "non_finite";
    case ErrorKind::kDuplicateId: return "duplicate_id";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kDimensionMismatch: return "dimension_mismatch";
    case ErrorKind::kNotSymmetric: return "not_symmetric";
    case ErrorKind::kNoConvergence: return "no_convergence";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kEmptyClass: return "empty_class";
    case ErrorKind::kMissingArtifact: return "missing_artifact";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kArtifactExists: return "artifact_exists";
    case ErrorKind::kMixedHash: return "mixed_hash";
  }
  return "unknown";
}

double Rng::uniform() {
  // 53 random bits -> [0, 1)
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::kInvalidArgument, "Rng::below(0)");
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return x % n;
}

}  // namespace attribex
