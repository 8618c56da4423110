#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace attribex {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitMissingArtifact = 3,
  kExitStageFailure = 4,
  kExitArtifactExists = 5,
  kExitMixedHash = 6,
};

// `args` excludes the program name. Failures print one line to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace attribex
