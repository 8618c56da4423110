#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "attribex/dataset.hpp"
#include "attribex/pipeline.hpp"
#include "attribex/synthcheck.hpp"

namespace attribex {

struct SweepGrid {
  std::vector<double> lambdas = {0.0, 0.5, 2.0, 8.0};
  std::vector<double> gammas = {0.01, 1.0, 7.0};
  std::vector<std::size_t> ks = {10, 25, 50, 100};
};

/// Everything a run needs. The top-level seed drives the generator, the
/// repeated splits and the synthetic experiments.
struct RunConfig {
  std::uint64_t seed = 42;
  std::string run_dir = "run";
  // When set, `synth` imports this corpus instead of generating one.
  std::string corpus_dir;
  SyntheticOptions synth;
  PipelineConfig pipeline;
  std::size_t eval_repeats = 0;  // 0: evaluate the stored rankings only
  SweepGrid sweep;
  ExperimentSpec experiments;

  RunConfig();
};

// Unknown keys and out-of-range values throw ErrorKind::kConfig.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& c);

// Copies the top-level seed into every section that consumes one.
void propagate_seed(RunConfig& c);
void validate(const RunConfig& c);

// Applies a dotted override such as "pipeline.lambda=3". The value is parsed
// as JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

// FNV-1a over the canonical JSON, run_dir excluded. 16 hex digits.
std::string config_hash(const RunConfig& c);

}  // namespace attribex
