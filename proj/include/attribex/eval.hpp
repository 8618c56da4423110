#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "attribex/retrieval.hpp"

namespace attribex {

struct GroundTruth {
  std::map<std::string, std::set<std::string>> relevant;
};

// Mean over relevant positions r of precision@r, divided by n_relevant.
double average_precision(std::span<const std::uint8_t> ranked_relevance, std::size_t n_relevant);

struct MapResult {
  std::map<std::string, double> per_query_ap;
  double map = 0.0;
  std::vector<std::string> excluded;  // queries with no relevant image
};

MapResult mean_average_precision(const std::vector<RankedResult>& results, const GroundTruth& gt);

// cmc[r - 1] = fraction of queries whose first relevant image is at rank <= r.
std::vector<double> cmc(const std::vector<RankedResult>& results, const GroundTruth& gt,
                        std::size_t max_rank);

struct RepeatResult {
  std::uint64_t seed = 0;
  double map = 0.0;
  std::vector<double> cmc;
};

struct EvalReport {
  std::map<std::string, double> per_query_ap;
  double map = 0.0;
  std::vector<double> cmc;
  std::vector<RepeatResult> repeats;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> excluded_queries;
  nlohmann::json config_snapshot = nlohmann::json::object();
};

nlohmann::json report_to_json(const EvalReport& report);
// Columns: lambda, gamma, k, repeat, metric, value. Mean rows use repeat "mean".
void write_cmc_csv(std::ostream& out, const EvalReport& report, double lambda, double gamma,
                   std::size_t k);

}  // namespace attribex
