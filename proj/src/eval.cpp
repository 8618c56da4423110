#include "attribex/eval.hpp"

#include <ostream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace attribex {

double average_precision(std::span<const std::uint8_t> ranked_relevance, std::size_t n_relevant) {
  if (n_relevant == 0) throw Error(ErrorKind::kInvalidArgument, "average_precision: n_relevant must be >= 1");
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < ranked_relevance.size(); ++r) {
    if (ranked_relevance[r] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  if (hits > n_relevant) {
    throw Error(ErrorKind::kInvalidArgument,
                fmt::format("average_precision: {} relevant in list but n_relevant = {}", hits, n_relevant));
  }
  return sum / static_cast<double>(n_relevant);
}

namespace {

const std::set<std::string>& relevant_for(const GroundTruth& gt, const std::string& query) {
  const auto it = gt.relevant.find(query);
  if (it == gt.relevant.end()) {
    throw Error(ErrorKind::kInvalidArgument, fmt::format("no ground truth for query '{}'", query));
  }
  return it->second;
}

}  // namespace

MapResult mean_average_precision(const std::vector<RankedResult>& results, const GroundTruth& gt) {
  MapResult out;
  std::vector<std::uint8_t> rel;
  double sum = 0.0;
  for (const auto& r : results) {
    const auto& relevant = relevant_for(gt, r.query_id);
    if (relevant.empty()) {
      out.excluded.push_back(r.query_id);
      continue;
    }
    rel.assign(r.ranking.size(), 0);
    for (std::size_t i = 0; i < r.ranking.size(); ++i) rel[i] = relevant.count(r.ranking[i].image_id) > 0 ? 1 : 0;
    const double ap = average_precision(rel, relevant.size());
    out.per_query_ap[r.query_id] = ap;
    sum += ap;
  }
  if (!out.excluded.empty()) {
    spdlog::info("{} queries without relevant images excluded from mAP", out.excluded.size());
  }
  if (!out.per_query_ap.empty()) out.map = sum / static_cast<double>(out.per_query_ap.size());
  return out;
}

std::vector<double> cmc(const std::vector<RankedResult>& results, const GroundTruth& gt, std::size_t max_rank) {
  if (max_rank < 1) throw Error(ErrorKind::kInvalidArgument, "cmc: max_rank must be >= 1");
  if (results.empty()) throw Error(ErrorKind::kInvalidArgument, "cmc: no queries");
  std::vector<double> counts(max_rank, 0.0);
  for (const auto& r : results) {
    const auto& relevant = relevant_for(gt, r.query_id);
    if (relevant.empty()) {
      throw Error(ErrorKind::kInvalidArgument, fmt::format("cmc: query '{}' has no relevant images", r.query_id));
    }
    for (std::size_t i = 0; i < r.ranking.size() && i < max_rank; ++i) {
      if (relevant.count(r.ranking[i].image_id) > 0) {
        for (std::size_t k = i; k < max_rank; ++k) counts[k] += 1.0;
        break;
      }
    }
  }
  for (auto& c : counts) c /= static_cast<double>(results.size());
  return counts;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["map"] = report.map;
  j["per_query_ap"] = report.per_query_ap;
  j["cmc"] = report.cmc;
  j["seeds"] = report.seeds;
  auto repeats = nlohmann::json::array();
  for (const auto& r : report.repeats) repeats.push_back({{"seed", r.seed}, {"map", r.map}, {"cmc", r.cmc}});
  j["repeats"] = std::move(repeats);
  j["excluded_queries"] = report.excluded_queries;
  j["config"] = report.config_snapshot;
  return j;
}

void write_cmc_csv(std::ostream& out, const EvalReport& report, double lambda, double gamma, std::size_t k) {
  out << "lambda,gamma,k,repeat,metric,value\n";
  auto emit = [&](const std::string& repeat, double map, const std::vector<double>& curve) {
    out << fmt::format("{},{},{},{},map,{}\n", lambda, gamma, k, repeat, map);
    for (std::size_t r = 0; r < curve.size(); ++r) {
      out << fmt::format("{},{},{},{},cmc@{},{}\n", lambda, gamma, k, repeat, r + 1, curve[r]);
    }
  };
  for (std::size_t i = 0; i < report.repeats.size(); ++i) {
    emit(std::to_string(i), report.repeats[i].map, report.repeats[i].cmc);
  }
  emit("mean", report.map, report.cmc);
}

}  // namespace attribex
