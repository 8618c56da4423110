#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace attribex {

struct ExperimentSpec {
  std::size_t n_train_instances = 40;
  std::size_t n_test_instances = 20;
  std::size_t views = 8;
  std::size_t dim = 64;
  double view_noise = 0.5;
  std::size_t latent_factors = 6;
  double instance_residual = 0.35;
  double image_noise = 1.5;
  std::uint64_t seed = 42;
  double lambda = 2.0;
  double gamma = 7.0;
  std::vector<std::size_t> ks = {10, 25, 50};
  double c = 1.0;
  int k_nn = 10;
  std::size_t repeats = 5;
};

nlohmann::json spec_to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const nlohmann::json& j);

/// Two pipeline settings ("a" and "b") compared on the same generated data.
struct ComparisonRecord {
  std::string experiment;
  std::string label_a;
  std::string label_b;
  ExperimentSpec spec;
  std::vector<std::size_t> ks;
  // Indexed [k][repeat].
  std::vector<std::vector<double>> map_a;
  std::vector<std::vector<double>> map_b;
  // Indexed [repeat]; only filled by the redundancy experiment.
  std::vector<double> corr_a;
  std::vector<double> corr_b;

  double mean_map_a(std::size_t k_index) const;
  double mean_map_b(std::size_t k_index) const;
  // Repeats where b strictly beats a (or ties, when `ties_count`).
  std::size_t wins_b(std::size_t k_index, bool ties_count = false) const;
  double mean_corr_a() const;
  double mean_corr_b() const;
};

nlohmann::json record_to_json(const ComparisonRecord& r);

// a: lambda = 0, b: lambda = spec.lambda.
ComparisonRecord run_sharing_experiment(const ExperimentSpec& spec);
// a: gamma = 0.01, b: gamma = spec.gamma. Also records column correlations.
ComparisonRecord run_redundancy_experiment(const ExperimentSpec& spec, double gamma_low = 0.01);
// a: raw-feature cosine (same value for every k), b: attribute embedding.
ComparisonRecord run_attr_vs_raw_experiment(const ExperimentSpec& spec);

// One row per (experiment, k, setting): experiment, k, setting, mean_map, wins.
void write_summary_csv(std::ostream& out, const std::vector<ComparisonRecord>& records);

}  // namespace attribex
