#include "attribex/synthcheck.hpp"

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>

#include <fmt/format.h>

#include "attribex/pipeline.hpp"

namespace attribex {

nlohmann::json spec_to_json(const ExperimentSpec& s) {
  return {{"n_train_instances", s.n_train_instances},
          {"n_test_instances", s.n_test_instances},
          {"views", s.views},
          {"dim", s.dim},
          {"view_noise", s.view_noise},
          {"latent_factors", s.latent_factors},
          {"instance_residual", s.instance_residual},
          {"image_noise", s.image_noise},
          {"seed", s.seed},
          {"lambda", s.lambda},
          {"gamma", s.gamma},
          {"ks", s.ks},
          {"c", s.c},
          {"k_nn", s.k_nn},
          {"repeats", s.repeats}};
}

ExperimentSpec spec_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {"n_train_instances", "n_test_instances", "views", "dim",
                                                 "view_noise", "latent_factors", "instance_residual",
                                                 "image_noise", "seed", "lambda", "gamma",
                                                 "ks", "c", "k_nn", "repeats"};
  if (!j.is_object()) throw Error(ErrorKind::kConfig, "experiments: expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorKind::kConfig, fmt::format("experiments: unknown key '{}'", key));
    }
  }
  ExperimentSpec s;
  try {
    s.n_train_instances = j.value("n_train_instances", s.n_train_instances);
    s.n_test_instances = j.value("n_test_instances", s.n_test_instances);
    s.views = j.value("views", s.views);
    s.dim = j.value("dim", s.dim);
    s.view_noise = j.value("view_noise", s.view_noise);
    s.latent_factors = j.value("latent_factors", s.latent_factors);
    s.instance_residual = j.value("instance_residual", s.instance_residual);
    s.image_noise = j.value("image_noise", s.image_noise);
    s.seed = j.value("seed", s.seed);
    s.lambda = j.value("lambda", s.lambda);
    s.gamma = j.value("gamma", s.gamma);
    s.ks = j.value("ks", s.ks);
    s.c = j.value("c", s.c);
    s.k_nn = j.value("k_nn", s.k_nn);
    s.repeats = j.value("repeats", s.repeats);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, fmt::format("experiments: {}", e.what()));
  }
  if (s.ks.empty() || std::find(s.ks.begin(), s.ks.end(), std::size_t{0}) != s.ks.end()) {
    throw Error(ErrorKind::kConfig, "experiments: ks must be nonempty and positive");
  }
  if (s.repeats == 0) throw Error(ErrorKind::kConfig, "experiments: repeats must be >= 1");
  if (s.n_train_instances < 2 || s.n_test_instances < 1 || s.views < 2) {
    throw Error(ErrorKind::kConfig, "experiments: need >= 2 training instances, >= 1 test instance, >= 2 views");
  }
  return s;
}

namespace {

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct RepeatData {
  FeatureDataset train;
  FeatureDataset test;
  QuerySet queries;
};

RepeatData make_repeat(const ExperimentSpec& spec, std::size_t r) {
  SyntheticOptions o;
  o.n_instances = spec.n_train_instances + spec.n_test_instances;
  o.n_train = spec.n_train_instances;
  o.views_per_instance = spec.views;
  o.dim = spec.dim;
  o.view_noise = spec.view_noise;
  o.latent_factors = spec.latent_factors;
  o.instance_residual = spec.instance_residual;
  o.image_noise = spec.image_noise;
  o.seed = spec.seed + r;
  const FeatureDataset all = generate_synthetic(o);
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (std::size_t i = 0; i < all.n_images(); ++i) {
    (all.image(i).split == Split::kTrain ? train_rows : test_rows).push_back(i);
  }
  RepeatData d{all.subset(train_rows), all.subset(test_rows), {}};
  d.queries = build_queries(d.test, Protocol::kAllVsAll, true);
  return d;
}

PipelineConfig base_config(const ExperimentSpec& spec) {
  PipelineConfig c;
  c.lambda = spec.lambda;
  c.gamma = spec.gamma;
  c.k = *std::max_element(spec.ks.begin(), spec.ks.end());
  c.k_nn = spec.k_nn;
  c.c = spec.c;
  c.protocol = Protocol::kAllVsAll;
  c.max_rank = 20;
  return c;
}

ComparisonRecord blank_record(const ExperimentSpec& spec, std::string name, std::string a, std::string b) {
  ComparisonRecord rec;
  rec.experiment = std::move(name);
  rec.label_a = std::move(a);
  rec.label_b = std::move(b);
  rec.spec = spec;
  rec.ks = spec.ks;
  rec.map_a.assign(spec.ks.size(), {});
  rec.map_b.assign(spec.ks.size(), {});
  return rec;
}

struct RepeatOutcome {
  std::vector<double> map_a;  // per k
  std::vector<double> map_b;
  double corr_a = 0.0;
  double corr_b = 0.0;
};

std::vector<double> prefix_maps(const RepeatData& d, const TrainedModel& model, const PipelineConfig& config,
                                const std::vector<std::size_t>& ks) {
  const EmbeddedSet e = embed_dataset(model, d.test);
  std::vector<double> out;
  for (auto k : ks) out.push_back(evaluate_prefix(d.test, d.queries, e, std::min(k, model.attributes.k()), config).map);
  return out;
}

// Repeats are independent; each fills its own slot, so the record does not
// depend on scheduling.
template <typename Fn>
ComparisonRecord run_repeats(const ExperimentSpec& spec, ComparisonRecord rec, bool record_corr, Fn&& one) {
  std::vector<RepeatOutcome> outcomes(spec.repeats);
  std::exception_ptr failure;
  std::mutex failure_mutex;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t r = 0; r < spec.repeats; ++r) {
    try {
      outcomes[r] = one(make_repeat(spec, r));
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  for (const auto& o : outcomes) {
    for (std::size_t ki = 0; ki < spec.ks.size(); ++ki) {
      rec.map_a[ki].push_back(o.map_a[ki]);
      rec.map_b[ki].push_back(o.map_b[ki]);
    }
    if (record_corr) {
      rec.corr_a.push_back(o.corr_a);
      rec.corr_b.push_back(o.corr_b);
    }
  }
  return rec;
}

using Tweak = std::function<void(PipelineConfig&)>;

ComparisonRecord compare_configs(const ExperimentSpec& spec, ComparisonRecord rec, const Tweak& tweak_a,
                                 const Tweak& tweak_b, bool record_corr) {
  return run_repeats(spec, std::move(rec), record_corr, [&](const RepeatData& d) {
    PipelineConfig ca = base_config(spec);
    PipelineConfig cb = base_config(spec);
    tweak_a(ca);
    tweak_b(cb);
    const TrainedModel ma = train_model(d.train, ca);
    const TrainedModel mb = train_model(d.train, cb);
    RepeatOutcome o;
    o.map_a = prefix_maps(d, ma, ca, spec.ks);
    o.map_b = prefix_maps(d, mb, cb, spec.ks);
    o.corr_a = mean_abs_column_correlation(ma.attributes.a);
    o.corr_b = mean_abs_column_correlation(mb.attributes.a);
    return o;
  });
}

}  // namespace

double ComparisonRecord::mean_map_a(std::size_t k_index) const { return mean(map_a.at(k_index)); }
double ComparisonRecord::mean_map_b(std::size_t k_index) const { return mean(map_b.at(k_index)); }
double ComparisonRecord::mean_corr_a() const { return mean(corr_a); }
double ComparisonRecord::mean_corr_b() const { return mean(corr_b); }

std::size_t ComparisonRecord::wins_b(std::size_t k_index, bool ties_count) const {
  const auto& a = map_a.at(k_index);
  const auto& b = map_b.at(k_index);
  std::size_t wins = 0;
  for (std::size_t r = 0; r < a.size() && r < b.size(); ++r) {
    if (b[r] > a[r] || (ties_count && b[r] == a[r])) ++wins;
  }
  return wins;
}

nlohmann::json record_to_json(const ComparisonRecord& r) {
  nlohmann::json j = {{"experiment", r.experiment}, {"label_a", r.label_a}, {"label_b", r.label_b},
                      {"spec", spec_to_json(r.spec)}, {"ks", r.ks}, {"map_a", r.map_a}, {"map_b", r.map_b}};
  auto per_k = nlohmann::json::array();
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    per_k.push_back({{"k", r.ks[i]},
                     {"mean_map_a", r.mean_map_a(i)},
                     {"mean_map_b", r.mean_map_b(i)},
                     {"wins_b", r.wins_b(i)},
                     {"wins_or_ties_b", r.wins_b(i, true)}});
  }
  j["summary"] = std::move(per_k);
  if (!r.corr_a.empty()) {
    j["corr_a"] = r.corr_a;
    j["corr_b"] = r.corr_b;
    j["mean_corr_a"] = r.mean_corr_a();
    j["mean_corr_b"] = r.mean_corr_b();
  }
  return j;
}

ComparisonRecord run_sharing_experiment(const ExperimentSpec& spec) {
  auto set_zero = [](PipelineConfig& c) { c.lambda = 0.0; };
  auto keep = [](PipelineConfig&) {};
  return compare_configs(spec, blank_record(spec, "sharing", "lambda=0", fmt::format("lambda={}", spec.lambda)),
                         Tweak(set_zero), Tweak(keep),
                         false);
}

ComparisonRecord run_redundancy_experiment(const ExperimentSpec& spec, double gamma_low) {
  auto low = [gamma_low](PipelineConfig& c) { c.gamma = gamma_low; };
  auto keep = [](PipelineConfig&) {};
  return compare_configs(spec,
                         blank_record(spec, "redundancy", fmt::format("gamma={}", gamma_low),
                                      fmt::format("gamma={}", spec.gamma)),
                         Tweak(low), Tweak(keep), true);
}

ComparisonRecord run_attr_vs_raw_experiment(const ExperimentSpec& spec) {
  return run_repeats(spec, blank_record(spec, "attr_vs_raw", "raw", "attributes"), false, [&](const RepeatData& d) {
    const PipelineConfig config = base_config(spec);
    const TrainedModel model = train_model(d.train, config);
    RepeatOutcome o;
    o.map_b = prefix_maps(d, model, config, spec.ks);
    const Matrix deep = preprocess(d.test.features(), config.power_alpha, model.projector);
    const double raw = evaluate(rank_raw(d.test, d.queries, deep), d.queries.gt, config.max_rank).map;
    o.map_a.assign(spec.ks.size(), raw);
    return o;
  });
}

void write_summary_csv(std::ostream& out, const std::vector<ComparisonRecord>& records) {
  out << "experiment,k,setting,mean_map,wins\n";
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.ks.size(); ++i) {
      out << fmt::format("{},{},{},{},{}\n", r.experiment, r.ks[i], r.label_a, r.mean_map_a(i),
                         r.map_a[i].size() - r.wins_b(i, true));
      out << fmt::format("{},{},{},{},{}\n", r.experiment, r.ks[i], r.label_b, r.mean_map_b(i), r.wins_b(i));
    }
  }
}

}  // namespace attribex
