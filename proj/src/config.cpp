#include "attribex/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>

namespace attribex {

RunConfig::RunConfig() {
  synth.n_instances = 60;
  synth.n_train = 40;
  synth.views_per_instance = 8;
  synth.dim = 64;
  synth.view_noise = 0.5;
}

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::kConfig, fmt::format("{}: expected an object", where));
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw Error(ErrorKind::kConfig, fmt::format("{}: unknown key '{}'", where, key));
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::kConfig, fmt::format("{}.{}: wrong type", where, key));
  }
}

json synth_to_json(const SyntheticOptions& s) {
  return {{"n_instances", s.n_instances},
          {"n_train", s.n_train.value_or(s.n_instances)},
          {"views", s.views_per_instance},
          {"dim", s.dim},
          {"view_noise", s.view_noise},
          {"latent_factors", s.latent_factors},
          {"instance_residual", s.instance_residual},
          {"image_noise", s.image_noise},
          {"n_distractors", s.n_distractors},
          {"category", s.category}};
}

void synth_from_json(const json& j, SyntheticOptions& s) {
  reject_unknown(j, {"n_instances", "n_train", "views", "dim", "view_noise", "latent_factors", "instance_residual",
                     "image_noise", "n_distractors",
                     "category"},
                 "synth");
  read(j, "n_instances", s.n_instances, "synth");
  std::size_t n_train = s.n_train.value_or(s.n_instances);
  read(j, "n_train", n_train, "synth");
  s.n_train = n_train;
  read(j, "views", s.views_per_instance, "synth");
  read(j, "dim", s.dim, "synth");
  read(j, "view_noise", s.view_noise, "synth");
  read(j, "latent_factors", s.latent_factors, "synth");
  read(j, "instance_residual", s.instance_residual, "synth");
  read(j, "image_noise", s.image_noise, "synth");
  read(j, "n_distractors", s.n_distractors, "synth");
  read(j, "category", s.category, "synth");
}

json pipeline_to_json(const PipelineConfig& p) {
  json j = config_to_json(p);
  j.erase("base_seed");
  return j;
}

void pipeline_from_json(const json& j, PipelineConfig& p) {
  const std::string w = "pipeline";
  std::set<std::string> known;
  const json defaults = pipeline_to_json(p);
  for (const auto& [key, value] : defaults.items()) known.insert(key);
  reject_unknown(j, known, w);
  read(j, "lambda", p.lambda, w);
  read(j, "gamma", p.gamma, w);
  read(j, "k", p.k, w);
  read(j, "k_nn", p.k_nn, w);
  read(j, "c", p.c, w);
  read(j, "svm_tol", p.svm_tol, w);
  read(j, "pca_dim", p.pca_dim, w);
  read(j, "whiten", p.whiten, w);
  read(j, "power_alpha", p.power_alpha, w);
  read(j, "use_deep", p.use_deep, w);
  read(j, "use_class", p.use_class, w);
  read(j, "eig_tol", p.eig_tol, w);
  read(j, "eig_max_iter", p.eig_max_iter, w);
  read(j, "strict_convergence", p.strict_convergence, w);
  read(j, "multi_shot", p.multi_shot, w);
  read(j, "max_rank", p.max_rank, w);
  read(j, "target_category", p.target_category, w);
  std::string text;
  if (j.contains("edge_weighting")) {
    read(j, "edge_weighting", text, w);
    p.edge_weighting = parse_edge_weighting(text);
  }
  if (j.contains("attr_metric")) {
    read(j, "attr_metric", text, w);
    p.attr_metric = parse_attr_metric(text);
  }
  if (j.contains("normalization")) {
    read(j, "normalization", text, w);
    p.normalization = parse_score_normalization(text);
  }
  if (j.contains("protocol")) {
    read(j, "protocol", text, w);
    p.protocol = parse_protocol(text);
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorKind::kConfig, message);
}

}  // namespace

void propagate_seed(RunConfig& c) {
  c.synth.seed = c.seed;
  c.pipeline.base_seed = c.seed;
  c.experiments.seed = c.seed;
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, {"seed", "run_dir", "corpus_dir", "synth", "pipeline", "eval", "sweep", "experiments"}, "config");
  RunConfig c;
  read(j, "seed", c.seed, "config");
  read(j, "run_dir", c.run_dir, "config");
  read(j, "corpus_dir", c.corpus_dir, "config");
  if (j.contains("synth")) synth_from_json(j.at("synth"), c.synth);
  if (j.contains("pipeline")) pipeline_from_json(j.at("pipeline"), c.pipeline);
  if (j.contains("eval")) {
    reject_unknown(j.at("eval"), {"repeats"}, "eval");
    read(j.at("eval"), "repeats", c.eval_repeats, "eval");
  }
  if (j.contains("sweep")) {
    reject_unknown(j.at("sweep"), {"lambdas", "gammas", "ks"}, "sweep");
    read(j.at("sweep"), "lambdas", c.sweep.lambdas, "sweep");
    read(j.at("sweep"), "gammas", c.sweep.gammas, "sweep");
    read(j.at("sweep"), "ks", c.sweep.ks, "sweep");
  }
  if (j.contains("experiments")) {
    json e = j.at("experiments");
    if (e.is_object() && e.contains("seed")) throw Error(ErrorKind::kConfig, "experiments: unknown key 'seed'");
    c.experiments = spec_from_json(e);
  }
  propagate_seed(c);
  validate(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfig, fmt::format("cannot open config file {}", path.string()));
  try {
    return run_config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kConfig, fmt::format("{}: {}", path.string(), e.what()));
  }
}

json run_config_to_json(const RunConfig& c) {
  json e = spec_to_json(c.experiments);
  e.erase("seed");
  return {{"seed", c.seed},
          {"run_dir", c.run_dir},
          {"corpus_dir", c.corpus_dir},
          {"synth", synth_to_json(c.synth)},
          {"pipeline", pipeline_to_json(c.pipeline)},
          {"eval", {{"repeats", c.eval_repeats}}},
          {"sweep", {{"lambdas", c.sweep.lambdas}, {"gammas", c.sweep.gammas}, {"ks", c.sweep.ks}}},
          {"experiments", std::move(e)}};
}

void validate(const RunConfig& c) {
  const auto& p = c.pipeline;
  require(p.lambda >= 0.0, "pipeline.lambda must be >= 0");
  require(p.gamma >= 0.0, "pipeline.gamma must be >= 0");
  require(p.k >= 1, "pipeline.k must be >= 1");
  require(p.k_nn >= 1, "pipeline.k_nn must be >= 1");
  require(p.c > 0.0, "pipeline.c must be > 0");
  require(p.svm_tol > 0.0, "pipeline.svm_tol must be > 0");
  require(p.power_alpha > 0.0 && p.power_alpha <= 1.0, "pipeline.power_alpha must be in (0, 1]");
  require(p.eig_tol > 0.0, "pipeline.eig_tol must be > 0");
  require(p.eig_max_iter >= 1, "pipeline.eig_max_iter must be >= 1");
  require(p.max_rank >= 1, "pipeline.max_rank must be >= 1");
  require(!p.whiten || p.pca_dim > 0, "pipeline.whiten needs pca_dim > 0");
  if (p.pca_dim > 0 && c.corpus_dir.empty()) {
    require(p.pca_dim <= c.synth.dim, "pipeline.pca_dim exceeds synth.dim");
  }

  const auto& s = c.synth;
  require(s.n_instances >= 2, "synth.n_instances must be >= 2");
  require(s.n_train.value_or(s.n_instances) <= s.n_instances, "synth.n_train exceeds synth.n_instances");
  require(s.n_train.value_or(s.n_instances) >= 2, "synth.n_train must be >= 2");
  require(s.views_per_instance >= 1, "synth.views must be >= 1");
  require(s.dim >= 1, "synth.dim must be >= 1");
  require(s.view_noise >= 0.0, "synth.view_noise must be >= 0");
  require(s.latent_factors >= 1, "synth.latent_factors must be >= 1");
  require(!s.category.empty(), "synth.category must be nonempty");

  require(!c.sweep.lambdas.empty() && !c.sweep.gammas.empty() && !c.sweep.ks.empty(),
          "sweep grids must be nonempty");
  for (double l : c.sweep.lambdas) require(l >= 0.0, "sweep.lambdas must be >= 0");
  for (double g : c.sweep.gammas) require(g >= 0.0, "sweep.gammas must be >= 0");
  for (auto k : c.sweep.ks) require(k >= 1, "sweep.ks must be >= 1");
  require(!c.run_dir.empty(), "run_dir must be nonempty");
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorKind::kConfig, fmt::format("override '{}' is not key=value", assignment));
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw Error(ErrorKind::kConfig, fmt::format("override '{}' has an empty key", assignment));
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

std::string config_hash(const RunConfig& c) {
  json j = run_config_to_json(c);
  j.erase("run_dir");
  const std::string text = j.dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace attribex
