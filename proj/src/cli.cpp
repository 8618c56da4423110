#include "attribex/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "attribex/atsf_io.hpp"
#include "attribex/config.hpp"
#include "attribex/kernels.hpp"
#include "attribex/pipeline.hpp"
#include "attribex/synthcheck.hpp"

namespace attribex {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Artifact {
  std::string name;
  std::vector<std::string> files;  // relative to the run directory
};

const Artifact kDataset{"dataset", {"dataset/meta.jsonl", "dataset/features.bin"}};
const Artifact kProjector{"projector", {"projector.json"}};
const Artifact kGraph{"graph", {"graph_s.bin", "graph_p.bin"}};
const Artifact kAttributes{"attributes", {"attributes.bin", "attributes.json"}};
const Artifact kDetectors{"detectors", {"detectors.bin", "detectors.json"}};
const Artifact kCategory{"category", {"category.json"}};
const Artifact kEmbeddings{"embeddings", {"embeddings.bin", "embeddings.json"}};
const Artifact kRankings{"rankings", {"rankings.csv"}};
const Artifact kEvalReport{"eval_report", {"eval_report.json", "cmc.csv"}};
const Artifact kSweep{"sweep", {"sweep.csv", "sweep.json"}};
const Artifact kExperiments{"experiments",
                            {"experiments/sharing.json", "experiments/redundancy.json",
                             "experiments/attr_vs_raw.json", "experiments/summary.csv"}};

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

class Run {
 public:
  Run(RunConfig config, bool overwrite, bool force)
      : config_(std::move(config)), dir_(config_.run_dir), hash_(config_hash(config_)), overwrite_(overwrite),
        force_(force), started_(now_utc()) {}

  const RunConfig& config() const { return config_; }
  const PipelineConfig& pipeline() const { return config_.pipeline; }
  fs::path path(const std::string& rel) const { return dir_ / rel; }

  bool present(const Artifact& a) const {
    return std::all_of(a.files.begin(), a.files.end(), [&](const auto& f) { return fs::exists(path(f)); });
  }

  void require(const Artifact& a) const {
    if (!present(a)) throw Error(ErrorKind::kMissingArtifact, fmt::format("missing artifact: {}", a.name));
  }

  // Refuses to clobber an existing artifact unless --overwrite was given.
  void claim(const Artifact& a) {
    if (!overwrite_) {
      for (const auto& f : a.files) {
        if (fs::exists(path(f))) {
          throw Error(ErrorKind::kArtifactExists,
                      fmt::format("artifact exists: {} ({}); pass --overwrite to replace it", a.name, f));
        }
      }
    }
    for (const auto& f : a.files) fs::create_directories(path(f).parent_path());
    produced_.push_back(a);
  }

  void write_json(const std::string& rel, const json& j) const {
    std::ofstream out(path(rel));
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::kMissingFile, fmt::format("cannot write {}", path(rel).string()));
  }

  json read_json(const std::string& rel) const {
    std::ifstream in(path(rel));
    if (!in) throw Error(ErrorKind::kMissingFile, fmt::format("cannot read {}", path(rel).string()));
    try {
      return json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::kParse, fmt::format("{}: {}", rel, e.what()));
    }
  }

  std::ofstream open_text(const std::string& rel) const {
    std::ofstream out(path(rel));
    if (!out) throw Error(ErrorKind::kMissingFile, fmt::format("cannot write {}", path(rel).string()));
    return out;
  }

  FeatureDataset dataset() const {
    require(kDataset);
    return load_features(path("dataset"));
  }

  std::optional<Projector> projector() const {
    if (pipeline().pca_dim == 0) return std::nullopt;
    require(kProjector);
    return projector_from_json(read_json("projector.json"));
  }

  // Latest manifest hash for each artifact name.
  std::map<std::string, std::string> manifest_hashes() const {
    std::map<std::string, std::string> out;
    std::ifstream in(path("manifest.jsonl"));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json entry = json::parse(line, nullptr, false);
      if (entry.is_discarded() || !entry.contains("artifacts")) continue;
      for (const auto& name : entry.at("artifacts")) out[name.get<std::string>()] = entry.value("config_hash", "");
    }
    return out;
  }

  void check_chain(const std::vector<Artifact>& chain) const {
    const auto hashes = manifest_hashes();
    std::vector<std::string> mismatched;
    for (const auto& a : chain) {
      const auto it = hashes.find(a.name);
      const std::string h = it == hashes.end() ? "unrecorded" : it->second;
      if (h != hash_) mismatched.push_back(fmt::format("{}={}", a.name, h));
    }
    if (mismatched.empty()) return;
    const std::string detail = fmt::format("mixed config hashes: current={} {}", hash_, fmt::join(mismatched, " "));
    if (!force_) throw Error(ErrorKind::kMixedHash, detail + "; pass --force to evaluate anyway");
    spdlog::warn("{} (forced)", detail);
  }

  void record(const std::string& command) const {
    json names = json::array();
    json files = json::array();
    for (const auto& a : produced_) {
      names.push_back(a.name);
      for (const auto& f : a.files) {
        if (fs::exists(path(f))) files.push_back(f);
      }
    }
    const json entry = {{"command", command}, {"artifacts", names},   {"files", files},
                        {"config_hash", hash_}, {"started", started_}, {"finished", now_utc()}};
    fs::create_directories(dir_);
    std::ofstream out(path("manifest.jsonl"), std::ios::app);
    out << entry.dump() << '\n';
  }

  const std::string& hash() const { return hash_; }

 private:
  RunConfig config_;
  fs::path dir_;
  std::string hash_;
  bool overwrite_;
  bool force_;
  std::string started_;
  std::vector<Artifact> produced_;
};

// Preprocessed design images and their attribute matrix row order, rebuilt
// the same way by learn and detect.
FeatureDataset prepared_training_set(const Run& run, const FeatureDataset& ds,
                                     const std::optional<Projector>& projector) {
  const auto rows = attribute_training_rows(ds, run.pipeline());
  if (rows.empty()) throw Error(ErrorKind::kInvalidArgument, "dataset has no training images for the target category");
  const FeatureDataset subset = design_set(ds.subset(rows), run.pipeline());
  return subset.with_features(preprocess(subset.features(), run.pipeline().power_alpha, projector));
}

void cmd_synth(Run& run) {
  run.claim(kDataset);
  const FeatureDataset ds =
      run.config().corpus_dir.empty() ? generate_synthetic(run.config().synth) : load_features(run.config().corpus_dir);
  save_features(ds, run.path("dataset"));
  spdlog::info("dataset: {} images, {} instances, dim {}", ds.n_images(), ds.n_instances(), ds.dim());
}

void cmd_learn(Run& run) {
  const FeatureDataset ds = run.dataset();
  run.claim(kAttributes);
  run.claim(kGraph);
  const auto& cfg = run.pipeline();

  std::optional<Projector> projector;
  if (cfg.pca_dim > 0) {
    run.claim(kProjector);
    const auto rows = attribute_training_rows(ds, cfg);
    projector = fit_projector(design_set(ds.subset(rows), cfg).features(), cfg);
    run.write_json("projector.json", projector_to_json(*projector));
  }
  const FeatureDataset prepared = prepared_training_set(run, ds, projector);
  const SimilarityGraph graph = build_graph(prepared, cfg.k_nn, cfg.lambda, cfg.edge_weighting);
  const AttributeMatrix attrs = design_attributes(graph, design_options(cfg));

  write_atsf(run.path("graph_s.bin"), graph.s);
  write_atsf(run.path("graph_p.bin"), graph.p);
  write_atsf(run.path("attributes.bin"), attrs.a);
  json sidecar = attribute_sidecar(attrs, run.config().seed);
  sidecar["k_nn"] = graph.k_nn;
  sidecar["instance_ids"] = prepared.instance_ids();
  sidecar["objective_trace"] = trace_objective(attrs.a, graph.p);
  sidecar["mean_abs_column_correlation"] = mean_abs_column_correlation(attrs.a);
  sidecar["config_hash"] = run.hash();
  run.write_json("attributes.json", sidecar);
  spdlog::info("learned {} attributes over {} instances", attrs.k(), attrs.n());
}

void cmd_detect(Run& run) {
  const FeatureDataset ds = run.dataset();
  run.require(kAttributes);
  const auto& cfg = run.pipeline();
  const auto projector = run.projector();
  run.claim(kDetectors);
  if (cfg.use_class) run.claim(kCategory);

  const FeatureDataset prepared = prepared_training_set(run, ds, projector);
  const json sidecar = run.read_json("attributes.json");
  if (sidecar.value("instance_ids", json::array()) != json(prepared.instance_ids())) {
    throw Error(ErrorKind::kRowMismatch, "attribute rows do not match the dataset's training instances");
  }
  AttributeMatrix attrs;
  attrs.a = read_atsf(run.path("attributes.bin"));
  attrs.lambda = sidecar.value("lambda", cfg.lambda);
  attrs.gamma = sidecar.value("gamma", cfg.gamma);

  const DetectorBank bank = train_attribute_detectors(prepared, attrs, svm_options(cfg));
  write_atsf(run.path("detectors.bin"), bank.to_matrix());
  json bank_json = bank_sidecar(bank);
  bank_json["seed"] = run.config().seed;
  bank_json["config_hash"] = run.hash();
  run.write_json("detectors.json", bank_json);

  if (cfg.use_class) {
    const auto neg_rows = category_negative_rows(ds, cfg);
    if (neg_rows.empty()) {
      throw Error(ErrorKind::kEmptyClass, "use_class needs other-category training images (synth.n_distractors > 0)");
    }
    const Matrix negatives = preprocess(ds.subset(neg_rows).features(), cfg.power_alpha, projector);
    const LinearModel category = train_category_classifier(prepared.features(), negatives, svm_options(cfg));
    run.write_json("category.json", model_to_json(category));
  }
  spdlog::info("trained {} detectors", bank.attribute_count());
}

DetectorBank load_bank(const Run& run) {
  run.require(kDetectors);
  return bank_from_matrix(read_atsf(run.path("detectors.bin")), run.read_json("detectors.json"));
}

void cmd_embed(Run& run) {
  const FeatureDataset ds = run.dataset();
  const DetectorBank bank = load_bank(run);
  const auto projector = run.projector();
  run.claim(kEmbeddings);
  const Matrix emb = embed_rows(bank, preprocess(ds.features(), run.pipeline().power_alpha, projector));
  write_atsf(run.path("embeddings.bin"), emb);
  std::vector<std::string> ids;
  for (const auto& img : ds.images()) ids.push_back(img.image_id);
  run.write_json("embeddings.json", {{"image_ids", ids}, {"k", bank.attribute_count()}, {"config_hash", run.hash()}});
}

struct EvalPool {
  FeatureDataset test;
  QuerySet queries;
};

EvalPool evaluation_pool(const Run& run, const FeatureDataset& ds) {
  const auto rows = evaluation_rows(ds);
  if (rows.empty()) throw Error(ErrorKind::kInvalidArgument, "dataset has no probe, gallery or distractor images");
  EvalPool pool{ds.subset(rows), {}};
  pool.queries = build_queries(pool.test, run.pipeline().protocol, run.pipeline().multi_shot);
  return pool;
}

void cmd_search(Run& run) {
  const FeatureDataset ds = run.dataset();
  run.require(kEmbeddings);
  const auto& cfg = run.pipeline();
  const auto projector = run.projector();
  std::optional<LinearModel> category;
  if (cfg.use_class) {
    run.require(kCategory);
    category = model_from_json(run.read_json("category.json"));
  }
  run.claim(kRankings);

  const Matrix emb = read_atsf(run.path("embeddings.bin"));
  if (static_cast<std::size_t>(emb.rows()) != ds.n_images()) {
    throw Error(ErrorKind::kRowMismatch,
                fmt::format("embeddings have {} rows but the dataset has {} images", emb.rows(), ds.n_images()));
  }
  const auto rows = evaluation_rows(ds);
  const EvalPool pool = evaluation_pool(run, ds);
  Matrix attr(static_cast<Eigen::Index>(rows.size()), emb.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    attr.row(static_cast<Eigen::Index>(r)) = emb.row(static_cast<Eigen::Index>(rows[r]));
  }
  const Matrix deep = preprocess(pool.test.features(), cfg.power_alpha, projector);
  const Vector class_scores = category ? score_class(*category, deep) : Vector();
  const auto results = rank_queries(pool.test, pool.queries, attr, deep, class_scores, cfg);
  auto out = run.open_text("rankings.csv");
  write_rankings_csv(out, results);
}

void cmd_eval(Run& run) {
  const FeatureDataset ds = run.dataset();
  run.require(kRankings);
  run.check_chain({kDataset, kAttributes, kDetectors, kEmbeddings, kRankings});
  run.claim(kEvalReport);
  const auto& cfg = run.pipeline();

  std::vector<RankedResult> results;
  {
    std::ifstream in(run.path("rankings.csv"));
    results = read_rankings_csv(in);
  }
  const EvalPool pool = evaluation_pool(run, ds);
  EvalReport report = evaluate(results, pool.queries.gt, cfg.max_rank);
  report.seeds = {run.config().seed};
  report.config_snapshot = config_to_json(cfg);
  json j = report_to_json(report);
  j["config_hash"] = run.hash();

  const EvalReport* curves = &report;
  EvalReport repeated;
  if (run.config().eval_repeats > 0) {
    repeated = repeated_splits_eval(ds, run.config().eval_repeats, cfg);
    j["repeated_splits"] = report_to_json(repeated);
    curves = &repeated;
  }
  run.write_json("eval_report.json", j);
  auto out = run.open_text("cmc.csv");
  write_cmc_csv(out, *curves, cfg.lambda, cfg.gamma, cfg.k);
  spdlog::info("mAP {:.4f}", report.map);
}

void cmd_sweep(Run& run) {
  const FeatureDataset ds = run.dataset();
  run.claim(kSweep);
  const auto& grid = run.config().sweep;
  const SweepResult sweep = parameter_sweep(ds, grid.lambdas, grid.gammas, grid.ks, run.pipeline());
  auto out = run.open_text("sweep.csv");
  write_sweep_csv(out, sweep);
  json j = sweep_to_json(sweep);
  j["config_hash"] = run.hash();
  run.write_json("sweep.json", j);
}

void cmd_experiments(Run& run) {
  run.claim(kExperiments);
  const ExperimentSpec& spec = run.config().experiments;
  std::vector<ComparisonRecord> records;
  records.push_back(run_sharing_experiment(spec));
  records.push_back(run_redundancy_experiment(spec));
  records.push_back(run_attr_vs_raw_experiment(spec));
  for (const auto& r : records) run.write_json("experiments/" + r.experiment + ".json", record_to_json(r));
  auto out = run.open_text("experiments/summary.csv");
  write_summary_csv(out, records);
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return kExitConfig;
    case ErrorKind::kMissingArtifact: return kExitMissingArtifact;
    case ErrorKind::kArtifactExists: return kExitArtifactExists;
    case ErrorKind::kMixedHash: return kExitMixedHash;
    default: return kExitStageFailure;
  }
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"attribex: attribute learning and one-example instance search"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::string run_dir;
  std::optional<std::uint64_t> seed;
  bool overwrite = false;
  bool force = false;
  bool verbose = false;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--run-dir", run_dir, "run directory (overrides the config)");
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_flag("--overwrite", overwrite, "replace existing artifacts");
  app.add_flag("--force", force, "evaluate even when the artifact chain mixes config hashes");
  app.add_option("--set", overrides, "dotted config override, e.g. pipeline.lambda=3");
  app.add_flag("-v,--verbose", verbose, "log progress");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "generate (or import) the feature corpus"},
      {"learn", "build the instance graph and design the attributes"},
      {"detect", "train one linear SVM per attribute"},
      {"embed", "map every image to its attribute scores"},
      {"search", "rank the gallery for every query"},
      {"eval", "mAP and CMC from the stored rankings"},
      {"sweep", "lambda/gamma/k grid on the dataset's own split"},
      {"experiments", "synthetic sharing, redundancy and attribute-vs-raw comparisons"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "usage error: " << one_line(e.what()) << '\n';
    return kExitUsage;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  std::optional<Run> run;
  try {
    json j = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw Error(ErrorKind::kConfig, fmt::format("cannot open config file {}", config_path));
      j = json::parse(in, nullptr, false);
      if (j.is_discarded()) throw Error(ErrorKind::kConfig, fmt::format("{} is not valid JSON", config_path));
    }
    for (const auto& o : overrides) apply_override(j, o);
    if (seed) j["seed"] = *seed;
    if (!run_dir.empty()) j["run_dir"] = run_dir;
    run.emplace(run_config_from_json(j), overwrite, force);
    kernels::apply_thread_env();
  } catch (const Error& e) {
    err << "config error: " << one_line(e.what()) << '\n';
    return kExitConfig;
  }

  try {
    if (command == "synth") cmd_synth(*run);
    else if (command == "learn") cmd_learn(*run);
    else if (command == "detect") cmd_detect(*run);
    else if (command == "embed") cmd_embed(*run);
    else if (command == "search") cmd_search(*run);
    else if (command == "eval") cmd_eval(*run);
    else if (command == "sweep") cmd_sweep(*run);
    else cmd_experiments(*run);
    run->record(command);
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    if (code == kExitStageFailure) {
      err << "stage failed: " << command << ": " << to_string(e.kind()) << ": " << one_line(e.what()) << '\n';
    } else if (code == kExitConfig) {
      err << "config error: " << one_line(e.what()) << '\n';
    } else {
      err << one_line(e.what()) << '\n';
    }
    return code;
  } catch (const std::exception& e) {
    err << "stage failed: " << command << ": internal: " << one_line(e.what()) << '\n';
    return kExitStageFailure;
  }
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace attribex
