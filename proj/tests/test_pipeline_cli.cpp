#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "attribex/cli.hpp"
#include "attribex/config.hpp"
#include "attribex/pipeline.hpp"
#include "attribex/synthcheck.hpp"
#include "test_util.hpp"

using namespace attribex;

namespace {

FeatureDataset small_corpus(std::uint64_t seed) {
  SyntheticOptions o;
  o.n_instances = 16;
  o.views_per_instance = 4;
  o.dim = 16;
  o.seed = seed;
  return generate_synthetic(o);
}

PipelineConfig small_config() {
  PipelineConfig c;
  c.k = 12;
  c.k_nn = 4;
  c.max_rank = 5;
  return c;
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const std::filesystem::path& run, std::vector<std::string> args) {
  std::vector<std::string> full = {"--run-dir", run.string(), "--set", "synth.n_instances=16",
                                   "--set", "synth.n_train=10", "--set", "synth.views=4",
                                   "--set", "synth.dim=16", "--set", "pipeline.k=12",
                                   "--set", "pipeline.k_nn=4"};
  full.insert(full.end(), args.begin(), args.end());
  std::ostringstream out, err;
  const int code = run_cli(full, out, err);
  return {code, out.str(), err.str()};
}

void run_chain(const std::filesystem::path& run) {
  for (const char* cmd : {"synth", "learn", "detect", "embed", "search", "eval"}) {
    const CliResult r = cli(run, {cmd});
    ASSERT_EQ(r.code, kExitOk) << cmd << ": " << r.err;
  }
}

}  // namespace

TEST(Pipeline, QueriesExcludeSelfAndCoverInstances) {
  const FeatureDataset ds = small_corpus(61);
  const QuerySet qs = build_queries(ds, Protocol::kAllVsAll, true);
  EXPECT_EQ(qs.queries.size(), ds.n_images());
  for (std::size_t q : qs.queries) {
    const auto& rel = qs.gt.relevant.at(ds.image(q).image_id);
    EXPECT_EQ(rel.size(), 3u);
    EXPECT_EQ(rel.count(ds.image(q).image_id), 0u);
  }
}

TEST(Pipeline, RepeatedSplitsSingleAndDeterministic) {
  const FeatureDataset ds = small_corpus(62);
  const PipelineConfig c = small_config();
  const EvalReport one = repeated_splits_eval(ds, 1, c);
  ASSERT_EQ(one.repeats.size(), 1u);
  EXPECT_EQ(one.map, one.repeats[0].map);
  const EvalReport a = repeated_splits_eval(ds, 3, c);
  const EvalReport b = repeated_splits_eval(ds, 3, c);
  ASSERT_EQ(a.repeats.size(), 3u);
  EXPECT_EQ(report_to_json(a).dump(), report_to_json(b).dump());
  for (std::size_t i = 1; i < a.cmc.size(); ++i) EXPECT_GE(a.cmc[i], a.cmc[i - 1]);
  EXPECT_THROW(repeated_splits_eval(ds, 0, c), Error);
}

TEST(Pipeline, SweepGridShapeAndWarnings) {
  SyntheticOptions o;
  o.n_instances = 20;
  o.n_train = 14;
  o.views_per_instance = 3;
  o.dim = 16;
  o.seed = 63;
  const FeatureDataset ds = generate_synthetic(o);
  PipelineConfig c = small_config();
  c.max_rank = 3;
  const SweepResult s = parameter_sweep(ds, {0.0, 2.0}, {7.0}, {10, 50}, c);
  ASSERT_EQ(s.cells.size(), 4u);
  for (const auto& cell : s.cells) {
    EXPECT_FALSE(cell.failed) << cell.error;
    EXPECT_GE(cell.map, 0.0);
    EXPECT_LE(cell.map, 1.0);
  }
  const SweepResult d = parameter_sweep(ds, {2.0, 2.0}, {7.0}, {10}, c);
  EXPECT_EQ(d.cells.size(), 1u);
  EXPECT_FALSE(d.warnings.empty());
  EXPECT_THROW(parameter_sweep(ds, {}, {7.0}, {10}, c), Error);

  std::ostringstream csv;
  write_sweep_csv(csv, s);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "lambda,gamma,k,repeat,metric,value");
}

TEST(Config, DefaultsRoundTripAndUnknownKeys) {
  RunConfig c;
  const RunConfig back = run_config_from_json(run_config_to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);
  nlohmann::json j = run_config_to_json(c);
  j["bogus"] = 1;
  EXPECT_THROW(run_config_from_json(j), Error);
  j.erase("bogus");
  j["experiments"]["seed"] = 3;
  EXPECT_THROW(run_config_from_json(j), Error);
}

TEST(Config, OverridesAndHash) {
  nlohmann::json j = run_config_to_json(RunConfig{});
  apply_override(j, "pipeline.lambda=3.5");
  apply_override(j, "run_dir=elsewhere");
  const RunConfig c = run_config_from_json(j);
  EXPECT_EQ(c.pipeline.lambda, 3.5);
  EXPECT_EQ(c.run_dir, "elsewhere");
  RunConfig d;
  d.run_dir = "elsewhere";
  EXPECT_EQ(config_hash(d), config_hash(RunConfig{}));
  EXPECT_NE(config_hash(c), config_hash(RunConfig{}));
  EXPECT_THROW(apply_override(j, "novalue"), Error);
}

TEST(Cli, ExitCodes) {
  TempDir tmp("cli_codes");
  const auto run = tmp.path() / "run";
  CliResult r = cli(run, {"learn"});
  EXPECT_EQ(r.code, kExitMissingArtifact);
  EXPECT_EQ(r.err, "missing artifact: dataset\n");

  r = cli(run, {"--set", "pipeline.bogus=1", "synth"});
  EXPECT_EQ(r.code, kExitConfig);

  std::ofstream(tmp.path() / "bad.json") << R"({"seed": 1, "nonsense": true})";
  r = cli(run, {"--config", (tmp.path() / "bad.json").string(), "synth"});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);

  r = cli(run, {"nosuchcommand"});
  EXPECT_EQ(r.code, kExitUsage);

  ASSERT_EQ(cli(run, {"synth"}).code, kExitOk);
  EXPECT_EQ(cli(run, {"synth"}).code, kExitArtifactExists);
  EXPECT_EQ(cli(run, {"--overwrite", "synth"}).code, kExitOk);
}

TEST(Cli, MixedHashRefusedUnlessForced) {
  TempDir tmp("cli_hash");
  const auto run = tmp.path() / "run";
  run_chain(run);
  ASSERT_EQ(cli(run, {"--overwrite", "--set", "pipeline.lambda=0.5", "learn"}).code, kExitOk);
  CliResult r = cli(run, {"--overwrite", "eval"});
  EXPECT_EQ(r.code, kExitMixedHash);
  r = cli(run, {"--overwrite", "--force", "eval"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
}

TEST(Cli, ChainIsDeterministicAndOverwriteReproduces) {
  TempDir tmp("cli_det");
  const auto a = tmp.path() / "a";
  const auto b = tmp.path() / "b";
  run_chain(a);
  run_chain(b);
  for (const char* f : {"dataset/features.bin", "dataset/meta.jsonl", "attributes.bin", "detectors.bin",
                        "embeddings.bin", "rankings.csv", "eval_report.json", "cmc.csv"}) {
    ASSERT_TRUE(std::filesystem::exists(a / f)) << f;
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
  const std::string before = read_file(a / "attributes.bin");
  ASSERT_EQ(cli(a, {"--overwrite", "learn"}).code, kExitOk);
  EXPECT_EQ(read_file(a / "attributes.bin"), before);

  std::ifstream manifest(a / "manifest.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(manifest, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("config_hash"));
    ++lines;
  }
  EXPECT_EQ(lines, 7u);
}

TEST(Synthcheck, SpecValidation) {
  ExperimentSpec s;
  EXPECT_EQ(spec_from_json(spec_to_json(s)).ks, s.ks);
  nlohmann::json j = spec_to_json(s);
  j["surprise"] = 1;
  EXPECT_THROW(spec_from_json(j), Error);
}

TEST(Synthcheck, IdenticalSettingsGiveIdenticalMaps) {
  ExperimentSpec s;
  s.n_train_instances = 12;
  s.n_test_instances = 6;
  s.views = 4;
  s.dim = 16;
  s.ks = {8};
  s.k_nn = 4;
  s.repeats = 1;
  s.gamma = 0.01;
  const ComparisonRecord r = run_redundancy_experiment(s, 0.01);
  ASSERT_EQ(r.map_a.size(), 1u);
  ASSERT_EQ(r.map_a[0].size(), 1u);
  EXPECT_EQ(r.map_a, r.map_b);
  EXPECT_EQ(r.wins_b(0), 0u);
  EXPECT_EQ(r.wins_b(0, true), 1u);
}

TEST(Synthcheck, NoiselessViewsRetrievePerfectly) {
  ExperimentSpec s;
  s.n_train_instances = 12;
  s.n_test_instances = 6;
  s.views = 3;
  s.dim = 16;
  s.ks = {16};
  s.k_nn = 4;
  s.repeats = 1;
  s.view_noise = 0.0;
  const ComparisonRecord r = run_attr_vs_raw_experiment(s);
  EXPECT_DOUBLE_EQ(r.map_a[0][0], 1.0);
  EXPECT_DOUBLE_EQ(r.map_b[0][0], 1.0);
  std::ostringstream csv;
  write_summary_csv(csv, {r});
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "experiment,k,setting,mean_map,wins");
}
