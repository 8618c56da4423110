// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "attribex/attrdesign.hpp"
#include "attribex/cli.hpp"
#include "attribex/eigensolver.hpp"
#include "attribex/eval.hpp"
#include "attribex/pipeline.hpp"
#include "attribex/retrieval.hpp"
#include "attribex/svm.hpp"
#include "attribex/synthcheck.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace attribex;

namespace {

struct Verdict {
  bool ok = true;
  std::string detail;
  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Verdict eigen_oracle() {
  Verdict v;
  Rng rng(1001);
  const auto t0 = std::chrono::steady_clock::now();
  double worst_cos = 1.0, worst_val = 0.0;
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index n = 2 + rng.below(19);
    const Matrix m = oracle::random_symmetric(rng, n);
    const auto ref = oracle::dense_top(m);
    EigenOptions o;
    o.tol = 1e-12;
    o.max_iter = 100000;
    const EigenResult r = top_eigenvector(m, o);
    worst_cos = std::min(worst_cos, std::abs(r.vector.dot(ref.vector)));
    worst_val = std::max(worst_val, std::abs(r.value - ref.value));
  }
  const double secs = seconds_since(t0);
  if (worst_cos < 1.0 - 1e-9) v.fail("cosine " + std::to_string(worst_cos));
  if (worst_val > 1e-8) v.fail("eigenvalue error " + std::to_string(worst_val));
  if (secs >= 5.0) v.fail("took " + std::to_string(secs) + " s");
  if (v.ok) v.detail = "worst |cos| deficit " + std::to_string(1.0 - worst_cos) + ", " + std::to_string(secs) + " s";
  return v;
}

Verdict objective_consistency() {
  Verdict v;
  Rng rng(1002);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index n = 2 + rng.below(25);
    const Eigen::Index k = 1 + rng.below(8);
    Matrix a(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      Vector col(n);
      for (Eigen::Index i = 0; i < n; ++i) col(i) = rng.normal();
      a.col(j) = binarize(col);
    }
    Matrix s = oracle::random_symmetric(rng, n).cwiseAbs();
    s.diagonal().setZero();
    const double lambda = 4.0 * rng.uniform();
    const auto ref = oracle::pairwise_objective(a, s);
    const double lhs = ref.f1 + lambda * ref.f2;
    const double tr = trace_objective(a, build_p(static_cast<std::size_t>(n), laplacian(s), lambda));
    worst = std::max(worst, std::abs(lhs - tr) / std::max(std::abs(lhs), 1e-300));
  }
  if (worst > 1e-9) v.fail("relative error " + std::to_string(worst));
  v.detail = v.ok ? "worst relative error " + std::to_string(worst) : v.detail;
  return v;
}

Verdict ap_oracle() {
  Verdict v;
  Rng rng(1003);
  double worst = 0.0;
  int done = 0;
  while (done < 1000) {
    std::vector<std::uint8_t> rel(1 + rng.below(50));
    std::size_t ones = 0;
    for (auto& r : rel) {
      r = rng.uniform() < 0.3;
      ones += r;
    }
    if (ones == 0) continue;
    const std::size_t n_rel = ones + rng.below(4);
    worst = std::max(worst, std::abs(average_precision(rel, n_rel) - oracle::brute_force_ap(rel, n_rel)));
    ++done;
  }
  if (worst > 1e-12) v.fail("max error " + std::to_string(worst));
  if (average_precision(std::vector<std::uint8_t>{1, 1, 0}, 2) != 1.0) v.fail("[1,1,0]");
  if (average_precision(std::vector<std::uint8_t>{0, 1}, 1) != 0.5) v.fail("[0,1]");
  if (std::abs(average_precision(std::vector<std::uint8_t>{1, 0, 1}, 2) - 5.0 / 6.0) > 1e-12) v.fail("[1,0,1]");
  return v;
}

RankedResult ranked(const std::string& q, std::size_t len) {
  RankedResult r;
  r.query_id = q;
  for (std::size_t i = 0; i < len; ++i) r.ranking.push_back({"g" + std::to_string(i), 0, 0, 0, 0});
  return r;
}

Verdict cmc_properties() {
  Verdict v;
  Rng rng(1004);
  for (int t = 0; t < 1000 && v.ok; ++t) {
    GroundTruth gt;
    std::vector<RankedResult> rs;
    const std::size_t nq = 1 + rng.below(10);
    for (std::size_t q = 0; q < nq; ++q) {
      const std::string qid = "q" + std::to_string(q);
      const std::size_t len = 1 + rng.below(30);
      rs.push_back(ranked(qid, len));
      gt.relevant[qid].insert("g" + std::to_string(rng.below(len)));
      if (rng.uniform() < 0.5) gt.relevant[qid].insert("g" + std::to_string(rng.below(len)));
    }
    const auto curve = cmc(rs, gt, 1 + rng.below(40));
    for (std::size_t i = 1; i < curve.size(); ++i) {
      if (curve[i] < curve[i - 1]) v.fail("decrease in set " + std::to_string(t));
    }
  }
  GroundTruth gt;
  gt.relevant["q1"] = {"g0"};
  gt.relevant["q2"] = {"g2"};
  if (cmc({ranked("q1", 3), ranked("q2", 3)}, gt, 3) != std::vector<double>{0.5, 0.5, 1.0}) v.fail("worked example");
  return v;
}

Verdict svm_oracle() {
  Verdict v;
  Rng rng(1005);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    const Vector u{{std::cos(angle), std::sin(angle)}};
    const Vector perp{{-u(1), u(0)}};
    Matrix x(20, 2);
    std::vector<int> y(20);
    for (Eigen::Index i = 0; i < 20; ++i) {
      const int label = i % 2 == 0 ? 1 : -1;
      y[static_cast<std::size_t>(i)] = label;
      const double along = label * (0.3 + std::abs(rng.normal()));
      x.row(i) = (along * u + 2.0 * rng.normal() * perp).transpose().array() + 1.0;
    }
    const LinearModel m = train_linear_svm(x, y, {});
    const auto ref = oracle::subgradient_svm(x, y, 1.0, 50000, 4);
    const double mine = oracle::svm_primal(m.w, m.b, x, y, 1.0);
    worst = std::max(worst, (mine - ref.objective) / ref.objective);
    for (Eigen::Index i = 0; i < 20; ++i) {
      if (y[static_cast<std::size_t>(i)] * m.margin(x.row(i).transpose()) <= 0.0) {
        v.fail("misclassified point in problem " + std::to_string(t));
      }
    }
  }
  if (worst > 1e-4) v.fail("relative gap " + std::to_string(worst));
  if (v.ok) v.detail = "worst relative excess over oracle " + std::to_string(worst);
  return v;
}

std::string maps(const ComparisonRecord& r, std::size_t i) {
  std::ostringstream s;
  s << "k=" << r.ks[i] << " " << r.mean_map_a(i) << " vs " << r.mean_map_b(i) << " wins " << r.wins_b(i) << "; ";
  return s.str();
}

Verdict sharing_direction() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const ComparisonRecord r = run_sharing_experiment(ExperimentSpec{});
  const double secs = seconds_since(t0);
  std::string detail;
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    detail += maps(r, i);
    if (!(r.mean_map_b(i) > r.mean_map_a(i)) || r.wins_b(i) < 4) v.fail(maps(r, i));
  }
  if (secs >= 120.0) v.fail("took " + std::to_string(secs) + " s");
  if (v.ok) v.detail = detail + std::to_string(secs) + " s";
  return v;
}

Verdict redundancy_direction() {
  Verdict v;
  const ComparisonRecord r = run_redundancy_experiment(ExperimentSpec{});
  if (!(r.mean_corr_b() < r.mean_corr_a())) v.fail("correlation not lower at gamma=7");
  std::string detail = "corr " + std::to_string(r.mean_corr_a()) + " vs " + std::to_string(r.mean_corr_b()) + "; ";
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    detail += maps(r, i);
    if (r.mean_map_b(i) < r.mean_map_a(i)) v.fail(maps(r, i));
  }
  if (v.ok) v.detail = detail;
  return v;
}

Verdict attr_vs_raw() {
  Verdict v;
  const ComparisonRecord r = run_attr_vs_raw_experiment(ExperimentSpec{});
  std::string detail;
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    detail += maps(r, i);
    if (r.wins_b(i, true) < 4) v.fail(maps(r, i));
  }
  if (v.ok) v.detail = detail;
  return v;
}

Verdict fusion_invariance() {
  Verdict v;
  Rng rng(1009);
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index n = 2 + rng.below(200);
    const Eigen::Index k = 1 + rng.below(20);
    Matrix g(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) g(i, j) = rng.normal();
    }
    Vector q(k);
    for (Eigen::Index j = 0; j < k; ++j) q(j) = rng.normal();
    std::vector<std::string> ids;
    for (Eigen::Index i = 0; i < n; ++i) ids.push_back("img" + std::to_string(i));
    const Vector attr = score_attr(q, g);
    const auto norm = t % 2 ? ScoreNormalization::kMinMax : ScoreNormalization::kSigmoid;
    const FusionScores f =
        fuse_scores(attr, Vector::Constant(n, rng.normal()), Vector::Constant(n, rng.normal()), norm);
    const RankedResult a = rank(f, ids);
    const RankedResult b = rank(attr, ids);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (a.ranking[static_cast<std::size_t>(i)].image_id != b.ranking[static_cast<std::size_t>(i)].image_id) {
        v.fail("gallery " + std::to_string(t) + " differs at rank " + std::to_string(i + 1));
        break;
      }
    }
  }
  return v;
}

bool run_chain(const std::filesystem::path& dir, std::string& why) {
  for (const char* cmd : {"synth", "learn", "detect", "embed", "search", "eval"}) {
    std::ostringstream out, err;
    const int code = run_cli({"--run-dir", dir.string(), "--seed", "42", cmd}, out, err);
    if (code != kExitOk) {
      why = std::string(cmd) + ": " + err.str();
      return false;
    }
  }
  return true;
}

Verdict cli_determinism() {
  Verdict v;
  TempDir tmp("acceptance");
  std::string why;
  if (!run_chain(tmp.path() / "a", why) || !run_chain(tmp.path() / "b", why)) {
    v.fail(why);
    return v;
  }
  for (const char* f : {"attributes.bin", "attributes.json", "detectors.bin", "detectors.json", "rankings.csv",
                        "eval_report.json", "cmc.csv"}) {
    const std::string a = read_file(tmp.path() / "a" / f);
    if (a.empty() || a != read_file(tmp.path() / "b" / f)) v.fail(std::string(f) + " differs");
  }
  return v;
}

Verdict repeated_splits() {
  Verdict v;
  SyntheticOptions o;
  o.n_instances = 40;
  o.views_per_instance = 2;
  o.seed = 1011;
  const FeatureDataset ds = generate_synthetic(o);
  PipelineConfig c;
  c.k = 40;
  c.k_nn = 5;
  c.protocol = Protocol::kProbeGallery;
  c.max_rank = 20;
  const EvalReport r = repeated_splits_eval(ds, 10, c);
  if (r.repeats.size() != 10) v.fail(std::to_string(r.repeats.size()) + " curves");
  for (const auto& rep : r.repeats) {
    if (rep.cmc.size() != 20) v.fail("curve length " + std::to_string(rep.cmc.size()));
  }
  for (std::size_t i = 1; i < r.cmc.size(); ++i) {
    if (r.cmc[i] < r.cmc[i - 1]) v.fail("mean curve decreases at rank " + std::to_string(i + 1));
  }
  if (r.cmc.empty() || r.cmc.back() != 1.0) v.fail("final value is not 1.0");
  if (v.ok) v.detail = "rank-1 " + std::to_string(r.cmc.front()) + ", mAP " + std::to_string(r.map);
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"eigen oracle", eigen_oracle},
      {"objective consistency", objective_consistency},
      {"average precision oracle", ap_oracle},
      {"cmc properties", cmc_properties},
      {"svm oracle", svm_oracle},
      {"sharing direction", sharing_direction},
      {"redundancy direction", redundancy_direction},
      {"attributes vs raw", attr_vs_raw},
      {"fusion ordering invariance", fusion_invariance},
      {"cli determinism", cli_determinism},
      {"repeated splits", repeated_splits},
  };
  int failures = 0;
  int index = 1;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v.fail(std::string("threw: ") + e.what());
    }
    failures += !v.ok;
    std::printf("%s %2d %s%s%s\n", v.ok ? "PASS" : "FAIL", index++, name.c_str(), v.detail.empty() ? "" : ": ",
                v.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
