#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "attribex/eval.hpp"
#include "attribex/retrieval.hpp"
#include "oracles.hpp"

using namespace attribex;

TEST(Scores, CosineExamples) {
  Matrix g(2, 2);
  g << 1, 0, 0.6, 0.8;
  const Vector s = score_attr(Vector{{1.0, 0.0}}, g);
  EXPECT_NEAR(s(0), 1.0, 1e-15);
  EXPECT_NEAR(s(1), 0.6, 1e-15);
  EXPECT_EQ(score_attr(Vector{{0.0, 0.0}}, g), Vector::Zero(2));
  EXPECT_NEAR(score_attr(Vector{{0.0, 1.0}}, g.topRows(1))(0), 0.0, 1e-15);
  EXPECT_EQ(score_deep(Vector{{1.0, 2.0}}, Matrix::Ones(3, 2)).size(), 3);
  EXPECT_THROW(score_attr(Vector{{1.0}}, g), Error);
}

TEST(Scores, EuclideanIsNegativeDistance) {
  Matrix g(2, 2);
  g << 0, 0, 3, 4;
  const Vector s = score_attr(Vector{{0.0, 0.0}}, g, AttrMetric::kEuclidean);
  EXPECT_EQ(s(0), 0.0);
  EXPECT_EQ(s(1), -5.0);
}

TEST(Scores, ClassExamples) {
  LinearModel m;
  m.w = Vector::Zero(2);
  m.b = 0.3;
  EXPECT_EQ(score_class(m, Matrix::Random(5, 2)), Vector::Constant(5, 0.3));
  m.w = Vector{{0.5, -1.0}};
  Matrix g(2, 2);
  g << 1.0, 2.0, 2.0, 4.0;
  const Vector s = score_class(m, g);
  EXPECT_NEAR(s(1) - m.b, 2.0 * (s(0) - m.b), 1e-15);
}

TEST(Normalization, MinMaxExamples) {
  EXPECT_EQ(minmax_normalize(Vector{{2.0, 4.0, 6.0}}), (Vector{{0.0, 0.5, 1.0}}));
  EXPECT_EQ(minmax_normalize(Vector{{3.0, 3.0}}), (Vector{{0.5, 0.5}}));
  EXPECT_EQ(minmax_normalize(Vector{{-1.0, 1.0}}), (Vector{{0.0, 1.0}}));
  EXPECT_THROW(minmax_normalize(Vector()), Error);
  const Vector s = sigmoid_normalize(Vector{{0.0, 100.0, -100.0}});
  EXPECT_EQ(s(0), 0.5);
  EXPECT_GT(s(1), 0.999);
  EXPECT_LT(s(2), 0.001);
}

TEST(Fusion, Examples) {
  EXPECT_NEAR(fuse(Vector{{0.2}}, Vector{{0.3}}, Vector{{0.5}})(0), 1.0, 1e-15);
  EXPECT_EQ(fuse(Vector::Zero(1), Vector::Zero(1), Vector::Zero(1))(0), 0.0);
  EXPECT_THROW(fuse(Vector::Zero(2), Vector::Zero(1), Vector::Zero(2)), Error);
}

TEST(Fusion, ConstantComponentsPreserveAttributeOrder) {
  Rng rng(51);
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index n = 2 + t % 30;
    Vector attr(n);
    std::vector<std::string> ids;
    for (Eigen::Index i = 0; i < n; ++i) {
      attr(i) = rng.normal();
      ids.push_back("g" + std::to_string(i));
    }
    const FusionScores f =
        fuse_scores(attr, Vector::Constant(n, rng.normal()), Vector::Constant(n, rng.normal()),
                    ScoreNormalization::kMinMax);
    const RankedResult fused = rank(f, ids);
    const RankedResult alone = rank(attr, ids);
    for (Eigen::Index i = 0; i < n; ++i) {
      EXPECT_EQ(fused.ranking[static_cast<std::size_t>(i)].image_id,
                alone.ranking[static_cast<std::size_t>(i)].image_id);
    }
  }
}

TEST(Rank, OrderAndTies) {
  RankedResult r = rank(Vector{{0.1, 0.9}}, {"a", "b"});
  EXPECT_EQ(r.ranking[0].image_id, "b");
  EXPECT_EQ(r.ranking[1].image_id, "a");
  r = rank(Vector{{0.5, 0.5}}, {"b", "a"});
  EXPECT_EQ(r.ranking[0].image_id, "a");
  EXPECT_EQ(rank(Vector{{0.2}}, {"x"}).ranking.size(), 1u);
  EXPECT_THROW(rank(Vector{{0.2}}, {"x", "y"}), Error);
}

TEST(Rank, CsvRoundTrip) {
  FusionScores f;
  f.s_attr = Vector{{0.25, 1.0}};
  f.s_deep = Vector{{0.5, 0.0}};
  f.s_class = Vector{{0.125, 0.75}};
  f.fused = f.s_attr + f.s_deep + f.s_class;
  std::vector<RankedResult> results = {rank(f, {"g1", "g2"}, "q1"), rank(f, {"g3", "g4"}, "q2")};
  std::stringstream ss;
  write_rankings_csv(ss, results);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "query_id,rank,image_id,fused,s_attr,s_deep,s_class");
  const auto back = read_rankings_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].query_id, "q2");
  EXPECT_EQ(back[0].ranking[0].image_id, "g2");
  EXPECT_EQ(back[0].ranking[0].s_class, 0.75);
  std::stringstream bad("nonsense\n");
  EXPECT_THROW(read_rankings_csv(bad), Error);
}

TEST(AveragePrecision, Examples) {
  EXPECT_EQ(average_precision(std::vector<std::uint8_t>{1, 1, 0}, 2), 1.0);
  EXPECT_EQ(average_precision(std::vector<std::uint8_t>{0, 1}, 1), 0.5);
  EXPECT_NEAR(average_precision(std::vector<std::uint8_t>{1, 0, 1}, 2), 5.0 / 6.0, 1e-15);
  EXPECT_THROW(average_precision(std::vector<std::uint8_t>{1}, 0), Error);
}

TEST(AveragePrecision, MatchesBruteForce) {
  Rng rng(52);
  for (int t = 0; t < 300; ++t) {
    std::vector<std::uint8_t> rel(1 + rng.below(40));
    std::size_t ones = 0;
    for (auto& r : rel) {
      r = rng.uniform() < 0.3;
      ones += r;
    }
    if (ones == 0) continue;
    const std::size_t n_rel = ones + rng.below(3);
    EXPECT_NEAR(average_precision(rel, n_rel), oracle::brute_force_ap(rel, n_rel), 1e-12);
  }
}

namespace {

RankedResult result(const std::string& q, const std::vector<std::string>& ids) {
  RankedResult r;
  r.query_id = q;
  for (const auto& id : ids) r.ranking.push_back({id, 0, 0, 0, 0});
  return r;
}

}  // namespace

TEST(Map, Examples) {
  GroundTruth gt;
  gt.relevant["q1"] = {"a"};
  gt.relevant["q2"] = {"b"};
  const std::vector<RankedResult> rs = {result("q1", {"a", "x"}), result("q2", {"x", "b"})};
  EXPECT_DOUBLE_EQ(mean_average_precision(rs, gt).map, 0.75);
  EXPECT_DOUBLE_EQ(mean_average_precision({rs[1]}, gt).map, 0.5);
  EXPECT_DOUBLE_EQ(mean_average_precision({rs[0]}, gt).map, 1.0);
  gt.relevant["q3"] = {};
  const MapResult m = mean_average_precision({rs[0], result("q3", {"a"})}, gt);
  EXPECT_EQ(m.excluded, std::vector<std::string>{"q3"});
  EXPECT_DOUBLE_EQ(m.map, 1.0);
  EXPECT_THROW(mean_average_precision({result("zz", {"a"})}, gt), Error);
}

TEST(Cmc, Examples) {
  GroundTruth gt;
  gt.relevant["q1"] = {"a"};
  gt.relevant["q2"] = {"b"};
  const std::vector<RankedResult> rs = {result("q1", {"a", "x", "y"}), result("q2", {"x", "y", "b"})};
  EXPECT_EQ(cmc(rs, gt, 3), (std::vector<double>{0.5, 0.5, 1.0}));
  EXPECT_EQ(cmc({result("q1", {"x", "a", "y"})}, gt, 3), (std::vector<double>{0.0, 1.0, 1.0}));
  EXPECT_EQ(cmc({result("q1", {"a"}), result("q2", {"b"})}, gt, 2), (std::vector<double>{1.0, 1.0}));
  gt.relevant["q3"] = {};
  EXPECT_THROW(cmc({result("q3", {"a"})}, gt, 2), Error);
}

TEST(Cmc, MatchesBruteForceAndIsMonotone) {
  Rng rng(53);
  for (int t = 0; t < 100; ++t) {
    GroundTruth gt;
    std::vector<RankedResult> rs;
    std::vector<std::vector<std::uint8_t>> lists;
    const std::size_t nq = 1 + rng.below(8);
    for (std::size_t q = 0; q < nq; ++q) {
      const std::string qid = "q" + std::to_string(q);
      RankedResult r;
      r.query_id = qid;
      std::vector<std::uint8_t> rel;
      const std::size_t len = 1 + rng.below(12);
      for (std::size_t i = 0; i < len; ++i) {
        const std::string id = "g" + std::to_string(i);
        r.ranking.push_back({id, 0, 0, 0, 0});
        rel.push_back(rng.uniform() < 0.2);
        if (rel.back()) gt.relevant[qid].insert(id);
      }
      if (gt.relevant[qid].empty()) {
        gt.relevant[qid].insert("g" + std::to_string(len - 1));
        rel.back() = 1;
      }
      rs.push_back(r);
      lists.push_back(rel);
    }
    const auto curve = cmc(rs, gt, 15);
    EXPECT_EQ(curve, oracle::brute_force_cmc(lists, 15));
    for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_GE(curve[i], curve[i - 1]);
  }
}

TEST(Report, CsvColumns) {
  EvalReport r;
  r.map = 0.5;
  r.cmc = {0.5, 1.0};
  r.repeats.push_back({42, 0.5, {0.5, 1.0}});
  std::stringstream ss;
  write_cmc_csv(ss, r, 2.0, 7.0, 10);
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header, "lambda,gamma,k,repeat,metric,value");
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "2,7,10,0,map,0.5");
  const auto j = report_to_json(r);
  EXPECT_EQ(j.at("repeats").size(), 1u);
}
