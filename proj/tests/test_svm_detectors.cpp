#include <cmath>

#include <gtest/gtest.h>

#include "attribex/detectors.hpp"
#include "attribex/svm.hpp"
#include "oracles.hpp"

using namespace attribex;

TEST(Svm, OneDimensionalSeparable) {
  Matrix pos(2, 1);
  pos << 2, 3;
  Matrix neg(2, 1);
  neg << -2, -3;
  const LinearModel m = train_linear_svm(pos, neg, 1.0);
  EXPECT_GT(m.w(0), 0.0);
  for (double x : {2.0, 3.0}) EXPECT_GT(m.w(0) * x + m.b, 0.0);
  for (double x : {-2.0, -3.0}) EXPECT_LT(m.w(0) * x + m.b, 0.0);
  EXPECT_LE(std::abs(m.b), 1e-6);
  EXPECT_TRUE(m.converged);
}

TEST(Svm, MirrorSymmetricDataHasZeroBias) {
  Rng rng(41);
  Matrix pos(15, 3);
  for (Eigen::Index i = 0; i < pos.rows(); ++i) pos.row(i) << rng.normal() + 1, rng.normal(), rng.normal();
  const Matrix neg = -pos;
  const LinearModel m = train_linear_svm(pos, neg, 1.0);
  EXPECT_LE(std::abs(m.b), 1e-6);
}

TEST(Svm, MatchesSubgradientOracleSeed3) {
  Rng rng(3);
  Matrix x(30, 2);
  std::vector<int> y(30);
  for (Eigen::Index i = 0; i < 30; ++i) {
    y[static_cast<std::size_t>(i)] = i < 15 ? 1 : -1;
    const double shift = i < 15 ? 2.0 : -2.0;
    x.row(i) << rng.normal() * 0.5 + shift, rng.normal() * 0.5 + shift;
  }
  const LinearModel m = train_linear_svm(x, y, {});
  const auto o = oracle::subgradient_svm(x, y, 1.0, 50000, 4);
  const double mine = oracle::svm_primal(m.w, m.b, x, y, 1.0);
  EXPECT_LE(std::abs(mine - o.objective), 1e-4 * o.objective);
  EXPECT_NEAR(m.objective, mine, 1e-9 * mine);
}

TEST(Svm, NonSeparableMatchesOracle) {
  Rng rng(42);
  Matrix x(40, 3);
  std::vector<int> y(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    y[static_cast<std::size_t>(i)] = rng.uniform() < 0.5 ? 1 : -1;
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = rng.normal() + 0.4 * y[static_cast<std::size_t>(i)];
  }
  SvmOptions opts;
  opts.c = 0.5;
  const LinearModel m = train_linear_svm(x, y, opts);
  const auto o = oracle::subgradient_svm(x, y, 0.5, 50000, 4);
  EXPECT_LE(oracle::svm_primal(m.w, m.b, x, y, 0.5), o.objective * (1 + 1e-4));
  EXPECT_LE(m.duality_gap, 1e-6 * m.objective + 1e-12);
}

TEST(Svm, OptimalBiasMinimizesHinge) {
  Rng rng(43);
  std::vector<double> s(25);
  std::vector<int> y(25);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.normal();
    y[i] = rng.uniform() < 0.4 ? 1 : -1;
  }
  auto hinge = [&](double b) {
    double t = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) t += std::max(0.0, 1.0 - y[i] * (s[i] + b));
    return t;
  };
  const double b = optimal_bias(s, y);
  for (double probe = -4.0; probe <= 4.0; probe += 0.01) EXPECT_LE(hinge(b), hinge(probe) + 1e-12);
}

TEST(Svm, DegenerateAndEmptyClass) {
  const Matrix x = Matrix::Ones(4, 2);
  const std::vector<int> y = {1, -1, 1, -1};
  const LinearModel m = train_linear_svm(x, y, {});
  EXPECT_TRUE(m.degenerate);
  EXPECT_EQ(m.w, Vector::Zero(2));
  const std::vector<int> all_pos = {1, 1, 1, 1};
  EXPECT_THROW(train_linear_svm(x, all_pos, {}), Error);
}

namespace {

FeatureDataset two_instance_set() {
  Matrix x(5, 2);
  x << 1.0, 0.1, 0.9, -0.1, 1.1, 0.0, -1.0, 0.2, -0.8, 0.0;
  std::vector<ImageRecord> recs = {{"a1", "A", "c", Split::kTrain},
                                   {"a2", "A", "c", Split::kTrain},
                                   {"a3", "A", "c", Split::kTrain},
                                   {"b1", "B", "c", Split::kTrain},
                                   {"b2", "B", "c", Split::kTrain}};
  return FeatureDataset(recs, x);
}

}  // namespace

TEST(Detectors, PositivesFollowAttributeSign) {
  const FeatureDataset ds = two_instance_set();
  AttributeMatrix a;
  a.a.resize(2, 1);
  a.a << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
  const DetectorBank bank = train_attribute_detectors(ds, a, {});
  ASSERT_EQ(bank.attribute_count(), 1u);
  EXPECT_EQ(bank.positive_counts[0], 3u);
  for (std::size_t i = 0; i < 5; ++i) {
    const double score = embed(bank, ds.feature(i).transpose()).scores(0);
    EXPECT_EQ(score > 0.0, i < 3) << i;
  }
}

TEST(Detectors, BankShapeAndMatrixRoundTrip) {
  const FeatureDataset ds = generate_synthetic(12, 3, 8, 0.3, 44);
  const SimilarityGraph g = build_graph(ds, 4, 2.0);
  DesignOptions o;
  o.k = 10;
  const AttributeMatrix a = design_attributes(g, o);
  const DetectorBank bank = train_attribute_detectors(ds, a, {});
  EXPECT_EQ(bank.attribute_count(), 10u);
  const DetectorBank back = bank_from_matrix(bank.to_matrix(), bank_sidecar(bank));
  EXPECT_EQ(back.to_matrix(), bank.to_matrix());
  EXPECT_EQ(back.positive_counts, bank.positive_counts);
  const Matrix e = embed_rows(bank, ds.features());
  EXPECT_EQ(e.cols(), 10);
  for (std::size_t i = 0; i < ds.n_images(); i += 7) {
    EXPECT_LT((e.row(static_cast<Eigen::Index>(i)).transpose() - embed(bank, ds.feature(i).transpose()).scores)
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
  }
  EXPECT_EQ(bank.prefix(4).attribute_count(), 4u);
}

TEST(Detectors, EmbedSingleDetector) {
  DetectorBank bank;
  bank.feature_dim = 3;
  LinearModel m;
  m.w = Vector{{1.0, 0.0, 0.0}};
  m.b = 0.0;
  bank.detectors.push_back(m);
  bank.positive_counts.push_back(1);
  EXPECT_EQ(embed(bank, Vector{{0.7, 0.2, -0.1}}).scores, (Vector{{0.7}}));
  EXPECT_THROW(embed(bank, Vector{{0.7, 0.2}}), Error);
}

TEST(Detectors, CategoryClassifierSeparates) {
  Rng rng(45);
  Matrix pos(20, 4);
  Matrix neg(20, 4);
  for (Eigen::Index i = 0; i < 20; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      pos(i, j) = rng.normal() * 0.3 + (j == 0 ? 2.0 : 0.0);
      neg(i, j) = rng.normal() * 0.3 - (j == 0 ? 2.0 : 0.0);
    }
  }
  const LinearModel m = train_category_classifier(pos, neg, {});
  for (Eigen::Index i = 0; i < 20; ++i) {
    EXPECT_GT(m.margin(pos.row(i).transpose()), 0.0);
    EXPECT_LT(m.margin(neg.row(i).transpose()), 0.0);
  }
  EXPECT_THROW(train_category_classifier(pos, Matrix(0, 4), {}), Error);
  const LinearModel back = model_from_json(model_to_json(m));
  EXPECT_EQ(back.w, m.w);
  EXPECT_EQ(back.b, m.b);
}
