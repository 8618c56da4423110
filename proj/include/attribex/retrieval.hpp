#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "attribex/common.hpp"
#include "attribex/svm.hpp"

namespace attribex {

enum class AttrMetric { kCosine, kEuclidean };
enum class ScoreNormalization { kMinMax, kSigmoid };

const char* to_string(AttrMetric m);
const char* to_string(ScoreNormalization n);
AttrMetric parse_attr_metric(const std::string& text);
ScoreNormalization parse_score_normalization(const std::string& text);

// Similarity in attribute space. Cosine, or negative Euclidean distance.
Vector score_attr(const Vector& query, const Matrix& gallery, AttrMetric metric = AttrMetric::kCosine);
Vector score_deep(const Vector& query_feature, const Matrix& gallery_features);
Vector score_class(const LinearModel& model, const Matrix& gallery_features);

// (x - min) / (max - min); a constant vector maps to 0.5 everywhere.
Vector minmax_normalize(const Vector& scores);
Vector sigmoid_normalize(const Vector& scores);
Vector normalize_scores(const Vector& scores, ScoreNormalization mode);

Vector fuse(const Vector& s_deep, const Vector& s_class, const Vector& s_attr);

struct FusionScores {
  Vector s_attr;
  Vector s_deep;
  Vector s_class;
  Vector fused;
};

// Normalizes each enabled component over the gallery and sums them. Disabled
// components are all zeros. Pass empty vectors for disabled components.
FusionScores fuse_scores(const Vector& raw_attr, const Vector& raw_deep, const Vector& raw_class,
                         ScoreNormalization mode);

struct RankedEntry {
  std::string image_id;
  double score = 0.0;
  double s_attr = 0.0;
  double s_deep = 0.0;
  double s_class = 0.0;
};

struct RankedResult {
  std::string query_id;
  std::vector<RankedEntry> ranking;  // score descending, ties by image_id
};

RankedResult rank(const Vector& scores, const std::vector<std::string>& image_ids,
                  std::string query_id = {});
RankedResult rank(const FusionScores& scores, const std::vector<std::string>& image_ids,
                  std::string query_id = {});

// CSV columns: query_id, rank, image_id, fused, s_attr, s_deep, s_class.
void write_rankings_csv(std::ostream& out, const std::vector<RankedResult>& results);
std::vector<RankedResult> read_rankings_csv(std::istream& in);

}  // namespace attribex
