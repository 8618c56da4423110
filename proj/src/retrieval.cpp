#include "attribex/retrieval.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "attribex/kernels.hpp"

namespace attribex {

const char* to_string(AttrMetric m) { return m == AttrMetric::kEuclidean ? "euclidean" : "cosine"; }
const char* to_string(ScoreNormalization n) { return n == ScoreNormalization::kSigmoid ? "sigmoid" : "minmax"; }

AttrMetric parse_attr_metric(const std::string& text) {
  if (text == "cosine") return AttrMetric::kCosine;
  if (text == "euclidean") return AttrMetric::kEuclidean;
  throw Error(ErrorKind::kConfig, fmt::format("unknown attribute metric '{}'", text));
}

ScoreNormalization parse_score_normalization(const std::string& text) {
  if (text == "minmax") return ScoreNormalization::kMinMax;
  if (text == "sigmoid") return ScoreNormalization::kSigmoid;
  throw Error(ErrorKind::kConfig, fmt::format("unknown score normalization '{}'", text));
}

Vector score_attr(const Vector& query, const Matrix& gallery, AttrMetric metric) {
  if (gallery.cols() != query.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("query embedding has length {}, gallery has {}", query.size(), gallery.cols()));
  }
  Vector out;
  if (metric == AttrMetric::kCosine) {
    kernels::omp::cosine_scores(query, gallery, out);
  } else {
    out.resize(gallery.rows());
    for (Eigen::Index i = 0; i < gallery.rows(); ++i) out(i) = -(gallery.row(i).transpose() - query).norm();
  }
  return out;
}

Vector score_deep(const Vector& query_feature, const Matrix& gallery_features) {
  if (gallery_features.cols() != query_feature.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("query feature has dim {}, gallery has {}", query_feature.size(), gallery_features.cols()));
  }
  Vector out;
  kernels::omp::cosine_scores(query_feature, gallery_features, out);
  return out;
}

Vector score_class(const LinearModel& model, const Matrix& gallery_features) {
  if (gallery_features.cols() != model.w.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("classifier has dim {}, gallery has {}", model.w.size(), gallery_features.cols()));
  }
  Vector out(gallery_features.rows());
  for (Eigen::Index i = 0; i < gallery_features.rows(); ++i) out(i) = model.margin(gallery_features.row(i).transpose());
  return out;
}

Vector minmax_normalize(const Vector& scores) {
  if (scores.size() == 0) throw Error(ErrorKind::kInvalidArgument, "minmax_normalize on empty scores");
  const double lo = scores.minCoeff();
  const double hi = scores.maxCoeff();
  if (hi == lo) return Vector::Constant(scores.size(), 0.5);
  return (scores.array() - lo) / (hi - lo);
}

Vector sigmoid_normalize(const Vector& scores) {
  return scores.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Vector normalize_scores(const Vector& scores, ScoreNormalization mode) {
  return mode == ScoreNormalization::kSigmoid ? sigmoid_normalize(scores) : minmax_normalize(scores);
}

Vector fuse(const Vector& s_deep, const Vector& s_class, const Vector& s_attr) {
  if (s_deep.size() != s_attr.size() || s_class.size() != s_attr.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("fuse: lengths {}, {}, {} differ", s_deep.size(), s_class.size(), s_attr.size()));
  }
  return s_deep + s_class + s_attr;
}

FusionScores fuse_scores(const Vector& raw_attr, const Vector& raw_deep, const Vector& raw_class,
                         ScoreNormalization mode) {
  const Eigen::Index n = raw_attr.size();
  FusionScores f;
  f.s_attr = normalize_scores(raw_attr, mode);
  f.s_deep = raw_deep.size() == 0 ? Vector::Zero(n) : normalize_scores(raw_deep, mode);
  f.s_class = raw_class.size() == 0 ? Vector::Zero(n) : normalize_scores(raw_class, mode);
  f.fused = fuse(f.s_deep, f.s_class, f.s_attr);
  return f;
}

namespace {

std::vector<std::size_t> ranking_order(const Vector& scores, const std::vector<std::string>& ids) {
  if (static_cast<std::size_t>(scores.size()) != ids.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("rank: {} scores but {} image ids", scores.size(), ids.size()));
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = scores(static_cast<Eigen::Index>(a));
    const double sb = scores(static_cast<Eigen::Index>(b));
    if (sa != sb) return sa > sb;
    return ids[a] < ids[b];
  });
  return order;
}

}  // namespace

RankedResult rank(const Vector& scores, const std::vector<std::string>& image_ids, std::string query_id) {
  RankedResult r;
  r.query_id = std::move(query_id);
  for (auto idx : ranking_order(scores, image_ids)) {
    RankedEntry e;
    e.image_id = image_ids[idx];
    e.score = scores(static_cast<Eigen::Index>(idx));
    e.s_attr = e.score;
    r.ranking.push_back(std::move(e));
  }
  return r;
}

RankedResult rank(const FusionScores& scores, const std::vector<std::string>& image_ids, std::string query_id) {
  RankedResult r;
  r.query_id = std::move(query_id);
  for (auto idx : ranking_order(scores.fused, image_ids)) {
    const auto i = static_cast<Eigen::Index>(idx);
    r.ranking.push_back({image_ids[idx], scores.fused(i), scores.s_attr(i), scores.s_deep(i), scores.s_class(i)});
  }
  return r;
}

void write_rankings_csv(std::ostream& out, const std::vector<RankedResult>& results) {
  out << "query_id,rank,image_id,fused,s_attr,s_deep,s_class\n";
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.ranking.size(); ++i) {
      const auto& e = r.ranking[i];
      out << fmt::format("{},{},{},{},{},{},{}\n", r.query_id, i + 1, e.image_id, e.score, e.s_attr, e.s_deep,
                         e.s_class);
    }
  }
}

std::vector<RankedResult> read_rankings_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("query_id,rank,image_id", 0) != 0) {
    throw Error(ErrorKind::kParse, "rankings CSV: missing header");
  }
  std::vector<RankedResult> results;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw Error(ErrorKind::kParse, fmt::format("rankings CSV line {}: expected 7 cells", line_no));
    try {
      auto [it, inserted] = index.try_emplace(cells[0], results.size());
      if (inserted) results.push_back({cells[0], {}});
      auto& r = results[it->second];
      if (std::stoul(cells[1]) != r.ranking.size() + 1) {
        throw Error(ErrorKind::kParse, fmt::format("rankings CSV line {}: ranks out of order", line_no));
      }
      r.ranking.push_back({cells[2], std::stod(cells[3]), std::stod(cells[4]), std::stod(cells[5]), std::stod(cells[6])});
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kParse, fmt::format("rankings CSV line {}: bad number", line_no));
    }
  }
  return results;
}

}  // namespace attribex
