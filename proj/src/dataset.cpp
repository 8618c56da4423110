#include "attribex/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "attribex/atsf_io.hpp"

namespace attribex {

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kGallery: return "gallery";
    case Split::kProbe: return "probe";
    case Split::kDistractor: return "distractor";
  }
  return "train";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "gallery") return Split::kGallery;
  if (text == "probe") return Split::kProbe;
  if (text == "distractor") return Split::kDistractor;
  throw Error(ErrorKind::kParse, fmt::format("unknown split '{}'", text));
}

FeatureDataset::FeatureDataset(std::vector<ImageRecord> images, Matrix features)
    : images_(std::move(images)), features_(std::move(features)) {
  if (static_cast<Eigen::Index>(images_.size()) != features_.rows()) {
    throw Error(ErrorKind::kRowMismatch,
                fmt::format("{} image records but {} feature rows", images_.size(), features_.rows()));
  }
  if (!features_.allFinite()) {
    for (Eigen::Index i = 0; i < features_.rows(); ++i) {
      if (!features_.row(i).allFinite()) {
        throw Error(ErrorKind::kNonFinite,
                    fmt::format("non-finite feature for image '{}'", images_[static_cast<std::size_t>(i)].image_id));
      }
    }
  }
  std::unordered_set<std::string> seen;
  std::unordered_map<std::string, std::size_t> instance_index;
  image_instance_.reserve(images_.size());
  for (std::size_t i = 0; i < images_.size(); ++i) {
    const auto& rec = images_[i];
    if (!seen.insert(rec.image_id).second) {
      throw Error(ErrorKind::kDuplicateId, fmt::format("duplicate image_id '{}'", rec.image_id));
    }
    auto [it, inserted] = instance_index.try_emplace(rec.instance_id, instance_ids_.size());
    if (inserted) {
      instance_ids_.push_back(rec.instance_id);
      groups_.emplace_back();
    }
    image_instance_.push_back(it->second);
    groups_[it->second].push_back(i);
  }
}

FeatureDataset FeatureDataset::subset(const std::vector<std::size_t>& rows) const {
  std::vector<ImageRecord> images;
  images.reserve(rows.size());
  Matrix features(static_cast<Eigen::Index>(rows.size()), features_.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    images.push_back(images_.at(rows[r]));
    features.row(static_cast<Eigen::Index>(r)) = features_.row(static_cast<Eigen::Index>(rows[r]));
  }
  return FeatureDataset(std::move(images), std::move(features));
}

FeatureDataset FeatureDataset::with_features(Matrix features) const {
  return FeatureDataset(images_, std::move(features));
}

FeatureDataset load_features(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta.jsonl";
  const auto bin_path = dir / "features.bin";
  if (!std::filesystem::exists(meta_path)) {
    throw Error(ErrorKind::kMissingFile, fmt::format("missing file: {}", meta_path.string()));
  }
  if (!std::filesystem::exists(bin_path)) {
    throw Error(ErrorKind::kMissingFile, fmt::format("missing file: {}", bin_path.string()));
  }
  const Matrix raw = read_atsf(bin_path);

  std::ifstream in(meta_path);
  std::vector<ImageRecord> images;
  std::vector<std::size_t> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ImageRecord rec;
      rec.image_id = j.at("image_id").get<std::string>();
      rec.instance_id = j.at("instance_id").get<std::string>();
      rec.category_id = j.at("category_id").get<std::string>();
      rec.split = parse_split(j.at("split").get<std::string>());
      rows.push_back(j.at("row").get<std::size_t>());
      images.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kParse, fmt::format("{}:{}: {}", meta_path.string(), line_no, e.what()));
    }
  }

  if (static_cast<Eigen::Index>(images.size()) != raw.rows()) {
    throw Error(ErrorKind::kRowMismatch,
                fmt::format("metadata declares {} rows but matrix has {}", images.size(), raw.rows()));
  }
  std::vector<bool> used(images.size(), false);
  Matrix features(raw.rows(), raw.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= images.size() || used[rows[i]]) {
      throw Error(ErrorKind::kRowMismatch,
                  fmt::format("image '{}' has invalid or repeated row {}", images[i].image_id, rows[i]));
    }
    used[rows[i]] = true;
    features.row(static_cast<Eigen::Index>(i)) = raw.row(static_cast<Eigen::Index>(rows[i]));
  }
  return FeatureDataset(std::move(images), std::move(features));
}

void save_features(const FeatureDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "meta.jsonl", std::ios::trunc);
  if (!out) throw Error(ErrorKind::kMissingFile, fmt::format("cannot write {}", (dir / "meta.jsonl").string()));
  for (std::size_t i = 0; i < dataset.n_images(); ++i) {
    const auto& rec = dataset.image(i);
    nlohmann::json j = nlohmann::json::object();
    j["image_id"] = rec.image_id;
    j["instance_id"] = rec.instance_id;
    j["category_id"] = rec.category_id;
    j["split"] = to_string(rec.split);
    j["row"] = i;
    out << j.dump() << '\n';
  }
  write_atsf(dir / "features.bin", dataset.features());
}

Vector l2_normalize(const Vector& v) {
  const double norm = v.norm();
  if (norm == 0.0) return v;
  return v / norm;
}

Vector power_normalize(const Vector& v, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, fmt::format("power normalization alpha {} not in (0, 1]", alpha));
  }
  if (alpha == 1.0) return v;
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double x = v(i);
    out(i) = std::copysign(std::pow(std::abs(x), alpha), x);
  }
  return out;
}

Matrix normalize_rows(const Matrix& features, double alpha) {
  Matrix out(features.rows(), features.cols());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out.row(i) = l2_normalize(power_normalize(features.row(i).transpose(), alpha)).transpose();
  }
  return out;
}

Projector fit_pca_whitener(const Matrix& features, std::size_t target_dim, bool whiten) {
  const auto rows = static_cast<std::size_t>(features.rows());
  const auto dim = static_cast<std::size_t>(features.cols());
  if (rows < 2) throw Error(ErrorKind::kInvalidArgument, "PCA needs at least 2 rows");
  if (target_dim == 0 || target_dim > std::min(rows - 1, dim)) {
    throw Error(ErrorKind::kInvalidArgument,
                fmt::format("target_dim {} must be in [1, min(rows - 1, dim) = {}]", target_dim,
                            std::min(rows - 1, dim)));
  }

  Projector p;
  p.whiten = whiten;
  p.mean = features.colwise().mean().transpose();
  const Matrix centered = features.rowwise() - p.mean.transpose();
  if (centered.cwiseAbs().maxCoeff() == 0.0) {
    throw Error(ErrorKind::kDegenerate, "PCA on identical rows");
  }
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(rows - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::kNoConvergence, "covariance eigensolver failed");

  p.basis.resize(static_cast<Eigen::Index>(target_dim), static_cast<Eigen::Index>(dim));
  p.eigenvalues.resize(static_cast<Eigen::Index>(target_dim));
  for (std::size_t t = 0; t < target_dim; ++t) {
    const auto col = static_cast<Eigen::Index>(dim - 1 - t);
    Vector v = solver.eigenvectors().col(col);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::abs(v(i)) > 1e-12) {
        if (v(i) < 0) v = -v;
        break;
      }
    }
    p.basis.row(static_cast<Eigen::Index>(t)) = v.transpose();
    p.eigenvalues(static_cast<Eigen::Index>(t)) = std::max(0.0, solver.eigenvalues()(col));
  }
  return p;
}

Vector apply_projector(const Projector& p, const Vector& v) {
  if (static_cast<std::size_t>(v.size()) != p.input_dim()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("projector expects dim {}, got {}", p.input_dim(), v.size()));
  }
  Vector out = p.basis * (v - p.mean);
  if (p.whiten) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) /= std::sqrt(p.eigenvalues(i) + kEigenvalueFloor);
  }
  return out;
}

Matrix apply_projector(const Projector& p, const Matrix& rows) {
  if (static_cast<std::size_t>(rows.cols()) != p.input_dim()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("projector expects dim {}, got {}", p.input_dim(), rows.cols()));
  }
  Matrix out = (rows.rowwise() - p.mean.transpose()) * p.basis.transpose();
  if (p.whiten) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) /= std::sqrt(p.eigenvalues(j) + kEigenvalueFloor);
  }
  return out;
}

nlohmann::json projector_to_json(const Projector& p) {
  nlohmann::json j;
  j["mean"] = std::vector<double>(p.mean.data(), p.mean.data() + p.mean.size());
  j["basis"] = std::vector<double>(p.basis.data(), p.basis.data() + p.basis.size());
  j["rows"] = p.basis.rows();
  j["cols"] = p.basis.cols();
  j["eigenvalues"] = std::vector<double>(p.eigenvalues.data(), p.eigenvalues.data() + p.eigenvalues.size());
  j["whiten"] = p.whiten;
  j["eigenvalue_floor"] = kEigenvalueFloor;
  return j;
}

Projector projector_from_json(const nlohmann::json& j) {
  try {
    Projector p;
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto basis = j.at("basis").get<std::vector<double>>();
    const auto eig = j.at("eigenvalues").get<std::vector<double>>();
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    if (static_cast<Eigen::Index>(basis.size()) != rows * cols ||
        static_cast<Eigen::Index>(mean.size()) != cols || static_cast<Eigen::Index>(eig.size()) != rows) {
      throw Error(ErrorKind::kParse, "projector JSON has inconsistent shapes");
    }
    p.mean = Eigen::Map<const Vector>(mean.data(), cols);
    p.basis = Eigen::Map<const Matrix>(basis.data(), rows, cols);
    p.eigenvalues = Eigen::Map<const Vector>(eig.data(), rows);
    p.whiten = j.at("whiten").get<bool>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, fmt::format("projector JSON: {}", e.what()));
  }
}

std::pair<FeatureDataset, FeatureDataset> split_half(const FeatureDataset& dataset, std::uint64_t seed) {
  const std::size_t n = dataset.n_instances();
  if (n < 2) throw Error(ErrorKind::kInvalidArgument, "split_half needs at least 2 instances");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

  std::vector<bool> first(n, false);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) first[order[i]] = true;
  std::vector<std::size_t> rows_a;
  std::vector<std::size_t> rows_b;
  for (std::size_t i = 0; i < dataset.n_images(); ++i) {
    (first[dataset.instance_of(i)] ? rows_a : rows_b).push_back(i);
  }
  return {dataset.subset(rows_a), dataset.subset(rows_b)};
}

namespace {

Vector gaussian(Rng& rng, std::size_t n) {
  Vector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

// Each category owns a latent basis; an instance prototype is a random mix of
// the basis plus an instance-specific residual. Every view index has one
// direction shared by all instances, and each image adds its own noise on top.
FeatureDataset generate_synthetic(const SyntheticOptions& o) {
  if (o.n_instances == 0 || o.views_per_instance == 0 || o.dim == 0 || o.latent_factors == 0) {
    throw Error(ErrorKind::kInvalidArgument, "synthetic generator needs positive counts");
  }
  if (o.view_noise < 0.0) throw Error(ErrorKind::kInvalidArgument, "view_noise must be >= 0");
  if (o.instance_residual < 0.0 || o.image_noise < 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "instance_residual and image_noise must be >= 0");
  }

  Rng rng(o.seed);
  Matrix basis(static_cast<Eigen::Index>(o.latent_factors), static_cast<Eigen::Index>(o.dim));
  for (Eigen::Index r = 0; r < basis.rows(); ++r) basis.row(r) = gaussian(rng, o.dim).transpose();
  Matrix view_dirs(static_cast<Eigen::Index>(o.views_per_instance), static_cast<Eigen::Index>(o.dim));
  for (Eigen::Index v = 0; v < view_dirs.rows(); ++v) {
    view_dirs.row(v) = l2_normalize(gaussian(rng, o.dim)).transpose();
  }

  const std::size_t n_train = o.n_train.value_or(o.n_instances);
  const std::size_t total = o.n_instances * o.views_per_instance + o.n_distractors;
  std::vector<ImageRecord> images;
  images.reserve(total);
  Matrix features(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(o.dim));
  Eigen::Index row = 0;

  for (std::size_t i = 0; i < o.n_instances; ++i) {
    const Vector z = gaussian(rng, o.latent_factors);
    const Vector shared = l2_normalize(basis.transpose() * z);
    const Vector residual = l2_normalize(gaussian(rng, o.dim));
    const Vector prototype = l2_normalize(shared + o.instance_residual * residual);
    const std::string instance = fmt::format("{}_i{:05d}", o.category, i);
    for (std::size_t v = 0; v < o.views_per_instance; ++v) {
      const Vector noise = l2_normalize(gaussian(rng, o.dim));
      const Vector x = prototype + o.view_noise * (view_dirs.row(static_cast<Eigen::Index>(v)).transpose() +
                                                    o.image_noise * noise);
      features.row(row++) = l2_normalize(x).transpose();
      Split split = Split::kTrain;
      if (i >= n_train) split = v == 0 ? Split::kProbe : Split::kGallery;
      images.push_back({fmt::format("{}_v{:03d}", instance, v), instance, o.category, split});
    }
  }

  if (o.n_distractors > 0) {
    Matrix other(static_cast<Eigen::Index>(o.latent_factors), static_cast<Eigen::Index>(o.dim));
    for (Eigen::Index r = 0; r < other.rows(); ++r) other.row(r) = gaussian(rng, o.dim).transpose();
    for (std::size_t d = 0; d < o.n_distractors; ++d) {
      const Vector z = gaussian(rng, o.latent_factors);
      const Vector x = l2_normalize(other.transpose() * z) +
                       o.instance_residual * l2_normalize(gaussian(rng, o.dim));
      features.row(row++) = l2_normalize(x).transpose();
      const std::string id = fmt::format("other_d{:05d}", d);
      images.push_back({id + "_v000", id, "other", d % 2 == 0 ? Split::kTrain : Split::kDistractor});
    }
  }

  round_to_float(features);
  return FeatureDataset(std::move(images), std::move(features));
}

FeatureDataset generate_synthetic(std::size_t n_instances, std::size_t views_per_instance, std::size_t dim,
                                  double view_noise, std::uint64_t seed) {
  SyntheticOptions o;
  o.n_instances = n_instances;
  o.views_per_instance = views_per_instance;
  o.dim = dim;
  o.view_noise = view_noise;
  o.seed = seed;
  return generate_synthetic(o);
}

}  // namespace attribex
