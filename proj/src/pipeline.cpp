#include "attribex/pipeline.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace attribex {

const char* to_string(Protocol p) { return p == Protocol::kProbeGallery ? "probe_gallery" : "all_vs_all"; }

Protocol parse_protocol(const std::string& text) {
  if (text == "probe_gallery") return Protocol::kProbeGallery;
  if (text == "all_vs_all") return Protocol::kAllVsAll;
  throw Error(ErrorKind::kConfig, fmt::format("unknown protocol '{}'", text));
}

nlohmann::json config_to_json(const PipelineConfig& c) {
  return {{"lambda", c.lambda},
          {"gamma", c.gamma},
          {"k", c.k},
          {"k_nn", c.k_nn},
          {"c", c.c},
          {"svm_tol", c.svm_tol},
          {"pca_dim", c.pca_dim},
          {"whiten", c.whiten},
          {"power_alpha", c.power_alpha},
          {"edge_weighting", to_string(c.edge_weighting)},
          {"attr_metric", to_string(c.attr_metric)},
          {"normalization", to_string(c.normalization)},
          {"use_deep", c.use_deep},
          {"use_class", c.use_class},
          {"eig_tol", c.eig_tol},
          {"eig_max_iter", c.eig_max_iter},
          {"strict_convergence", c.strict_convergence},
          {"protocol", to_string(c.protocol)},
          {"multi_shot", c.multi_shot},
          {"max_rank", c.max_rank},
          {"base_seed", c.base_seed},
          {"target_category", c.target_category}};
}

Matrix preprocess(const Matrix& raw, double power_alpha, const std::optional<Projector>& projector) {
  Matrix x = normalize_rows(raw, power_alpha);
  if (projector) x = normalize_rows(apply_projector(*projector, x), 1.0);
  return x;
}

namespace {

std::string resolve_target(const FeatureDataset& ds, const PipelineConfig& config) {
  if (!config.target_category.empty()) return config.target_category;
  for (const auto& img : ds.images()) {
    if (img.split == Split::kTrain) return img.category_id;
  }
  throw Error(ErrorKind::kInvalidArgument, "dataset has no training images");
}

}  // namespace

std::vector<std::size_t> attribute_training_rows(const FeatureDataset& ds, const PipelineConfig& config) {
  const std::string target = resolve_target(ds, config);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.n_images(); ++i) {
    if (ds.image(i).split == Split::kTrain && ds.image(i).category_id == target) rows.push_back(i);
  }
  return rows;
}

std::vector<std::size_t> category_negative_rows(const FeatureDataset& ds, const PipelineConfig& config) {
  const std::string target = resolve_target(ds, config);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.n_images(); ++i) {
    if (ds.image(i).split == Split::kTrain && ds.image(i).category_id != target) rows.push_back(i);
  }
  return rows;
}

FeatureDataset design_set(const FeatureDataset& train, const PipelineConfig& config) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < train.n_images(); ++i) {
    const auto& img = train.image(i);
    if (img.split == Split::kDistractor) continue;
    if (!config.target_category.empty() && img.category_id != config.target_category) continue;
    rows.push_back(i);
  }
  FeatureDataset subset = train.subset(rows);
  if (subset.n_instances() < 2) throw Error(ErrorKind::kInvalidArgument, "training needs at least 2 instances");
  return subset;
}

std::optional<Projector> fit_projector(const Matrix& raw_train, const PipelineConfig& config) {
  if (config.pca_dim == 0) return std::nullopt;
  return fit_pca_whitener(normalize_rows(raw_train, config.power_alpha), config.pca_dim, config.whiten);
}

DesignOptions design_options(const PipelineConfig& config) {
  DesignOptions design;
  design.k = config.k;
  design.gamma = config.gamma;
  design.eigen.tol = config.eig_tol;
  design.eigen.max_iter = config.eig_max_iter;
  design.strict = config.strict_convergence;
  return design;
}

SvmOptions svm_options(const PipelineConfig& config) {
  SvmOptions svm;
  svm.c = config.c;
  svm.tol = config.svm_tol;
  return svm;
}

TrainedModel train_model(const FeatureDataset& train, const PipelineConfig& config, const Matrix* category_negatives) {
  const FeatureDataset subset = design_set(train, config);
  TrainedModel model;
  model.power_alpha = config.power_alpha;
  model.projector = fit_projector(subset.features(), config);
  const FeatureDataset prepared =
      subset.with_features(preprocess(subset.features(), config.power_alpha, model.projector));
  model.instance_ids = prepared.instance_ids();
  model.graph = build_graph(prepared, config.k_nn, config.lambda, config.edge_weighting);
  model.attributes = design_attributes(model.graph, design_options(config));
  model.bank = train_attribute_detectors(prepared, model.attributes, svm_options(config));

  if (config.use_class) {
    if (category_negatives == nullptr || category_negatives->rows() == 0) {
      throw Error(ErrorKind::kEmptyClass, "use_class needs other-category training images as negatives");
    }
    model.category = train_category_classifier(
        prepared.features(), preprocess(*category_negatives, config.power_alpha, model.projector),
        svm_options(config));
  }
  return model;
}

std::vector<std::size_t> evaluation_rows(const FeatureDataset& ds) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.n_images(); ++i) {
    if (ds.image(i).split != Split::kTrain) rows.push_back(i);
  }
  return rows;
}

QuerySet build_queries(const FeatureDataset& ds, Protocol protocol, bool multi_shot) {
  QuerySet qs;
  if (protocol == Protocol::kAllVsAll) {
    for (std::size_t i = 0; i < ds.n_images(); ++i) {
      qs.gallery.push_back(i);
      if (ds.image(i).split != Split::kDistractor) qs.queries.push_back(i);
    }
  } else {
    for (const auto& group : ds.images_by_instance()) {
      std::vector<std::size_t> probes;
      std::vector<std::size_t> gallery;
      bool distractor_only = true;
      for (auto i : group) {
        const Split s = ds.image(i).split;
        if (s == Split::kDistractor) {
          qs.gallery.push_back(i);
          continue;
        }
        distractor_only = false;
        (s == Split::kProbe ? probes : gallery).push_back(i);
      }
      if (distractor_only) continue;
      if (probes.empty()) {
        probes.push_back(gallery.front());
        gallery.erase(gallery.begin());
      }
      if (!multi_shot && gallery.size() > 1) gallery.resize(1);
      qs.queries.insert(qs.queries.end(), probes.begin(), probes.end());
      qs.gallery.insert(qs.gallery.end(), gallery.begin(), gallery.end());
    }
    std::sort(qs.queries.begin(), qs.queries.end());
    std::sort(qs.gallery.begin(), qs.gallery.end());
  }
  for (auto q : qs.queries) {
    auto& rel = qs.gt.relevant[ds.image(q).image_id];
    for (auto g : qs.gallery) {
      if (g != q && ds.instance_of(g) == ds.instance_of(q)) rel.insert(ds.image(g).image_id);
    }
  }
  return qs;
}

namespace {

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows, Eigen::Index cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r])).head(cols);
  return out;
}

template <typename ScoreFn>
std::vector<RankedResult> rank_each(const FeatureDataset& ds, const QuerySet& qs, ScoreFn&& score) {
  std::vector<RankedResult> results(qs.queries.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t qi = 0; qi < qs.queries.size(); ++qi) {
    const std::size_t q = qs.queries[qi];
    std::vector<std::size_t> gallery;
    gallery.reserve(qs.gallery.size());
    for (auto g : qs.gallery) {
      if (g != q) gallery.push_back(g);
    }
    std::vector<std::string> ids;
    ids.reserve(gallery.size());
    for (auto g : gallery) ids.push_back(ds.image(g).image_id);
    results[qi] = rank(score(q, gallery), ids, ds.image(q).image_id);
  }
  return results;
}

}  // namespace

std::vector<RankedResult> rank_queries(const FeatureDataset& ds, const QuerySet& qs, const Matrix& attr_embeddings,
                                       const Matrix& deep_features, const Vector& class_scores,
                                       const PipelineConfig& config) {
  const Eigen::Index k = attr_embeddings.cols();
  return rank_each(ds, qs, [&](std::size_t q, const std::vector<std::size_t>& gallery) {
    const Vector raw_attr = score_attr(attr_embeddings.row(static_cast<Eigen::Index>(q)).transpose(),
                                       gather_rows(attr_embeddings, gallery, k), config.attr_metric);
    Vector raw_deep;
    if (config.use_deep) {
      raw_deep = score_deep(deep_features.row(static_cast<Eigen::Index>(q)).transpose(),
                            gather_rows(deep_features, gallery, deep_features.cols()));
    }
    Vector raw_class;
    if (config.use_class && class_scores.size() > 0) {
      raw_class.resize(static_cast<Eigen::Index>(gallery.size()));
      for (std::size_t g = 0; g < gallery.size(); ++g) {
        raw_class(static_cast<Eigen::Index>(g)) = class_scores(static_cast<Eigen::Index>(gallery[g]));
      }
    }
    return fuse_scores(raw_attr, raw_deep, raw_class, config.normalization);
  });
}

std::vector<RankedResult> rank_raw(const FeatureDataset& ds, const QuerySet& qs, const Matrix& deep_features) {
  return rank_each(ds, qs, [&](std::size_t q, const std::vector<std::size_t>& gallery) {
    FusionScores f;
    f.s_deep = score_deep(deep_features.row(static_cast<Eigen::Index>(q)).transpose(),
                          gather_rows(deep_features, gallery, deep_features.cols()));
    f.fused = f.s_deep;
    f.s_attr = Vector::Zero(f.fused.size());
    f.s_class = Vector::Zero(f.fused.size());
    return f;
  });
}

EvalReport evaluate(const std::vector<RankedResult>& results, const GroundTruth& gt, std::size_t max_rank) {
  EvalReport report;
  const MapResult m = mean_average_precision(results, gt);
  report.per_query_ap = m.per_query_ap;
  report.map = m.map;
  report.excluded_queries = m.excluded;
  std::vector<RankedResult> answerable;
  for (const auto& r : results) {
    if (!gt.relevant.at(r.query_id).empty()) answerable.push_back(r);
  }
  if (!answerable.empty()) report.cmc = cmc(answerable, gt, max_rank);
  return report;
}

EmbeddedSet embed_dataset(const TrainedModel& model, const FeatureDataset& ds) {
  EmbeddedSet e;
  e.deep = preprocess(ds.features(), model.power_alpha, model.projector);
  e.attr = embed_rows(model.bank, e.deep);
  if (model.category) e.category = score_class(*model.category, e.deep);
  return e;
}

EvalReport evaluate_prefix(const FeatureDataset& ds, const QuerySet& qs, const EmbeddedSet& e, std::size_t k,
                           const PipelineConfig& config) {
  if (k == 0 || k > static_cast<std::size_t>(e.attr.cols())) {
    throw Error(ErrorKind::kInvalidArgument,
                fmt::format("prefix k = {} outside [1, {}]", k, e.attr.cols()));
  }
  const Matrix attr = e.attr.leftCols(static_cast<Eigen::Index>(k));
  return evaluate(rank_queries(ds, qs, attr, e.deep, e.category, config), qs.gt, config.max_rank);
}

EvalReport repeated_splits_eval(const FeatureDataset& dataset, std::size_t n_repeats, const PipelineConfig& config) {
  if (n_repeats < 1) throw Error(ErrorKind::kInvalidArgument, "n_repeats must be >= 1");
  std::vector<std::size_t> core_rows;
  std::vector<std::size_t> distractor_rows;
  for (std::size_t i = 0; i < dataset.n_images(); ++i) {
    (dataset.image(i).split == Split::kDistractor ? distractor_rows : core_rows).push_back(i);
  }
  const FeatureDataset core = dataset.subset(core_rows);

  EvalReport report;
  report.config_snapshot = config_to_json(config);
  report.config_snapshot["n_repeats"] = n_repeats;
  for (std::size_t r = 0; r < n_repeats; ++r) {
    const std::uint64_t seed = config.base_seed + r;
    try {
      auto [train, test] = split_half(core, seed);
      const TrainedModel model = train_model(train, config);
      std::vector<ImageRecord> images = test.images();
      Matrix features(static_cast<Eigen::Index>(test.n_images() + distractor_rows.size()),
                      static_cast<Eigen::Index>(dataset.dim()));
      features.topRows(static_cast<Eigen::Index>(test.n_images())) = test.features();
      for (std::size_t d = 0; d < distractor_rows.size(); ++d) {
        images.push_back(dataset.image(distractor_rows[d]));
        features.row(static_cast<Eigen::Index>(test.n_images() + d)) =
            dataset.features().row(static_cast<Eigen::Index>(distractor_rows[d]));
      }
      const FeatureDataset eval_set(std::move(images), std::move(features));
      const QuerySet qs = build_queries(eval_set, config.protocol, config.multi_shot);
      const EmbeddedSet e = embed_dataset(model, eval_set);
      const EvalReport one = evaluate_prefix(eval_set, qs, e, model.attributes.k(), config);

      report.seeds.push_back(seed);
      report.repeats.push_back({seed, one.map, one.cmc});
      for (const auto& [q, ap] : one.per_query_ap) report.per_query_ap[fmt::format("r{}/{}", r, q)] = ap;
      for (const auto& q : one.excluded_queries) report.excluded_queries.push_back(fmt::format("r{}/{}", r, q));
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("repeat {} (seed {}): {}", r, seed, e.what()));
    }
  }

  const double count = static_cast<double>(n_repeats);
  report.cmc.assign(report.repeats.front().cmc.size(), 0.0);
  for (const auto& rep : report.repeats) {
    report.map += rep.map;
    for (std::size_t i = 0; i < report.cmc.size() && i < rep.cmc.size(); ++i) report.cmc[i] += rep.cmc[i];
  }
  // Sum first, divide once: a curve of ones averages to exactly 1.
  report.map /= count;
  for (auto& v : report.cmc) v /= count;
  if (n_repeats == 1) {
    report.map = report.repeats.front().map;
    report.cmc = report.repeats.front().cmc;
  }
  return report;
}

namespace {

template <typename T>
std::vector<T> dedupe(std::vector<T> values, const char* name, std::vector<std::string>& warnings) {
  std::vector<T> out;
  for (const auto& v : values) {
    if (std::find(out.begin(), out.end(), v) == out.end()) {
      out.push_back(v);
    } else {
      warnings.push_back(fmt::format("duplicate {} value {} dropped", name, v));
      spdlog::warn("{}", warnings.back());
    }
  }
  return out;
}

}  // namespace

SweepResult parameter_sweep(const FeatureDataset& dataset, std::vector<double> lambdas, std::vector<double> gammas,
                            std::vector<std::size_t> ks, const PipelineConfig& config) {
  if (lambdas.empty() || gammas.empty() || ks.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "parameter sweep needs nonempty lambda, gamma and k grids");
  }
  SweepResult sweep;
  lambdas = dedupe(std::move(lambdas), "lambda", sweep.warnings);
  gammas = dedupe(std::move(gammas), "gamma", sweep.warnings);
  ks = dedupe(std::move(ks), "k", sweep.warnings);
  if (std::find(ks.begin(), ks.end(), std::size_t{0}) != ks.end()) {
    throw Error(ErrorKind::kInvalidArgument, "k grid values must be >= 1");
  }
  const std::size_t k_max = *std::max_element(ks.begin(), ks.end());

  const auto train_rows = attribute_training_rows(dataset, config);
  const auto test_rows = evaluation_rows(dataset);
  if (test_rows.empty()) throw Error(ErrorKind::kInvalidArgument, "parameter sweep needs non-train images to evaluate");
  const FeatureDataset train = dataset.subset(train_rows);
  const FeatureDataset test = dataset.subset(test_rows);
  const QuerySet qs = build_queries(test, config.protocol, config.multi_shot);
  const auto negative_rows = category_negative_rows(dataset, config);
  const Matrix negatives = dataset.subset(negative_rows).features();

  for (double lambda : lambdas) {
    for (double gamma : gammas) {
      PipelineConfig cfg = config;
      cfg.lambda = lambda;
      cfg.gamma = gamma;
      cfg.k = k_max;
      try {
        const TrainedModel model = train_model(train, cfg, config.use_class ? &negatives : nullptr);
        const EmbeddedSet e = embed_dataset(model, test);
        for (auto k : ks) {
          SweepCell cell{lambda, gamma, k, false, {}, 0.0, {}};
          try {
            const EvalReport r = evaluate_prefix(test, qs, e, k, cfg);
            cell.map = r.map;
            cell.cmc = r.cmc;
          } catch (const Error& err) {
            cell.failed = true;
            cell.error = err.what();
          }
          sweep.cells.push_back(std::move(cell));
        }
      } catch (const Error& err) {
        spdlog::warn("sweep cell lambda={} gamma={} failed: {}", lambda, gamma, err.what());
        for (auto k : ks) sweep.cells.push_back({lambda, gamma, k, true, err.what(), 0.0, {}});
      }
    }
  }
  return sweep;
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
  out << "lambda,gamma,k,repeat,metric,value\n";
  for (const auto& c : sweep.cells) {
    if (c.failed) {
      out << fmt::format("{},{},{},0,failed,1\n", c.lambda, c.gamma, c.k);
      continue;
    }
    out << fmt::format("{},{},{},0,map,{}\n", c.lambda, c.gamma, c.k, c.map);
    for (std::size_t r = 0; r < c.cmc.size(); ++r) {
      out << fmt::format("{},{},{},0,cmc@{},{}\n", c.lambda, c.gamma, c.k, r + 1, c.cmc[r]);
    }
  }
}

nlohmann::json sweep_to_json(const SweepResult& sweep) {
  auto cells = nlohmann::json::array();
  for (const auto& c : sweep.cells) {
    nlohmann::json j = {{"lambda", c.lambda}, {"gamma", c.gamma}, {"k", c.k}, {"failed", c.failed}};
    if (c.failed) {
      j["error"] = c.error;
    } else {
      j["map"] = c.map;
      j["cmc"] = c.cmc;
    }
    cells.push_back(std::move(j));
  }
  return {{"cells", std::move(cells)}, {"warnings", sweep.warnings}};
}

}  // namespace attribex
