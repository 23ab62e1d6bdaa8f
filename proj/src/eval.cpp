#include "nrgs/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nrgs/lifter.hpp"
#include "nrgs/projection.hpp"
#include "nrgs/threading.hpp"

namespace nrgs {

std::vector<Query> queriesFor(const GroundTruth& truth, int granularity) {
  const RowMatrixXf& protos = truth.prototypes[granularity - 1];
  std::vector<Query> queries(protos.rows());
  for (Eigen::Index k = 0; k < protos.rows(); ++k) {
    queries[k].prototype = protos.row(k).transpose();
    queries[k].label_id = static_cast<int>(k);
    queries[k].granularity = granularity;
  }
  return queries;
}

namespace {

Eigen::MatrixXf relevanceFromImage(const RowMatrixXf& image, int width, int height,
                                   const Query& query) {
  const float qnorm = query.prototype.norm();
  if (qnorm < 1e-12f) throw std::invalid_argument("query prototype has zero norm");
  Eigen::MatrixXf relevance(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto feat = image.row(y * width + x);
      const float n = feat.norm();
      relevance(y, x) = n < 1e-8f
                            ? -1.0f
                            : feat.dot(query.prototype.transpose()) / (n * qnorm);
    }
  }
  return relevance;
}

}  // namespace

Eigen::MatrixXf relevanceMap(const GaussianScene& scene, const Camera& cam,
                             const SemanticField& field, const Query& query,
                             int threads) {
  const RowMatrixXf image =
      renderFeatureImage(scene, cam, field.features, field.valid, threads);
  return relevanceFromImage(image, cam.width, cam.height, query);
}

std::vector<int> segment3d(const SemanticField& field, std::span<const Query> queries) {
  std::vector<int> labels(field.size(), kUnassigned);
  std::vector<float> inv_norm(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const float n = queries[q].prototype.norm();
    if (n < 1e-12f) throw std::invalid_argument("query prototype has zero norm");
    inv_norm[q] = 1.0f / n;
  }
  for (int i = 0; i < field.size(); ++i) {
    if (!field.valid[i]) continue;
    const auto feat = field.features.row(i);
    const float fnorm = feat.norm();
    float best = -2.0f;
    int best_label = kUnassigned;
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const float cos = fnorm < 1e-12f
                            ? -1.0f
                            : feat.dot(queries[q].prototype.transpose()) *
                                  inv_norm[q] / fnorm;
      if (cos > best || (cos == best && queries[q].label_id < best_label)) {
        best = cos;
        best_label = queries[q].label_id;
      }
    }
    labels[i] = best_label;
  }
  return labels;
}

IouResult computeMiou(std::span<const int> pred, std::span<const int> truth,
                      int k_classes) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("prediction/truth size mismatch");
  std::vector<std::int64_t> inter(k_classes, 0), uni(k_classes, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int p = pred[i], t = truth[i];
    if (p == t && p >= 0 && p < k_classes) {
      ++inter[p];
      ++uni[p];
      continue;
    }
    if (p >= 0 && p < k_classes) ++uni[p];
    if (t >= 0 && t < k_classes) ++uni[t];
  }
  IouResult out;
  out.per_class.assign(k_classes, 0.0);
  out.present.assign(k_classes, 0);
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c < k_classes; ++c) {
    if (uni[c] == 0) continue;  // absent from both pred and truth
    out.present[c] = 1;
    out.per_class[c] = static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    sum += out.per_class[c];
    ++counted;
  }
  out.miou = counted > 0 ? sum / counted : 0.0;
  return out;
}

bool localize(const Eigen::MatrixXf& relevance, std::span<const std::uint8_t> region) {
  if (static_cast<Eigen::Index>(region.size()) != relevance.size())
    throw std::invalid_argument("region mask size mismatch");
  if (std::find(region.begin(), region.end(), std::uint8_t(1)) == region.end())
    throw std::invalid_argument("ground-truth region is empty");
  int best_x = 0, best_y = 0;
  float best = relevance(0, 0);
  for (int y = 0; y < relevance.rows(); ++y)
    for (int x = 0; x < relevance.cols(); ++x)
      if (relevance(y, x) > best) {
        best = relevance(y, x);
        best_y = y;
        best_x = x;
      }
  return region[static_cast<std::size_t>(best_y) * relevance.cols() + best_x] != 0;
}

std::vector<int> dominantLabelMask(
    const GaussianScene& scene, const Camera& cam,
    const Eigen::Ref<const Eigen::Matrix<int, Eigen::Dynamic, 3>>& labels,
    int granularity, int threads) {
  std::vector<int> mask(static_cast<std::size_t>(cam.width) * cam.height, -1);
  const std::vector<ProjectedGaussian> projected = project(scene, cam);
  if (projected.empty()) return mask;
  const OverlapGrid grid(projected, cam.width, cam.height);
  int n_labels = 0;
  for (Eigen::Index i = 0; i < labels.rows(); ++i)
    n_labels = std::max(n_labels, labels(i, granularity - 1) + 1);

  parallelFor(0, cam.height, threads, [&](int y) {
    std::vector<double> mass(n_labels);
    for (int x = 0; x < cam.width; ++x) {
      const auto overlap = grid.at(x, y);
      if (overlap.empty()) continue;
      std::fill(mass.begin(), mass.end(), 0.0);
      double transmittance = 1.0;
      for (std::int32_t pos : overlap) {
        if (transmittance < kTransmittanceCutoff) break;
        const ProjectedGaussian& pg = projected[pos];
        const double alpha = pg.alphaAt(Vec2(x, y));
        mass[labels(pg.index, granularity - 1)] += alpha * transmittance;
        transmittance *= 1.0 - alpha;
      }
      int best = -1;
      double best_mass = 0.0;
      for (int c = 0; c < n_labels; ++c)
        if (mass[c] > best_mass) {
          best_mass = mass[c];
          best = c;
        }
      mask[static_cast<std::size_t>(y) * cam.width + x] = best;
    }
  });
  return mask;
}

double meanCosineToPrototype(const SemanticField& field, const GroundTruth& truth,
                             std::span<const std::uint8_t> rows) {
  const RowMatrixXf& protos = truth.prototypes[field.granularity - 1];
  double sum = 0.0;
  int count = 0;
  for (int i = 0; i < field.size(); ++i) {
    if (!rows.empty() && !rows[i]) continue;
    if (rows.empty() && !field.valid[i]) continue;
    const auto feat = field.features.row(i);
    const float n = feat.norm();
    const auto proto = protos.row(truth.labels(i, field.granularity - 1));
    sum += n < 1e-12f ? -1.0 : static_cast<double>(feat.dot(proto) / n);
    ++count;
  }
  return count > 0 ? sum / count : 0.0;
}

double meanVarianceNorm(const SemanticField& field) {
  double sum = 0.0;
  int count = 0;
  for (int i = 0; i < field.size(); ++i) {
    if (!field.valid[i]) continue;
    sum += field.variance.row(i).cast<double>().norm();
    ++count;
  }
  return count > 0 ? sum / count : 0.0;
}

FieldMetrics evaluateFields(const GaussianScene& scene, const GroundTruth& truth,
                            std::span<const Camera> eval_cams,
                            std::span<const SemanticField> fields,
                            std::span<const std::uint8_t> cos_rows, int threads) {
  FieldMetrics metrics;
  double cos_sum = 0.0;
  double miou2d_sum = 0.0;
  int miou2d_count = 0;
  int hits = 0, localizations = 0;

  for (const SemanticField& field : fields) {
    const int g = field.granularity;
    const std::vector<Query> queries = queriesFor(truth, g);
    const int n_classes = truth.classCount(g);

    // 3D segmentation against per-Gaussian labels.
    std::vector<int> truth_labels(scene.size());
    for (int i = 0; i < scene.size(); ++i) truth_labels[i] = truth.labelOf(i, g);
    const std::vector<int> pred = segment3d(field, queries);
    metrics.miou3d[g - 1] = computeMiou(pred, truth_labels, n_classes).miou;

    cos_sum += meanCosineToPrototype(field, truth, cos_rows);

    // 2D protocol on the held-out views: rendered-mask IoU + localization.
    // The field image is rendered once per view and scored per query.
    for (const Camera& cam : eval_cams) {
      const std::vector<int> gt_mask =
          dominantLabelMask(scene, cam, truth.labels, g, threads);

      const RowMatrixXf image =
          renderFeatureImage(scene, cam, field.features, field.valid, threads);
      std::vector<Eigen::MatrixXf> relevance;
      relevance.reserve(n_classes);
      for (int c = 0; c < n_classes; ++c)
        relevance.push_back(relevanceFromImage(image, cam.width, cam.height, queries[c]));

      std::vector<int> pred_mask(gt_mask.size(), -1);
      for (std::size_t p = 0; p < gt_mask.size(); ++p) {
        const int y = static_cast<int>(p) / cam.width;
        const int x = static_cast<int>(p) % cam.width;
        float best = -2.0f;
        for (int c = 0; c < n_classes; ++c) {
          const float r = relevance[c](y, x);
          if (r > best && r > -1.0f) {
            best = r;
            pred_mask[p] = c;
          }
        }
      }
      miou2d_sum += computeMiou(pred_mask, gt_mask, n_classes).miou;
      ++miou2d_count;

      for (int c = 0; c < n_classes; ++c) {
        std::vector<std::uint8_t> region(gt_mask.size(), 0);
        bool any = false;
        for (std::size_t p = 0; p < gt_mask.size(); ++p)
          if (gt_mask[p] == c) {
            region[p] = 1;
            any = true;
          }
        if (!any) continue;  // class invisible in this view
        hits += localize(relevance[c], region) ? 1 : 0;
        ++localizations;
      }
    }
  }

  metrics.miou3d_mean = (metrics.miou3d[0] + metrics.miou3d[1] + metrics.miou3d[2]) / 3.0;
  metrics.miou2d_mean = miou2d_count > 0 ? miou2d_sum / miou2d_count : 0.0;
  metrics.macc = localizations > 0 ? static_cast<double>(hits) / localizations : 0.0;
  metrics.mean_cos = cos_sum / static_cast<double>(fields.size());
  return metrics;
}

AblationReport ablationGrid(const SynthScene& synth, const SynthConfig& scfg,
                            const TrainConfig& tcfg, const MlpConfig& mcfg,
                            int threads) {
  const std::vector<Camera> lift_cams = trainViews(synth.cameras);
  const std::vector<Camera> eval_cams = testViews(synth.cameras);

  std::vector<SemanticField> lifted;
  for (int g = 1; g <= 3; ++g) {
    const std::vector<FeatureMap> maps = renderCorruptedFeatureMaps(
        synth.scene, synth.truth, lift_cams, g, scfg, threads);
    lifted.push_back(lift(synth.scene, lift_cams, maps, g, threads));
  }
  // Raw validity defines the row set for cosine diagnostics everywhere, so
  // imputation cannot skew the comparison.
  std::vector<std::uint8_t> cos_rows(synth.scene.size(), 1);
  for (int i = 0; i < synth.scene.size(); ++i)
    cos_rows[i] = lifted[0].valid[i] && lifted[1].valid[i] && lifted[2].valid[i];

  AblationReport report;
  report.baseline = {"baseline_raw_lifted",
                     evaluateFields(synth.scene, synth.truth, eval_cams, lifted,
                                    cos_rows, threads)};

  struct RowConfig {
    std::string name;
    WeightingMode weighting;
    GranularityMode granularity;
  };
  const RowConfig rows[3] = {
      {"variance_independent", WeightingMode::kVariance, GranularityMode::kIndependent},
      {"equal_shared", WeightingMode::kEqual, GranularityMode::kShared},
      {"variance_shared", WeightingMode::kVariance, GranularityMode::kShared},
  };
  for (const RowConfig& row : rows) {
    TrainConfig cfg = tcfg;
    cfg.weighting = row.weighting;
    cfg.granularity_mode = row.granularity;
    const TrainResult trained = train(synth.scene, lifted, cfg, mcfg);
    std::vector<SemanticField> regularized;
    for (int g = 1; g <= 3; ++g)
      regularized.push_back(
          regularizeField(trained.modelFor(g), synth.scene, lifted[g - 1]));
    report.rows.push_back({row.name,
                           evaluateFields(synth.scene, synth.truth, eval_cams,
                                          regularized, cos_rows, threads)});
  }
  return report;
}

}  // namespace nrgs
