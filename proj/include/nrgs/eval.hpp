#pragma once

#include <span>
#include <string>
#include <vector>

#include "nrgs/synth.hpp"
#include "nrgs/trainer.hpp"
#include "nrgs/types.hpp"

namespace nrgs {

/// An open-vocabulary query: a class prototype (or an ingested text
/// embedding) with its label id at one granularity.
struct Query {
  Eigen::VectorXf prototype;
  int label_id = 0;
  int granularity = 1;
};

/// Builds one query per class from the synthetic ground truth.
std::vector<Query> queriesFor(const GroundTruth& truth, int granularity);

/// Renders the field into the view and scores every pixel by cosine
/// similarity with the query prototype. Uncovered pixels (rendered feature
/// norm < 1e-8) score -1. Returns an height x width map; values in [-1, 1].
Eigen::MatrixXf relevanceMap(const GaussianScene& scene, const Camera& cam,
                             const SemanticField& field, const Query& query,
                             int threads = 1);

/// Per-Gaussian argmax-cosine classification against one query per class.
/// Invalid rows get kUnassigned; ties go to the lowest label id.
inline constexpr int kUnassigned = -1;
std::vector<int> segment3d(const SemanticField& field, std::span<const Query> queries);

struct IouResult {
  std::vector<double> per_class;        // meaningful where present[k]
  std::vector<std::uint8_t> present;    // class appears in pred or truth
  double miou = 0.0;
};

/// IoU_k = |pred=k & truth=k| / |pred=k | truth=k|; classes absent from
/// both sides are excluded from the mean. Unassigned predictions count
/// against every class they were supposed to hit.
IouResult computeMiou(std::span<const int> pred, std::span<const int> truth,
                      int k_classes);

/// Localization hit: the argmax pixel of the relevance map (row-major scan,
/// first maximum wins) lies inside the ground-truth region. The region mask
/// has height*width entries; an empty region is a hard error.
bool localize(const Eigen::MatrixXf& relevance, std::span<const std::uint8_t> region);

/// Per-pixel dominant label in a view: the label whose Gaussians carry the
/// largest composited weight mass; -1 where nothing renders. Used to build
/// 2D ground-truth regions and rendered masks.
std::vector<int> dominantLabelMask(const GaussianScene& scene, const Camera& cam,
                                   const Eigen::Ref<const Eigen::Matrix<int, Eigen::Dynamic, 3>>& labels,
                                   int granularity, int threads = 1);

/// Mean cosine between field rows and their true class prototype, taken
/// over the rows marked in `rows` (typically the raw-lifted validity mask).
double meanCosineToPrototype(const SemanticField& field, const GroundTruth& truth,
                             std::span<const std::uint8_t> rows);

/// Mean L2 norm of the per-Gaussian variance over valid rows.
double meanVarianceNorm(const SemanticField& field);

/// Metrics of one field (or field set) against the synthetic ground truth.
struct FieldMetrics {
  std::array<double, 3> miou3d{};      // per granularity
  double miou3d_mean = 0.0;
  double miou2d_mean = 0.0;            // rendered-mask IoU on the eval views
  double macc = 0.0;                   // localization accuracy on eval views
  double mean_cos = 0.0;               // cosine to true prototypes
};

/// Evaluates three fields (one per granularity) on held-out views.
/// `cos_rows`, when nonempty, restricts the cosine diagnostic to a fixed
/// row set so raw and regularized fields are compared on equal footing.
FieldMetrics evaluateFields(const GaussianScene& scene, const GroundTruth& truth,
                            std::span<const Camera> eval_cams,
                            std::span<const SemanticField> fields,
                            std::span<const std::uint8_t> cos_rows = {},
                            int threads = 1);

/// One row of the ablation grid.
struct AblationRow {
  std::string name;
  FieldMetrics metrics;
};

struct AblationReport {
  AblationRow baseline;                // raw lifted fields
  std::vector<AblationRow> rows;       // variance/independent, equal/shared,
                                       // variance/shared
};

/// Trains the three ablation configurations on identical lifted fields and
/// seeds and evaluates each against the ground truth, next to the raw
/// baseline: (a) variance-weighted loss with independent per-granularity
/// models, (b) equal loss with the shared conditioned model, (c) variance-
/// weighted loss with the shared model.
AblationReport ablationGrid(const SynthScene& synth, const SynthConfig& scfg,
                            const TrainConfig& tcfg, const MlpConfig& mcfg,
                            int threads = 1);

}  // namespace nrgs
