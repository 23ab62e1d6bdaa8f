#include "nrgs/lifter.hpp"

#include <stdexcept>
#include <string>

#include "nrgs/threading.hpp"

namespace nrgs {

void accumulateView(LiftAccumulator& acc, std::span<const WeightRecord> records,
                    const FeatureMap& fmap) {
  if (fmap.dim() != acc.dim())
    throw std::invalid_argument("feature dimension mismatch: map D=" +
                                std::to_string(fmap.dim()) + " vs accumulator D=" +
                                std::to_string(acc.dim()));
  for (const WeightRecord& rec : records) {
    const auto feature = fmap.at(rec.px, rec.py).cast<double>();
    acc.sum_weight[rec.gaussian_index] += rec.weight;
    acc.sum_weighted.row(rec.gaussian_index) += rec.weight * feature;
    acc.sum_weighted_sq.row(rec.gaussian_index) +=
        rec.weight * feature.cwiseProduct(feature);
  }
}

SemanticField finalizeField(const LiftAccumulator& acc, int granularity) {
  const int n = acc.size();
  const int dim = acc.dim();
  SemanticField field;
  field.granularity = granularity;
  field.features = RowMatrixXf::Zero(n, dim);
  field.variance = RowMatrixXf::Zero(n, dim);
  field.weight_mass = acc.sum_weight.cast<float>();
  field.valid.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    const double mass = acc.sum_weight[i];
    // Decide on the float32 value that is actually stored, so the persisted
    // field stays self-consistent under the mass/validity coupling.
    if (field.weight_mass[i] < static_cast<float>(kMinWeightMass)) continue;
    field.valid[i] = 1;
    const Eigen::RowVectorXd mean = acc.sum_weighted.row(i) / mass;
    // E[F^2] - E[F]^2 can dip below zero in floating point; clamp since the
    // variance is consumed as a confidence score.
    const Eigen::RowVectorXd var = (acc.sum_weighted_sq.row(i) / mass -
                                    mean.cwiseProduct(mean)).cwiseMax(0.0);
    field.features.row(i) = mean.cast<float>();
    field.variance.row(i) = var.cast<float>();
  }
  return field;
}

namespace {

const FeatureMap& mapForView(std::span<const FeatureMap> fmaps, int view_id,
                             int granularity) {
  const FeatureMap* found = nullptr;
  for (const FeatureMap& m : fmaps) {
    if (m.view_id != view_id || m.granularity != granularity) continue;
    if (found)
      throw std::invalid_argument("duplicate feature map for view " +
                                  std::to_string(view_id));
    found = &m;
  }
  if (!found)
    throw std::invalid_argument("missing feature map for view " +
                                std::to_string(view_id) + " at granularity " +
                                std::to_string(granularity));
  return *found;
}

}  // namespace

SemanticField lift(const GaussianScene& scene, std::span<const Camera> cams,
                   std::span<const FeatureMap> fmaps, int granularity, int threads) {
  int dim = 0;
  for (const FeatureMap& m : fmaps)
    if (m.granularity == granularity) dim = m.dim();
  const int n_views = static_cast<int>(cams.size());
  // Resolve all maps up front so a missing view fails before any work.
  std::vector<const FeatureMap*> maps(n_views);
  for (int v = 0; v < n_views; ++v) {
    maps[v] = &mapForView(fmaps, v, granularity);
    if (maps[v]->width != cams[v].width || maps[v]->height != cams[v].height)
      throw std::invalid_argument("feature map size mismatch for view " +
                                  std::to_string(v));
  }

  threads = std::clamp(threads, 1, std::max(1, n_views));
  const int chunk = (n_views + threads - 1) / threads;
  std::vector<LiftAccumulator> partial;
  partial.reserve(threads);
  for (int t = 0; t < threads; ++t) partial.emplace_back(scene.size(), dim);

  parallelFor(0, threads, threads, [&](int t) {
    const int lo = t * chunk;
    const int hi = std::min(n_views, lo + chunk);
    for (int v = lo; v < hi; ++v) {
      const std::vector<WeightRecord> records = marginalWeights(scene, cams[v], v);
      accumulateView(partial[t], records, *maps[v]);
    }
  });

  // Merge in ascending view order; with one thread this is the fold itself.
  LiftAccumulator& acc = partial.front();
  for (int t = 1; t < threads; ++t) {
    acc.sum_weight += partial[t].sum_weight;
    acc.sum_weighted += partial[t].sum_weighted;
    acc.sum_weighted_sq += partial[t].sum_weighted_sq;
  }
  return finalizeField(acc, granularity);
}

}  // namespace nrgs
