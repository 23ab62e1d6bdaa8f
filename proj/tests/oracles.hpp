#pragma once

// Brute-force reference implementations. These deliberately avoid the
// library's shortcuts (overlap grid, early termination, streaming moment
// accumulation) so they can serve as independent checks.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "nrgs/lifter.hpp"
#include "nrgs/projection.hpp"
#include "nrgs/types.hpp"

namespace oracle {

/// Per-pixel compositing that scans the whole depth-sorted projection list
/// with no transmittance cutoff and no spatial index.
inline std::vector<nrgs::PixelWeight> weightsAtPixelNoCutoff(
    std::span<const nrgs::ProjectedGaussian> projected, const nrgs::Vec2& pixel) {
  std::vector<nrgs::PixelWeight> out;
  double transmittance = 1.0;
  for (const nrgs::ProjectedGaussian& pg : projected) {
    if (!pg.overlaps(pixel)) continue;
    const double alpha = pg.alphaAt(pixel);
    out.push_back({pg.index, alpha * transmittance});
    transmittance *= 1.0 - alpha;
  }
  return out;
}

/// Marginal weights evaluated the slow way: one full composite per Gaussian
/// at its own rounded center pixel.
inline std::vector<nrgs::WeightRecord> marginalWeightsNaive(
    const nrgs::GaussianScene& scene, const nrgs::Camera& cam, int view_id) {
  const std::vector<nrgs::ProjectedGaussian> projected = nrgs::project(scene, cam);
  std::vector<nrgs::WeightRecord> out;
  for (const nrgs::ProjectedGaussian& pg : projected) {
    const int px = std::clamp(static_cast<int>(std::lround(pg.u.x())), 0, cam.width - 1);
    const int py = std::clamp(static_cast<int>(std::lround(pg.u.y())), 0, cam.height - 1);
    double weight = 0.0;
    for (const nrgs::PixelWeight& pw :
         weightsAtPixelNoCutoff(projected, nrgs::Vec2(px, py)))
      if (pw.index == pg.index) weight = pw.weight;
    if (weight >= nrgs::kWeightThreshold)
      out.push_back({pg.index, view_id, px, py, weight});
  }
  std::sort(out.begin(), out.end(),
            [](const nrgs::WeightRecord& a, const nrgs::WeightRecord& b) {
              return a.gaussian_index < b.gaussian_index;
            });
  return out;
}

/// The lifting equations evaluated per Gaussian as written: an explicit
/// double loop over views and Gaussians with per-view samples kept around,
/// no streaming accumulator.
inline nrgs::SemanticField liftNaive(const nrgs::GaussianScene& scene,
                                     std::span<const nrgs::Camera> cams,
                                     std::span<const nrgs::FeatureMap> fmaps,
                                     int granularity) {
  int dim = 0;
  for (const nrgs::FeatureMap& m : fmaps)
    if (m.granularity == granularity) dim = m.dim();

  struct Sample {
    double weight;
    Eigen::VectorXd feature;
  };
  std::vector<std::vector<Sample>> samples(scene.size());
  for (std::size_t v = 0; v < cams.size(); ++v) {
    const nrgs::FeatureMap* fmap = nullptr;
    for (const nrgs::FeatureMap& m : fmaps)
      if (m.view_id == static_cast<int>(v) && m.granularity == granularity) fmap = &m;
    for (const nrgs::WeightRecord& rec :
         nrgs::marginalWeights(scene, cams[v], static_cast<int>(v)))
      samples[rec.gaussian_index].push_back(
          {rec.weight, fmap->at(rec.px, rec.py).cast<double>().transpose()});
  }

  nrgs::SemanticField field;
  field.granularity = granularity;
  field.features = nrgs::RowMatrixXf::Zero(scene.size(), dim);
  field.variance = nrgs::RowMatrixXf::Zero(scene.size(), dim);
  field.weight_mass = Eigen::VectorXf::Zero(scene.size());
  field.valid.assign(scene.size(), 0);
  for (int i = 0; i < scene.size(); ++i) {
    double mass = 0.0;
    for (const Sample& s : samples[i]) mass += s.weight;
    field.weight_mass[i] = static_cast<float>(mass);
    if (field.weight_mass[i] < static_cast<float>(nrgs::kMinWeightMass)) continue;
    field.valid[i] = 1;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const Sample& s : samples[i]) mean += s.weight * s.feature;
    mean /= mass;
    Eigen::VectorXd second = Eigen::VectorXd::Zero(dim);
    for (const Sample& s : samples[i])
      second += s.weight * s.feature.cwiseProduct(s.feature);
    second /= mass;
    field.features.row(i) = mean.cast<float>().transpose();
    field.variance.row(i) =
        (second - mean.cwiseProduct(mean)).cwiseMax(0.0).cast<float>().transpose();
  }
  return field;
}

}  // namespace oracle
