#include "nrgs/mlp.hpp"

#include <cmath>

namespace nrgs {

NormStats computeNormStats(const GaussianScene& scene) {
  NormStats stats;
  // Granularity channel: {1,2,3} -> {-1,0,+1}.
  stats.shift[14] = 2.0;
  if (scene.gaussians.empty()) return stats;

  const Vec3 center = 0.5 * (scene.bbox.min + scene.bbox.max);
  const Vec3 half = 0.5 * (scene.bbox.max - scene.bbox.min);
  for (int a = 0; a < 3; ++a) {
    stats.shift[a] = center[a];
    stats.scale[a] = half[a] > 0.0 ? half[a] : 1.0;
  }

  Vec3 mean = Vec3::Zero();
  for (const Gaussian& g : scene.gaussians) mean += g.scale.array().log().matrix();
  mean /= scene.size();
  Vec3 var = Vec3::Zero();
  for (const Gaussian& g : scene.gaussians)
    var += (g.scale.array().log() - mean.array()).square().matrix();
  var /= scene.size();
  for (int a = 0; a < 3; ++a) {
    stats.shift[8 + a] = mean[a];
    stats.scale[8 + a] = var[a] > 0.0 ? std::sqrt(var[a]) : 1.0;
  }
  return stats;
}

Eigen::VectorXd encodeInput(const Gaussian& g, int granularity, const NormStats& stats) {
  if (granularity < 1 || granularity > 3)
    throw std::invalid_argument("granularity must be in {1,2,3}");
  Eigen::VectorXd raw(kInputDim);
  raw.segment<3>(0) = g.mu;
  raw[3] = g.opacity;
  Quat q = g.quat;
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  raw[4] = q.w();
  raw[5] = q.x();
  raw[6] = q.y();
  raw[7] = q.z();
  raw.segment<3>(8) = g.scale.array().log();
  raw.segment<3>(11) = g.rgb;
  raw[14] = granularity;
  return (raw - stats.shift).cwiseQuotient(stats.scale);
}

}  // namespace nrgs
