#pragma once

#include <array>
#include <span>
#include <vector>

#include "nrgs/types.hpp"

namespace nrgs {

enum class NoiseMode { kSwapClass, kBlend, kDropout };

/// Generator settings for the multi-view-inconsistency benchmark: labeled
/// Gaussian blobs, a camera ring, consistent ground-truth feature maps and
/// controlled per-view corruption standing in for inconsistent 2D features.
struct SynthConfig {
  int n_gaussians = 2000;
  int n_classes = 4;          // whole-level classes K
  int parts_per_class = 2;    // spatial splits at the part level
  int subparts_per_part = 2;  // further splits at the subpart level
  int n_views = 12;
  int image_width = 64;
  int image_height = 64;
  int feature_dim = 32;
  double noise_rate = 0.0;    // fraction of (view, region) pairs corrupted
  NoiseMode noise_mode = NoiseMode::kSwapClass;
  std::uint64_t seed = 0;

  // Scene shaping. Opacity sits low enough that Gaussians buried in a blob
  // keep a visible marginal weight in fronting views, while blob density
  // still saturates interior pixels.
  double blob_radius = 0.35;
  double camera_radius = 4.0;
  double opacity_min = 0.15;
  double opacity_max = 0.3;
  double splat_scale_min = 0.012;  // per-axis stddev, scene units
  double splat_scale_max = 0.025;
  double position_spread = 0.1;    // subpart scatter, fraction of blob_radius
};

/// Per-Gaussian labels at each granularity plus the unit-norm class
/// prototypes that stand in for text/CLIP embeddings. Labels respect the
/// tree: every subpart maps to one part, every part to one whole class.
struct GroundTruth {
  Eigen::Matrix<int, Eigen::Dynamic, 3> labels;   // N x {whole, part, subpart}
  std::array<RowMatrixXf, 3> prototypes;          // [g-1]: K_g x D, unit rows
  std::vector<int> part_to_whole;
  std::vector<int> subpart_to_part;

  int classCount(int granularity) const {
    return static_cast<int>(prototypes[granularity - 1].rows());
  }
  int labelOf(int gaussian, int granularity) const {
    return labels(gaussian, granularity - 1);
  }
};

struct SynthScene {
  GaussianScene scene;
  GroundTruth truth;
  std::vector<Camera> cameras;
};

/// Generates a labeled scene of spatial class blobs with a ring of cameras
/// facing the scene center. Every Gaussian is visible (weight above the
/// visibility threshold) in at least two views; generation is retried with
/// fresh geometry up to 100 times and then fails suggesting more views.
/// Deterministic for a fixed seed.
SynthScene generateScene(const SynthConfig& config);

/// Multi-view-consistent ground-truth maps: every view renders the same
/// per-Gaussian prototype assignment, so lifted variance is near zero away
/// from label boundaries.
std::vector<FeatureMap> renderGtFeatureMaps(const GaussianScene& scene,
                                            const GroundTruth& truth,
                                            std::span<const Camera> cams,
                                            int granularity, int threads = 1);

/// Maps with controlled per-view inconsistency: independently for every
/// (view, label region) pair, with probability noise_rate the region's
/// feature contribution in that view is replaced (swap), mixed 50/50
/// (blend) or zeroed (dropout) while other views keep the true prototype.
/// The corruption draws do not depend on noise_rate, so raising the rate
/// only ever corrupts a superset of pairs. With noise_rate = 0 the output
/// is identical to renderGtFeatureMaps.
std::vector<FeatureMap> renderCorruptedFeatureMaps(const GaussianScene& scene,
                                                   const GroundTruth& truth,
                                                   std::span<const Camera> cams,
                                                   int granularity,
                                                   const SynthConfig& config,
                                                   int threads = 1);

/// Marks Gaussians that sit well inside one label region: the 3-sigma
/// footprint never shares a pixel with a differently labeled Gaussian in
/// any view, and the composited mass at each visible center pixel is nearly
/// saturated (so the center-pixel sample is a pure, stable multiple of the
/// region prototype). Boundary and silhouette Gaussians fail this test.
std::vector<std::uint8_t> interiorMask(const GaussianScene& scene,
                                       const GroundTruth& truth,
                                       std::span<const Camera> cams, int granularity);

/// View split used throughout: even-indexed views lift, odd-indexed views
/// evaluate.
std::vector<Camera> trainViews(std::span<const Camera> cams);
std::vector<Camera> testViews(std::span<const Camera> cams);
std::vector<int> trainViewIds(int n_views);
std::vector<int> testViewIds(int n_views);

}  // namespace nrgs
