#pragma once

#include <span>
#include <vector>

#include "nrgs/types.hpp"

namespace nrgs {

/// Opacity ceiling; keeps transmittance strictly positive through any stack.
inline constexpr double kAlphaMax = 0.99;
/// Front-to-back compositing stops once transmittance drops below this.
inline constexpr double kTransmittanceCutoff = 1e-4;
/// Low-pass dilation added to the projected covariance diagonal (pixels^2).
inline constexpr double kLowPassDilation = 0.3;
/// A Gaussian overlaps a pixel iff the Mahalanobis distance is <= 3.
inline constexpr double kFootprintSigma = 3.0;
/// Marginal weights below this are dropped; defines view-set membership.
inline constexpr double kWeightThreshold = 1e-4;

/// A Gaussian projected into one view: pixel-space center, camera depth and
/// the 2x2 screen-space covariance (after low-pass dilation).
struct ProjectedGaussian {
  int index = 0;           // canonical Gaussian index
  Vec2 u = Vec2::Zero();   // projected center, pixels
  double depth = 0.0;      // camera-space z
  Mat2 cov2d = Mat2::Identity();
  Mat2 cov2d_inv = Mat2::Identity();
  double opacity = 0.0;

  /// opacity * exp(-0.5 d^T cov2d^-1 d) at pixel p, clamped to [0, kAlphaMax].
  double alphaAt(const Vec2& p) const {
    const Vec2 d = p - u;
    const double m2 = d.dot(cov2d_inv * d);
    const double a = opacity * std::exp(-0.5 * m2);
    return a < kAlphaMax ? a : kAlphaMax;
  }

  bool overlaps(const Vec2& p) const {
    const Vec2 d = p - u;
    return d.dot(cov2d_inv * d) <= kFootprintSigma * kFootprintSigma;
  }
};

/// Projects the scene into a view. Keeps exactly the Gaussians with
/// camera-space depth >= znear and projected center inside
/// [0,width) x [0,height); output is sorted ascending by depth, ties broken
/// by Gaussian index.
std::vector<ProjectedGaussian> project(const GaussianScene& scene, const Camera& cam);

struct PixelWeight {
  int index;       // Gaussian index
  double weight;   // alpha * transmittance, in [0, 1]
};

/// Front-to-back alpha compositing at one pixel over a depth-sorted
/// projection list. Returns (index, weight) for every overlapping Gaussian
/// reached before the transmittance cutoff; zero-alpha entries are kept and
/// do not stop the traversal.
std::vector<PixelWeight> weightsAtPixel(std::span<const ProjectedGaussian> projected,
                                        const Vec2& pixel);

/// One Gaussian's blending weight at its own projected center pixel in one
/// view; the aggregation weight of the feature lifting average.
struct WeightRecord {
  int gaussian_index;
  int view_id;
  int px, py;      // the pixel the weight (and feature sample) belongs to
  double weight;
};

/// Per-pixel overlap index: for every pixel, the positions (into the
/// depth-sorted projection list) of the Gaussians whose 3-sigma footprint
/// covers it, in depth order. Shared by the marginal-weight and rendering
/// paths so they composite identical sequences.
class OverlapGrid {
 public:
  OverlapGrid(std::span<const ProjectedGaussian> projected, int width, int height);

  std::span<const std::int32_t> at(int x, int y) const {
    const std::size_t p = static_cast<std::size_t>(y) * width_ + x;
    return {entries_.data() + offsets_[p], entries_.data() + offsets_[p + 1]};
  }

  int width() const { return width_; }
  int height() const { return height_; }

 private:
  int width_, height_;
  std::vector<std::size_t> offsets_;
  std::vector<std::int32_t> entries_;
};

/// Composites one pixel given its overlap list (same traversal as
/// weightsAtPixel, skipping the per-Gaussian overlap scan).
std::vector<PixelWeight> weightsAtPixel(std::span<const ProjectedGaussian> projected,
                                        std::span<const std::int32_t> overlap,
                                        const Vec2& pixel);

/// The marginal rendering weight of every visible Gaussian at its projected
/// center pixel (rounded, clamped to the image). Records below
/// kWeightThreshold are dropped; output is ordered by Gaussian index.
std::vector<WeightRecord> marginalWeights(const GaussianScene& scene, const Camera& cam,
                                          int view_id);

/// Alpha-blends per-Gaussian features into a 2D map: pixel value is
/// sum_i w_i * f_i over the depth-sorted overlap set. Invalid field rows
/// contribute nothing. `threads` parallelizes over pixel rows; the per-pixel
/// result is independent of the thread count.
FeatureMap renderFeatureMap(const GaussianScene& scene, const Camera& cam,
                            const SemanticField& field, int view_id, int threads = 1);

/// renderFeatureMap over an arbitrary per-Gaussian feature table (N x D).
RowMatrixXf renderFeatureImage(const GaussianScene& scene, const Camera& cam,
                               const Eigen::Ref<const RowMatrixXf>& features,
                               std::span<const std::uint8_t> valid, int threads = 1);

}  // namespace nrgs
