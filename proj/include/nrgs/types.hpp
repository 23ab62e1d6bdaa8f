#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <string>
#include <vector>

namespace nrgs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Row-major float matrix; the layout used for per-Gaussian feature tables
/// and H*W-by-D pixel feature maps, where whole rows are read at a time.
using RowMatrixXf =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One anisotropic 3D Gaussian primitive.
///
/// `scale` holds per-axis standard deviations (strictly positive), `quat`
/// the unit rotation (w,x,y,z), `opacity` is post-activation in [0,1] and
/// `rgb` is the base color in [0,1] (no view dependence).
struct Gaussian {
  Vec3 mu = Vec3::Zero();
  Quat quat = Quat::Identity();
  Vec3 scale = Vec3::Ones();
  double opacity = 1.0;
  Vec3 rgb = Vec3::Zero();
};

/// World-space covariance R * diag(scale^2) * R^T. Symmetric
/// positive-definite whenever the Gaussian invariants hold.
Mat3 covarianceOf(const Gaussian& g);

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

/// A scene is an ordered list of Gaussians; the list position is the
/// canonical Gaussian index that every per-Gaussian array (features,
/// variances, weights, labels) aligns to.
struct GaussianScene {
  std::vector<Gaussian> gaussians;
  Aabb bbox;

  int size() const { return static_cast<int>(gaussians.size()); }
};

/// Builds a scene with the bounding box recomputed from the centers.
GaussianScene makeScene(std::vector<Gaussian> gaussians);

struct Violation {
  int index;               // Gaussian index, -1 for scene-level issues
  std::string invariant;   // short name, e.g. "opacity range"
};

/// Checks every type invariant; returns an empty list iff the scene is valid.
std::vector<Violation> validateScene(const GaussianScene& scene);

/// Pinhole camera with a rigid world-to-camera transform (+z looks forward,
/// x right, y down). Pixel (ix, iy) samples the image plane at the
/// continuous point (ix, iy).
struct Camera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  Mat3 world_to_cam_rot = Mat3::Identity();
  Vec3 world_to_cam_trans = Vec3::Zero();
  double znear = 0.01;
};

/// Empty iff the camera invariants hold (positive focals, principal point
/// inside the image, rotation orthonormal within 1e-6, znear > 0).
std::vector<std::string> validateCamera(const Camera& cam);

/// One view's 2D semantic feature image at one granularity.
/// `data` is (height*width) x D, pixel (x, y) at row y*width + x.
struct FeatureMap {
  int view_id = 0;
  int granularity = 1;  // in {1,2,3}
  int height = 0;
  int width = 0;
  RowMatrixXf data;

  int dim() const { return static_cast<int>(data.cols()); }
  auto at(int x, int y) const { return data.row(y * width + x); }
};

/// Minimum accumulated weight mass below which a Gaussian counts as
/// unobserved; guards the division in the weighted average.
inline constexpr double kMinWeightMass = 1e-6;

/// Per-Gaussian lifted semantics at one granularity: features, their
/// per-dimension variance (a confidence measure), the accumulated weight
/// mass and a validity mask. Rows with mass below kMinWeightMass are
/// invalid and zeroed.
struct SemanticField {
  int granularity = 1;
  RowMatrixXf features;          // N x D
  RowMatrixXf variance;          // N x D, elementwise >= 0
  Eigen::VectorXf weight_mass;   // N
  std::vector<std::uint8_t> valid;

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

/// Invariant checks for a field against its scene (row count, variance sign,
/// zeroed invalid rows). Empty iff consistent. `lifted` additionally
/// enforces the mass/validity coupling, which holds for lifted fields but
/// not for regularized ones (those keep all rows valid while carrying the
/// lifted mass through for bookkeeping).
std::vector<std::string> validateField(const SemanticField& field, int scene_size,
                                       bool lifted = true);

}  // namespace nrgs
