#include "nrgs/types.hpp"

#include <cmath>
#include <limits>

namespace nrgs {

Mat3 covarianceOf(const Gaussian& g) {
  const Mat3 rot = g.quat.toRotationMatrix();
  return rot * g.scale.array().square().matrix().asDiagonal() * rot.transpose();
}

GaussianScene makeScene(std::vector<Gaussian> gaussians) {
  GaussianScene scene;
  scene.gaussians = std::move(gaussians);
  if (scene.gaussians.empty()) return scene;
  Vec3 lo = scene.gaussians.front().mu;
  Vec3 hi = lo;
  for (const Gaussian& g : scene.gaussians) {
    lo = lo.cwiseMin(g.mu);
    hi = hi.cwiseMax(g.mu);
  }
  scene.bbox = {lo, hi};
  return scene;
}

namespace {

bool allFinite(const Gaussian& g) {
  return g.mu.allFinite() && g.scale.allFinite() && g.rgb.allFinite() &&
         std::isfinite(g.opacity) && g.quat.coeffs().allFinite();
}

}  // namespace

std::vector<Violation> validateScene(const GaussianScene& scene) {
  std::vector<Violation> out;
  for (int i = 0; i < scene.size(); ++i) {
    const Gaussian& g = scene.gaussians[i];
    if (!allFinite(g)) {
      out.push_back({i, "finite values"});
      continue;
    }
    if (std::abs(g.quat.norm() - 1.0) > 1e-6) out.push_back({i, "quaternion norm"});
    if (!(g.scale.array() > 0.0).all()) out.push_back({i, "scale positive"});
    if (g.opacity < 0.0 || g.opacity > 1.0) out.push_back({i, "opacity range"});
    if ((g.rgb.array() < 0.0).any() || (g.rgb.array() > 1.0).any())
      out.push_back({i, "rgb range"});
    if (!scene.bbox.contains(g.mu)) out.push_back({i, "bbox contains mu"});
  }
  return out;
}

std::vector<std::string> validateCamera(const Camera& cam) {
  std::vector<std::string> out;
  if (!(cam.fx > 0.0) || !(cam.fy > 0.0)) out.push_back("focal length positive");
  if (cam.width <= 0 || cam.height <= 0) out.push_back("image size positive");
  if (cam.cx < 0.0 || cam.cx >= cam.width || cam.cy < 0.0 || cam.cy >= cam.height)
    out.push_back("principal point inside image");
  const Mat3& rot = cam.world_to_cam_rot;
  if ((rot * rot.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6)
    out.push_back("rotation orthonormal");
  if (!(cam.znear > 0.0)) out.push_back("znear positive");
  if (!rot.allFinite() || !cam.world_to_cam_trans.allFinite())
    out.push_back("finite transform");
  return out;
}

std::vector<std::string> validateField(const SemanticField& field, int scene_size,
                                       bool lifted) {
  std::vector<std::string> out;
  const int n = field.size();
  if (n != scene_size) out.push_back("row count matches scene");
  if (field.variance.rows() != n || field.variance.cols() != field.features.cols())
    out.push_back("variance shape");
  if (field.weight_mass.size() != n || static_cast<int>(field.valid.size()) != n) {
    out.push_back("mass/validity shape");
    return out;
  }
  if (!field.features.allFinite() || !field.variance.allFinite())
    out.push_back("finite values");
  if ((field.variance.array() < 0.0f).any()) out.push_back("variance nonnegative");
  if ((field.weight_mass.array() < 0.0f).any()) out.push_back("mass nonnegative");
  if (lifted) {
    for (int i = 0; i < n; ++i) {
      const bool expect = field.weight_mass[i] >= static_cast<float>(kMinWeightMass);
      if (static_cast<bool>(field.valid[i]) != expect) {
        out.push_back("validity/mass coupling");
        break;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (field.valid[i]) continue;
    if (field.features.row(i).any() || field.variance.row(i).any()) {
      out.push_back("invalid rows zeroed");
      break;
    }
  }
  return out;
}

}  // namespace nrgs
