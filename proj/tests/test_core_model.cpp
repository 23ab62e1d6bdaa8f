#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "nrgs/types.hpp"
#include "test_util.hpp"

using namespace nrgs;

TEST_SUITE_BEGIN("core_model");

TEST_CASE("covariance of an isotropic unit Gaussian is the identity") {
  Gaussian g;
  CHECK((covarianceOf(g) - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("axis-aligned anisotropic covariance is diagonal of squared scales") {
  Gaussian g;
  g.scale = Vec3(2, 1, 1);
  const Mat3 cov = covarianceOf(g);
  CHECK((cov - Vec3(4, 1, 1).asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("90-degree z rotation moves the long axis to y") {
  Gaussian g;
  g.scale = Vec3(2, 1, 1);
  g.quat = Quat(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()));
  const Mat3 cov = covarianceOf(g);
  CHECK((cov - Vec3(1, 4, 1).asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("covariance is invariant under quaternion sign flip") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Gaussian g = testutil::randomGaussian(rng);
    Gaussian flipped = g;
    flipped.quat.coeffs() = -flipped.quat.coeffs();
    CHECK((covarianceOf(g) - covarianceOf(flipped)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("covariance is symmetric with eigenvalues above min scale squared") {
  Rng rng(18);
  for (int trial = 0; trial < 50; ++trial) {
    const Gaussian g = testutil::randomGaussian(rng);
    const Mat3 cov = covarianceOf(g);
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const double min_scale_sq = g.scale.minCoeff() * g.scale.minCoeff();
    CHECK(eig.eigenvalues().minCoeff() >= min_scale_sq - 1e-9);
  }
}

TEST_CASE("validateScene accepts a valid scene") {
  Rng rng(19);
  CHECK(validateScene(testutil::randomScene(rng, 5)).empty());
}

TEST_CASE("validateScene names the broken invariant and index") {
  Rng rng(20);
  GaussianScene scene = testutil::randomScene(rng, 3);

  SUBCASE("opacity out of range") {
    scene.gaussians[1].opacity = 1.5;
    const auto violations = validateScene(scene);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].index == 1);
    CHECK(violations[0].invariant == "opacity range");
  }
  SUBCASE("zero quaternion") {
    scene.gaussians[2].quat = Quat(0, 0, 0, 0);
    const auto violations = validateScene(scene);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].index == 2);
    CHECK(violations[0].invariant == "quaternion norm");
  }
  SUBCASE("negative scale") {
    scene.gaussians[0].scale.y() = -0.1;
    const auto violations = validateScene(scene);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].invariant == "scale positive");
  }
  SUBCASE("center outside the bounding box") {
    scene.gaussians[0].mu = scene.bbox.max + Vec3(1, 0, 0);
    const auto violations = validateScene(scene);
    REQUIRE(!violations.empty());
    CHECK(violations[0].invariant == "bbox contains mu");
  }
}

TEST_CASE("makeScene bbox contains every center") {
  Rng rng(21);
  const GaussianScene scene = testutil::randomScene(rng, 40);
  for (const Gaussian& g : scene.gaussians) CHECK(scene.bbox.contains(g.mu));
}

TEST_CASE("validateCamera flags a non-orthonormal rotation") {
  Rng rng(22);
  Camera cam = testutil::randomCamera(rng);
  CHECK(validateCamera(cam).empty());
  cam.world_to_cam_rot(0, 0) += 0.01;
  CHECK(!validateCamera(cam).empty());
}

TEST_SUITE_END();
