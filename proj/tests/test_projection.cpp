#include <doctest.h>

#include <algorithm>

#include "nrgs/projection.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace nrgs;

TEST_SUITE_BEGIN("projection");

namespace {

Camera frontalCamera(int size = 128, double fx = 100.0, double c = 64.0) {
  Camera cam;
  cam.fx = cam.fy = fx;
  cam.cx = cam.cy = c;
  cam.width = cam.height = size;
  cam.znear = 0.1;
  return cam;
}

Gaussian pointAt(const Vec3& p, double opacity = 0.8, double scale = 0.05) {
  Gaussian g;
  g.mu = p;
  g.scale = Vec3::Constant(scale);
  g.opacity = opacity;
  return g;
}

}  // namespace

TEST_CASE("a Gaussian on the optical axis projects to the principal point") {
  const GaussianScene scene = makeScene({pointAt(Vec3(0, 0, 2))});
  const auto projected = project(scene, frontalCamera());
  REQUIRE(projected.size() == 1);
  CHECK(projected[0].u.x() == doctest::Approx(64.0));
  CHECK(projected[0].u.y() == doctest::Approx(64.0));
  CHECK(projected[0].depth == doctest::Approx(2.0));
}

TEST_CASE("pinhole arithmetic for an off-axis center") {
  const GaussianScene scene = makeScene({pointAt(Vec3(0.5, 0, 2))});
  const auto projected = project(scene, frontalCamera());
  REQUIRE(projected.size() == 1);
  CHECK(projected[0].u.x() == doctest::Approx(64 + 100 * 0.25));
  CHECK(projected[0].u.y() == doctest::Approx(64.0));
}

TEST_CASE("Gaussians behind the near plane are excluded") {
  const GaussianScene scene = makeScene({pointAt(Vec3(0, 0, -2)), pointAt(Vec3(0, 0, 0.05))});
  CHECK(project(scene, frontalCamera()).empty());
}

TEST_CASE("projection doubles linearly with fx and cx at fixed depth") {
  const GaussianScene scene = makeScene({pointAt(Vec3(0.3, -0.2, 2))});
  Camera cam = frontalCamera();
  Camera cam2 = cam;
  cam2.fx *= 2;
  cam2.fy *= 2;
  cam2.cx *= 2;
  cam2.cy *= 2;
  cam2.width *= 2;
  cam2.height *= 2;
  const auto p1 = project(scene, cam);
  const auto p2 = project(scene, cam2);
  REQUIRE(p1.size() == 1);
  REQUIRE(p2.size() == 1);
  CHECK(p2[0].u.x() == doctest::Approx(2 * p1[0].u.x()));
  CHECK(p2[0].u.y() == doctest::Approx(2 * p1[0].u.y()));
}

TEST_CASE("projection output is depth sorted") {
  Rng rng(31);
  const GaussianScene scene = testutil::randomScene(rng, 30);
  const Camera cam = testutil::randomCamera(rng, 32);
  const auto projected = project(scene, cam);
  for (std::size_t i = 1; i < projected.size(); ++i)
    CHECK(projected[i - 1].depth <= projected[i].depth);
}

TEST_CASE("full opacity is clamped to the alpha ceiling") {
  const GaussianScene scene = makeScene({pointAt(Vec3(0, 0, 2), 1.0)});
  const auto projected = project(scene, frontalCamera());
  const auto weights = weightsAtPixel(projected, Vec2(64, 64));
  REQUIRE(weights.size() == 1);
  // Opacity 1 evaluates to alpha_max, not 1: transmittance must stay positive.
  CHECK(weights[0].weight == doctest::Approx(kAlphaMax));
}

TEST_CASE("an isolated Gaussian's center weight is its opacity") {
  const GaussianScene scene = makeScene({pointAt(Vec3(0, 0, 2), 0.8)});
  const auto records = marginalWeights(scene, frontalCamera(), 0);
  REQUIRE(records.size() == 1);
  CHECK(records[0].weight == doctest::Approx(0.8));
}

TEST_CASE("two stacked half-opacity Gaussians composite to 0.5 and 0.25") {
  const GaussianScene scene =
      makeScene({pointAt(Vec3(0, 0, 2), 0.5), pointAt(Vec3(0, 0, 3), 0.5)});
  const auto projected = project(scene, frontalCamera());
  const auto weights = weightsAtPixel(projected, Vec2(64, 64));
  REQUIRE(weights.size() == 2);
  CHECK(weights[0].index == 0);
  CHECK(weights[0].weight == doctest::Approx(0.5));
  CHECK(weights[1].index == 1);
  CHECK(weights[1].weight == doctest::Approx(0.25));

  const auto records = marginalWeights(scene, frontalCamera(), 0);
  REQUIRE(records.size() == 2);
  CHECK(records[1].weight == doctest::Approx(0.25));
}

TEST_CASE("zero alpha contributes weight zero without stopping the traversal") {
  const GaussianScene scene =
      makeScene({pointAt(Vec3(0, 0, 2), 0.0), pointAt(Vec3(0, 0, 3), 0.5)});
  const auto projected = project(scene, frontalCamera());
  const auto weights = weightsAtPixel(projected, Vec2(64, 64));
  REQUIRE(weights.size() == 2);
  CHECK(weights[0].weight == 0.0);
  CHECK(weights[1].weight == doctest::Approx(0.5));
}

TEST_CASE("a fully occluded Gaussian is dropped from the marginal records") {
  std::vector<Gaussian> gs;
  // Enough near-opaque layers to push transmittance below the cutoff.
  for (int k = 0; k < 8; ++k) gs.push_back(pointAt(Vec3(0, 0, 1.5 + 0.1 * k), 0.95));
  gs.push_back(pointAt(Vec3(0, 0, 4), 0.9));
  const GaussianScene scene = makeScene(gs);
  const auto records = marginalWeights(scene, frontalCamera(), 0);
  for (const WeightRecord& rec : records) CHECK(rec.gaussian_index != 8);
}

TEST_CASE("pixel weights sum to at most one and match the leftover transmittance") {
  Rng rng(32);
  for (int trial = 0; trial < 30; ++trial) {
    const GaussianScene scene = testutil::randomScene(rng, 10);
    const Camera cam = testutil::randomCamera(rng);
    const auto projected = project(scene, cam);
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        const auto weights = weightsAtPixel(projected, Vec2(x, y));
        double sum = 0.0;
        for (const PixelWeight& pw : weights) {
          sum += pw.weight;
          CHECK(pw.weight >= 0.0);
          CHECK(pw.weight <= 1.0);
        }
        CHECK(sum <= 1.0 + 1e-6);
        // Recompute transmittance from the alphas along the same traversal;
        // it must telescope to 1 - sum(w).
        double transmittance = 1.0;
        std::size_t blended = 0;
        for (const ProjectedGaussian& pg : projected) {
          if (!pg.overlaps(Vec2(x, y))) continue;
          if (transmittance < kTransmittanceCutoff) break;
          transmittance *= 1.0 - pg.alphaAt(Vec2(x, y));
          ++blended;
        }
        CHECK(blended == weights.size());
        CHECK(std::abs(transmittance - (1.0 - sum)) < 1e-6);
      }
    }
  }
}

TEST_CASE("permuting the input list does not change pixel weights") {
  Rng rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    GaussianScene scene = testutil::randomScene(rng, 8);
    const Camera cam = testutil::randomCamera(rng);
    const auto before = weightsAtPixel(project(scene, cam), Vec2(7, 8));

    // Permute and track the index relabeling.
    std::vector<int> order(scene.size());
    std::iota(order.begin(), order.end(), 0);
    for (int i = scene.size() - 1; i > 0; --i)
      std::swap(order[i], order[rng.uniformInt(i + 1)]);
    GaussianScene permuted;
    std::vector<int> back(scene.size());
    for (int i = 0; i < scene.size(); ++i) {
      permuted.gaussians.push_back(scene.gaussians[order[i]]);
      back[order[i]] = i;
    }
    permuted.bbox = scene.bbox;
    const auto after = weightsAtPixel(project(permuted, cam), Vec2(7, 8));

    REQUIRE(after.size() == before.size());
    for (std::size_t k = 0; k < before.size(); ++k) {
      CHECK(after[k].index == back[before[k].index]);
      CHECK(after[k].weight == doctest::Approx(before[k].weight).epsilon(1e-12));
    }
  }
}

TEST_CASE("marginal weights match the no-cutoff per-pixel reference") {
  Rng rng(34);
  for (int trial = 0; trial < 50; ++trial) {
    const GaussianScene scene = testutil::randomScene(rng, 10);
    const Camera cam = testutil::randomCamera(rng, 16);
    const auto fast = marginalWeights(scene, cam, 3);
    const auto slow = oracle::marginalWeightsNaive(scene, cam, 3);
    // The cutoff can drop a weight the reference keeps, but only below its
    // own threshold scale.
    std::vector<double> fast_w(scene.size(), 0.0), slow_w(scene.size(), 0.0);
    for (const auto& r : fast) fast_w[r.gaussian_index] = r.weight;
    for (const auto& r : slow) slow_w[r.gaussian_index] = r.weight;
    for (int i = 0; i < scene.size(); ++i)
      CHECK(std::abs(fast_w[i] - slow_w[i]) < 1e-4);
    for (const auto& r : fast) {
      CHECK(r.view_id == 3);
      CHECK(r.weight >= kWeightThreshold);
    }
  }
}

TEST_CASE("rendering an empty scene yields a zero map") {
  const GaussianScene scene = makeScene({});
  SemanticField field;
  field.features = RowMatrixXf::Zero(0, 4);
  field.variance = RowMatrixXf::Zero(0, 4);
  field.weight_mass = Eigen::VectorXf::Zero(0);
  const Camera cam = frontalCamera(32, 30.0, 15.5);
  const FeatureMap map = renderFeatureMap(scene, cam, field, 0);
  CHECK(map.data.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("rendered center pixel carries opacity-scaled features") {
  const GaussianScene scene = makeScene({pointAt(Vec3(0, 0, 2), 0.8)});
  SemanticField field;
  field.granularity = 1;
  field.features = RowMatrixXf::Zero(1, 3);
  field.features(0, 0) = 1.0f;
  field.variance = RowMatrixXf::Zero(1, 3);
  field.weight_mass = Eigen::VectorXf::Ones(1);
  field.valid = {1};
  const FeatureMap map = renderFeatureMap(scene, frontalCamera(), field, 0);
  CHECK(map.at(64, 64)[0] == doctest::Approx(0.8).epsilon(1e-5));
  CHECK(map.at(64, 64)[1] == 0.0f);
}

TEST_CASE("stacked features blend linearly with compositing weights") {
  const GaussianScene scene =
      makeScene({pointAt(Vec3(0, 0, 2), 0.5), pointAt(Vec3(0, 0, 3), 0.5)});
  SemanticField field;
  field.granularity = 1;
  field.features = RowMatrixXf(2, 1);
  field.features << 2.0f, 6.0f;
  field.variance = RowMatrixXf::Zero(2, 1);
  field.weight_mass = Eigen::VectorXf::Ones(2);
  field.valid = {1, 1};
  const FeatureMap map = renderFeatureMap(scene, frontalCamera(), field, 0);
  CHECK(map.at(64, 64)[0] == doctest::Approx(0.5 * 2 + 0.25 * 6).epsilon(1e-5));
}

TEST_CASE("invalid field rows contribute nothing to the render") {
  const GaussianScene scene = makeScene({pointAt(Vec3(0, 0, 2), 0.8)});
  SemanticField field;
  field.granularity = 1;
  field.features = RowMatrixXf::Ones(1, 2);
  field.variance = RowMatrixXf::Zero(1, 2);
  field.weight_mass = Eigen::VectorXf::Zero(1);
  field.valid = {0};
  const FeatureMap map = renderFeatureMap(scene, frontalCamera(), field, 0);
  CHECK(map.data.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("rendering is bitwise independent of the thread count") {
  Rng rng(35);
  const GaussianScene scene = testutil::randomScene(rng, 40);
  const Camera cam = testutil::randomCamera(rng, 24);
  SemanticField field;
  field.granularity = 1;
  field.features = RowMatrixXf(scene.size(), 5);
  for (Eigen::Index i = 0; i < field.features.size(); ++i)
    field.features.data()[i] = static_cast<float>(rng.uniform(-1, 1));
  field.variance = RowMatrixXf::Zero(scene.size(), 5);
  field.weight_mass = Eigen::VectorXf::Ones(scene.size());
  field.valid.assign(scene.size(), 1);
  const FeatureMap one = renderFeatureMap(scene, cam, field, 0, 1);
  const FeatureMap four = renderFeatureMap(scene, cam, field, 0, 4);
  CHECK((one.data.array() == four.data.array()).all());
}

TEST_SUITE_END();
