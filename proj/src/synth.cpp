#include "nrgs/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "nrgs/projection.hpp"
#include "nrgs/rng.hpp"

namespace nrgs {

namespace {

constexpr double kPi = 3.14159265358979323846;
/// Center-pixel compositing mass below which a Gaussian is considered to
/// sit on a coverage silhouette rather than deep inside a region.
constexpr double kInteriorSaturation = 0.95;
/// Maximum composited mass other labels may contribute at a sample pixel
/// before the row counts as boundary.
constexpr double kInteriorLeak = 5e-3;

void checkConfig(const SynthConfig& cfg) {
  if (cfg.n_classes < 2) throw std::invalid_argument("n_classes must be >= 2");
  if (cfg.n_gaussians < cfg.n_classes)
    throw std::invalid_argument("n_gaussians must cover every class");
  if (cfg.parts_per_class < 1 || cfg.subparts_per_part < 1)
    throw std::invalid_argument("granularity tree fan-out must be >= 1");
  if (cfg.n_views < 2) throw std::invalid_argument("n_views must be >= 2");
  if (cfg.image_width < 8 || cfg.image_height < 8)
    throw std::invalid_argument("image size too small");
  if (cfg.feature_dim < 2) throw std::invalid_argument("feature_dim must be >= 2");
  if (cfg.noise_rate < 0.0 || cfg.noise_rate > 1.0)
    throw std::invalid_argument("noise_rate must be in [0,1]");
  if (!(cfg.blob_radius > 0.0) || !(cfg.camera_radius > 0.0))
    throw std::invalid_argument("radii must be positive");
  if (!(cfg.opacity_min > 0.0) || cfg.opacity_max > 1.0 ||
      cfg.opacity_min > cfg.opacity_max)
    throw std::invalid_argument("opacity range invalid");
  if (!(cfg.splat_scale_min > 0.0) || cfg.splat_scale_min > cfg.splat_scale_max)
    throw std::invalid_argument("splat scale range invalid");
}

double blobRingRadius(const SynthConfig& cfg) {
  // Class centers sit on a ring tight enough to spend image resolution on
  // the blobs rather than the gaps: neighbors stay 2.7 blob radii apart
  // (the hierarchical part/subpart layout spans ~1.1 radii per class).
  return 1.35 * cfg.blob_radius / std::sin(kPi / cfg.n_classes);
}

Vec3 randomUnit(Rng& rng) {
  while (true) {
    Vec3 v(rng.normal(), rng.normal(), rng.normal());
    const double n = v.norm();
    if (n > 1e-9) return v / n;
  }
}

/// Evenly spaced centers on a circle of the given radius in a random plane;
/// a single center collapses onto the parent.
std::vector<Vec3> childCenters(const Vec3& parent, int count, double radius,
                               Rng& rng) {
  std::vector<Vec3> centers(count, parent);
  const Vec3 u = randomUnit(rng);
  Vec3 v = u.cross(randomUnit(rng));
  while (v.norm() < 1e-6) v = u.cross(randomUnit(rng));
  v.normalize();
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  if (count == 1) return centers;
  for (int j = 0; j < count; ++j) {
    const double a = phase + 2.0 * kPi * j / count;
    centers[j] = parent + radius * (std::cos(a) * u + std::sin(a) * v);
  }
  return centers;
}

/// Splits `count` items into `groups` near-equal contiguous chunks; returns
/// the first index of each chunk plus the end sentinel.
std::vector<int> chunkBounds(int count, int groups) {
  std::vector<int> bounds(groups + 1, 0);
  for (int j = 0; j <= groups; ++j)
    bounds[j] = static_cast<int>(static_cast<std::int64_t>(count) * j / groups);
  return bounds;
}

RowMatrixXf drawPrototypes(int count, int dim, Rng& rng) {
  RowMatrixXf protos(count, dim);
  int accepted = 0;
  for (int tries = 0; accepted < count; ++tries) {
    if (tries > 20000)
      throw std::invalid_argument(
          "feature_dim too small to draw separable class prototypes");
    Eigen::VectorXf cand(dim);
    for (int d = 0; d < dim; ++d) cand[d] = static_cast<float>(rng.normal());
    const float n = cand.norm();
    if (n < 1e-6f) continue;
    cand /= n;
    bool ok = true;
    for (int k = 0; k < accepted && ok; ++k)
      ok = protos.row(k).dot(cand.transpose()) < 0.8f;
    if (!ok) continue;
    protos.row(accepted++) = cand.transpose();
  }
  return protos;
}

Camera makeLookAtCamera(const Vec3& eye, const Vec3& target, double fx, int width,
                        int height, double znear) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(Vec3(0.0, 0.0, 1.0));
  if (x.norm() < 1e-9) x = z.cross(Vec3(0.0, 1.0, 0.0));
  x.normalize();
  const Vec3 y = z.cross(x);
  Camera cam;
  cam.fx = cam.fy = fx;
  cam.cx = (width - 1) / 2.0;
  cam.cy = (height - 1) / 2.0;
  cam.width = width;
  cam.height = height;
  cam.world_to_cam_rot.row(0) = x.transpose();
  cam.world_to_cam_rot.row(1) = y.transpose();
  cam.world_to_cam_rot.row(2) = z.transpose();
  cam.world_to_cam_trans = -cam.world_to_cam_rot * eye;
  cam.znear = znear;
  return cam;
}

std::vector<Camera> makeCameraRing(const SynthConfig& cfg) {
  const double extent = blobRingRadius(cfg) + 1.6 * cfg.blob_radius;
  if (cfg.camera_radius < 1.6 * extent)
    throw std::invalid_argument("camera_radius too small for the blob layout");
  const double fx = 0.9 * (std::min(cfg.image_width, cfg.image_height) / 2.0) *
                    (cfg.camera_radius - extent) / extent;
  std::vector<Camera> cams;
  cams.reserve(cfg.n_views);
  for (int v = 0; v < cfg.n_views; ++v) {
    const double azimuth = 2.0 * kPi * v / cfg.n_views;
    const double elevation = (v % 2 == 0 ? 18.0 : 32.0) * kPi / 180.0;
    const Vec3 eye = cfg.camera_radius *
                     Vec3(std::cos(azimuth) * std::cos(elevation),
                          std::sin(azimuth) * std::cos(elevation), std::sin(elevation));
    cams.push_back(makeLookAtCamera(eye, Vec3::Zero(), fx, cfg.image_width,
                                    cfg.image_height, 0.05 * cfg.camera_radius));
  }
  return cams;
}

SynthScene buildCandidate(const SynthConfig& cfg, std::uint64_t attempt_seed) {
  Rng rng(attempt_seed);
  const int n = cfg.n_gaussians;
  const int k = cfg.n_classes;
  const double ring = blobRingRadius(cfg);
  const double phase = rng.uniform(0.0, 2.0 * kPi);

  std::vector<Vec3> centers(k);
  for (int c = 0; c < k; ++c) {
    const double a = phase + 2.0 * kPi * c / k;
    centers[c] = Vec3(ring * std::cos(a), ring * std::sin(a),
                      rng.uniform(-0.5, 0.5) * cfg.blob_radius);
  }
  std::vector<Vec3> base_color(k);
  for (int c = 0; c < k; ++c)
    base_color[c] = Vec3(rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85),
                         rng.uniform(0.15, 0.85));

  SynthScene out;
  out.truth.labels.resize(n, 3);
  std::vector<Gaussian> gaussians(n);

  // Hierarchical layout: each class blob is a ring of part blobs, each part
  // a ring of subpart blobs, so every granularity level has spatially
  // coherent regions with their own interiors.
  const int parts = cfg.parts_per_class;
  const int subparts = cfg.subparts_per_part;
  const std::vector<int> class_bounds = chunkBounds(n, k);
  for (int c = 0; c < k; ++c) {
    const std::vector<Vec3> part_centers =
        childCenters(centers[c], parts, 0.55 * cfg.blob_radius, rng);
    const int class_count = class_bounds[c + 1] - class_bounds[c];
    const std::vector<int> part_bounds = chunkBounds(class_count, parts);
    for (int p = 0; p < parts; ++p) {
      const std::vector<Vec3> sub_centers =
          childCenters(part_centers[p], subparts, 0.28 * cfg.blob_radius, rng);
      const int part_count = part_bounds[p + 1] - part_bounds[p];
      const std::vector<int> sub_bounds = chunkBounds(part_count, subparts);
      for (int q = 0; q < subparts; ++q) {
        for (int m = sub_bounds[q]; m < sub_bounds[q + 1]; ++m) {
          const int i = class_bounds[c] + part_bounds[p] + m;
          out.truth.labels(i, 0) = c;
          out.truth.labels(i, 1) = c * parts + p;
          out.truth.labels(i, 2) = (c * parts + p) * subparts + q;
          Gaussian& g = gaussians[i];
          g.mu = sub_centers[q] + cfg.position_spread * cfg.blob_radius *
                                      Vec3(rng.normal(), rng.normal(), rng.normal());
          g.scale = Vec3(rng.uniform(cfg.splat_scale_min, cfg.splat_scale_max),
                         rng.uniform(cfg.splat_scale_min, cfg.splat_scale_max),
                         rng.uniform(cfg.splat_scale_min, cfg.splat_scale_max));
          g.opacity = rng.uniform(cfg.opacity_min, cfg.opacity_max);
          g.rgb = base_color[c] + 0.05 * Vec3(rng.normal(), rng.normal(), rng.normal());
          g.rgb = g.rgb.cwiseMax(0.0).cwiseMin(1.0);
          Eigen::Vector4d qv(rng.normal(), rng.normal(), rng.normal(), rng.normal());
          while (qv.norm() < 1e-9)
            qv = Eigen::Vector4d(rng.normal(), rng.normal(), rng.normal(),
                                 rng.normal());
          qv.normalize();
          g.quat = Quat(qv[0], qv[1], qv[2], qv[3]);
        }
      }
    }
  }
  out.truth.part_to_whole.resize(k * parts);
  for (int p = 0; p < k * parts; ++p) out.truth.part_to_whole[p] = p / parts;
  out.truth.subpart_to_part.resize(k * parts * subparts);
  for (int s = 0; s < k * parts * subparts; ++s)
    out.truth.subpart_to_part[s] = s / subparts;

  out.truth.prototypes[0] = drawPrototypes(k, cfg.feature_dim, rng);
  out.truth.prototypes[1] = drawPrototypes(k * parts, cfg.feature_dim, rng);
  out.truth.prototypes[2] = drawPrototypes(k * parts * subparts, cfg.feature_dim, rng);

  out.scene = makeScene(std::move(gaussians));
  out.cameras = makeCameraRing(cfg);
  return out;
}

bool everyGaussianSeenTwice(const SynthScene& s) {
  std::vector<int> seen(s.scene.size(), 0);
  for (std::size_t v = 0; v < s.cameras.size(); ++v) {
    for (const WeightRecord& rec :
         marginalWeights(s.scene, s.cameras[v], static_cast<int>(v)))
      ++seen[rec.gaussian_index];
  }
  return std::all_of(seen.begin(), seen.end(), [](int c) { return c >= 2; });
}

}  // namespace

SynthScene generateScene(const SynthConfig& config) {
  checkConfig(config);
  for (int attempt = 0; attempt < 100; ++attempt) {
    SynthScene candidate =
        buildCandidate(config, Rng::deriveSeed(config.seed, 1000 + attempt));
    if (everyGaussianSeenTwice(candidate)) return candidate;
  }
  throw std::runtime_error(
      "could not make every Gaussian visible in >= 2 views after 100 attempts; "
      "increase n_views or loosen the scene layout");
}

namespace {

RowMatrixXf prototypeTable(const GroundTruth& truth, int granularity) {
  const RowMatrixXf& protos = truth.prototypes[granularity - 1];
  RowMatrixXf table(truth.labels.rows(), protos.cols());
  for (Eigen::Index i = 0; i < truth.labels.rows(); ++i)
    table.row(i) = protos.row(truth.labels(i, granularity - 1));
  return table;
}

}  // namespace

std::vector<FeatureMap> renderGtFeatureMaps(const GaussianScene& scene,
                                            const GroundTruth& truth,
                                            std::span<const Camera> cams,
                                            int granularity, int threads) {
  const RowMatrixXf table = prototypeTable(truth, granularity);
  std::vector<FeatureMap> maps;
  maps.reserve(cams.size());
  for (std::size_t v = 0; v < cams.size(); ++v) {
    FeatureMap map;
    map.view_id = static_cast<int>(v);
    map.granularity = granularity;
    map.width = cams[v].width;
    map.height = cams[v].height;
    map.data = renderFeatureImage(scene, cams[v], table, {}, threads);
    maps.push_back(std::move(map));
  }
  return maps;
}

std::vector<FeatureMap> renderCorruptedFeatureMaps(const GaussianScene& scene,
                                                   const GroundTruth& truth,
                                                   std::span<const Camera> cams,
                                                   int granularity,
                                                   const SynthConfig& config,
                                                   int threads) {
  const RowMatrixXf clean = prototypeTable(truth, granularity);
  const RowMatrixXf& protos = truth.prototypes[granularity - 1];
  const int n_labels = static_cast<int>(protos.rows());
  std::vector<FeatureMap> maps;
  maps.reserve(cams.size());
  for (std::size_t v = 0; v < cams.size(); ++v) {
    RowMatrixXf table = clean;
    for (int label = 0; label < n_labels; ++label) {
      // One stream per (granularity, view, region); the threshold draw and
      // the replacement draw never depend on noise_rate, so corruption sets
      // nest as the rate grows.
      const std::uint64_t key = (static_cast<std::uint64_t>(granularity) << 40) |
                                (static_cast<std::uint64_t>(v) << 20) |
                                static_cast<std::uint64_t>(label);
      Rng rng(Rng::deriveSeed(config.seed, key));
      const double draw = rng.uniform();
      int other = 0;
      if (n_labels > 1) {
        other = rng.uniformInt(n_labels - 1);
        if (other >= label) ++other;
      }
      if (draw >= config.noise_rate) continue;
      for (Eigen::Index i = 0; i < truth.labels.rows(); ++i) {
        if (truth.labels(i, granularity - 1) != label) continue;
        switch (config.noise_mode) {
          case NoiseMode::kSwapClass:
            if (n_labels > 1) table.row(i) = protos.row(other);
            break;
          case NoiseMode::kBlend:
            if (n_labels > 1)
              table.row(i) = 0.5f * protos.row(label) + 0.5f * protos.row(other);
            break;
          case NoiseMode::kDropout:
            table.row(i).setZero();
            break;
        }
      }
    }
    FeatureMap map;
    map.view_id = static_cast<int>(v);
    map.granularity = granularity;
    map.width = cams[v].width;
    map.height = cams[v].height;
    map.data = renderFeatureImage(scene, cams[v], table, {}, threads);
    maps.push_back(std::move(map));
  }
  return maps;
}

std::vector<std::uint8_t> interiorMask(const GaussianScene& scene,
                                       const GroundTruth& truth,
                                       std::span<const Camera> cams, int granularity) {
  std::vector<std::uint8_t> interior(scene.size(), 1);
  for (std::size_t v = 0; v < cams.size(); ++v) {
    const Camera& cam = cams[v];
    const std::vector<ProjectedGaussian> projected = project(scene, cam);
    if (projected.empty()) continue;
    const OverlapGrid grid(projected, cam.width, cam.height);

    // The lifted sample comes from the center pixel, so a Gaussian is marked
    // boundary as soon as, in any view where it is visible, the composited
    // blend at that pixel carries meaningful mass from another label (the
    // sample mixes prototypes) or stays unsaturated (the sample magnitude
    // wobbles with silhouette coverage). Occluded foreign footprints behind
    // the pixel contribute nothing and do not disqualify a row.
    std::unordered_map<std::int64_t, std::vector<PixelWeight>> blend_at_pixel;
    for (const WeightRecord& rec : marginalWeights(scene, cam, static_cast<int>(v))) {
      const std::int64_t pix = static_cast<std::int64_t>(rec.py) * cam.width + rec.px;
      auto it = blend_at_pixel.find(pix);
      if (it == blend_at_pixel.end())
        it = blend_at_pixel
                 .emplace(pix, weightsAtPixel(projected, grid.at(rec.px, rec.py),
                                              Vec2(rec.px, rec.py)))
                 .first;
      const int label = truth.labels(rec.gaussian_index, granularity - 1);
      double total = 0.0, foreign = 0.0;
      for (const PixelWeight& pw : it->second) {
        total += pw.weight;
        if (truth.labels(pw.index, granularity - 1) != label) foreign += pw.weight;
      }
      if (total < kInteriorSaturation || foreign >= kInteriorLeak)
        interior[rec.gaussian_index] = 0;
    }
  }
  return interior;
}

std::vector<int> trainViewIds(int n_views) {
  std::vector<int> ids;
  for (int v = 0; v < n_views; v += 2) ids.push_back(v);
  return ids;
}

std::vector<int> testViewIds(int n_views) {
  std::vector<int> ids;
  for (int v = 1; v < n_views; v += 2) ids.push_back(v);
  return ids;
}

std::vector<Camera> trainViews(std::span<const Camera> cams) {
  std::vector<Camera> out;
  for (int v : trainViewIds(static_cast<int>(cams.size()))) out.push_back(cams[v]);
  return out;
}

std::vector<Camera> testViews(std::span<const Camera> cams) {
  std::vector<Camera> out;
  for (int v : testViewIds(static_cast<int>(cams.size()))) out.push_back(cams[v]);
  return out;
}

}  // namespace nrgs
