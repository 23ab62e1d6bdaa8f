#include "nrgs/projection.hpp"

#include <algorithm>
#include <cmath>

#include "nrgs/threading.hpp"

namespace nrgs {

std::vector<ProjectedGaussian> project(const GaussianScene& scene, const Camera& cam) {
  std::vector<ProjectedGaussian> out;
  out.reserve(scene.gaussians.size());
  const Mat3& rot = cam.world_to_cam_rot;
  for (int i = 0; i < scene.size(); ++i) {
    const Gaussian& g = scene.gaussians[i];
    const Vec3 p_cam = rot * g.mu + cam.world_to_cam_trans;
    const double z = p_cam.z();
    if (z < cam.znear) continue;

    const Vec2 u(cam.fx * p_cam.x() / z + cam.cx, cam.fy * p_cam.y() / z + cam.cy);
    if (u.x() < 0.0 || u.x() >= cam.width || u.y() < 0.0 || u.y() >= cam.height)
      continue;

    // Affine (EWA) approximation of the perspective projection around the
    // center, truncated to the 2x2 image-plane block.
    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx / z, 0.0, -cam.fx * p_cam.x() / (z * z),
           0.0, cam.fy / z, -cam.fy * p_cam.y() / (z * z);
    const Eigen::Matrix<double, 2, 3> jw = jac * rot;
    Mat2 cov2d = jw * covarianceOf(g) * jw.transpose();
    cov2d(0, 0) += kLowPassDilation;
    cov2d(1, 1) += kLowPassDilation;

    ProjectedGaussian pg;
    pg.index = i;
    pg.u = u;
    pg.depth = z;
    pg.cov2d = cov2d;
    const double det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(1, 0);
    pg.cov2d_inv << cov2d(1, 1) / det, -cov2d(0, 1) / det,
                    -cov2d(1, 0) / det, cov2d(0, 0) / det;
    pg.opacity = g.opacity;
    out.push_back(pg);
  }
  std::sort(out.begin(), out.end(), [](const ProjectedGaussian& a, const ProjectedGaussian& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.index < b.index;
  });
  return out;
}

std::vector<PixelWeight> weightsAtPixel(std::span<const ProjectedGaussian> projected,
                                        const Vec2& pixel) {
  std::vector<PixelWeight> out;
  double transmittance = 1.0;
  for (const ProjectedGaussian& pg : projected) {
    if (!pg.overlaps(pixel)) continue;
    if (transmittance < kTransmittanceCutoff) break;
    const double alpha = pg.alphaAt(pixel);
    out.push_back({pg.index, alpha * transmittance});
    transmittance *= 1.0 - alpha;
  }
  return out;
}

std::vector<PixelWeight> weightsAtPixel(std::span<const ProjectedGaussian> projected,
                                        std::span<const std::int32_t> overlap,
                                        const Vec2& pixel) {
  std::vector<PixelWeight> out;
  out.reserve(overlap.size());
  double transmittance = 1.0;
  for (std::int32_t pos : overlap) {
    if (transmittance < kTransmittanceCutoff) break;
    const ProjectedGaussian& pg = projected[pos];
    const double alpha = pg.alphaAt(pixel);
    out.push_back({pg.index, alpha * transmittance});
    transmittance *= 1.0 - alpha;
  }
  return out;
}

namespace {

struct PixelBounds {
  int x0, x1, y0, y1;  // inclusive
  bool empty;
};

PixelBounds footprintBounds(const ProjectedGaussian& pg, int width, int height) {
  const double rx = kFootprintSigma * std::sqrt(pg.cov2d(0, 0));
  const double ry = kFootprintSigma * std::sqrt(pg.cov2d(1, 1));
  PixelBounds b;
  b.x0 = std::max(0, static_cast<int>(std::ceil(pg.u.x() - rx)));
  b.x1 = std::min(width - 1, static_cast<int>(std::floor(pg.u.x() + rx)));
  b.y0 = std::max(0, static_cast<int>(std::ceil(pg.u.y() - ry)));
  b.y1 = std::min(height - 1, static_cast<int>(std::floor(pg.u.y() + ry)));
  b.empty = b.x0 > b.x1 || b.y0 > b.y1;
  return b;
}

int clampPixel(double coord, int size) {
  const int p = static_cast<int>(std::lround(coord));
  return std::clamp(p, 0, size - 1);
}

}  // namespace

OverlapGrid::OverlapGrid(std::span<const ProjectedGaussian> projected, int width,
                         int height)
    : width_(width), height_(height) {
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  std::vector<std::size_t> counts(pixels, 0);
  // Two passes: count overlaps per pixel, then fill in depth order so each
  // per-pixel list inherits the projection list's ordering.
  for (const ProjectedGaussian& pg : projected) {
    const PixelBounds b = footprintBounds(pg, width, height);
    if (b.empty) continue;
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x)
        if (pg.overlaps(Vec2(x, y))) ++counts[static_cast<std::size_t>(y) * width + x];
  }
  offsets_.assign(pixels + 1, 0);
  for (std::size_t p = 0; p < pixels; ++p) offsets_[p + 1] = offsets_[p] + counts[p];
  entries_.resize(offsets_[pixels]);
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::int32_t pos = 0; pos < static_cast<std::int32_t>(projected.size()); ++pos) {
    const ProjectedGaussian& pg = projected[pos];
    const PixelBounds b = footprintBounds(pg, width, height);
    if (b.empty) continue;
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x)
        if (pg.overlaps(Vec2(x, y)))
          entries_[cursor[static_cast<std::size_t>(y) * width + x]++] = pos;
  }
}

std::vector<WeightRecord> marginalWeights(const GaussianScene& scene, const Camera& cam,
                                          int view_id) {
  const std::vector<ProjectedGaussian> projected = project(scene, cam);
  if (projected.empty()) return {};
  const OverlapGrid grid(projected, cam.width, cam.height);

  // Group Gaussians by their rounded center pixel; each pixel is composited
  // once and serves every Gaussian centered on it.
  struct CenterRef {
    std::int64_t pixel;
    std::int32_t pos;  // position in the projection list
  };
  std::vector<CenterRef> refs;
  refs.reserve(projected.size());
  for (std::int32_t pos = 0; pos < static_cast<std::int32_t>(projected.size()); ++pos) {
    const ProjectedGaussian& pg = projected[pos];
    const int px = clampPixel(pg.u.x(), cam.width);
    const int py = clampPixel(pg.u.y(), cam.height);
    refs.push_back({static_cast<std::int64_t>(py) * cam.width + px, pos});
  }
  std::stable_sort(refs.begin(), refs.end(),
                   [](const CenterRef& a, const CenterRef& b) { return a.pixel < b.pixel; });

  std::vector<WeightRecord> out;
  out.reserve(projected.size());
  std::vector<double> scratch(scene.size(), 0.0);
  std::size_t lo = 0;
  while (lo < refs.size()) {
    std::size_t hi = lo;
    while (hi < refs.size() && refs[hi].pixel == refs[lo].pixel) ++hi;
    const int px = static_cast<int>(refs[lo].pixel % cam.width);
    const int py = static_cast<int>(refs[lo].pixel / cam.width);
    const std::vector<PixelWeight> composite =
        weightsAtPixel(projected, grid.at(px, py), Vec2(px, py));
    for (const PixelWeight& pw : composite) scratch[pw.index] = pw.weight;
    for (std::size_t r = lo; r < hi; ++r) {
      const int index = projected[refs[r].pos].index;
      const double w = scratch[index];
      if (w >= kWeightThreshold) out.push_back({index, view_id, px, py, w});
    }
    for (const PixelWeight& pw : composite) scratch[pw.index] = 0.0;
    lo = hi;
  }
  std::sort(out.begin(), out.end(), [](const WeightRecord& a, const WeightRecord& b) {
    return a.gaussian_index < b.gaussian_index;
  });
  return out;
}

RowMatrixXf renderFeatureImage(const GaussianScene& scene, const Camera& cam,
                               const Eigen::Ref<const RowMatrixXf>& features,
                               std::span<const std::uint8_t> valid, int threads) {
  const int dim = static_cast<int>(features.cols());
  RowMatrixXf image = RowMatrixXf::Zero(static_cast<Eigen::Index>(cam.width) * cam.height, dim);
  const std::vector<ProjectedGaussian> projected = project(scene, cam);
  if (projected.empty()) return image;
  const OverlapGrid grid(projected, cam.width, cam.height);

  parallelFor(0, cam.height, threads, [&](int y) {
    Eigen::VectorXd acc(dim);
    for (int x = 0; x < cam.width; ++x) {
      const auto overlap = grid.at(x, y);
      if (overlap.empty()) continue;
      acc.setZero();
      double transmittance = 1.0;
      for (std::int32_t pos : overlap) {
        if (transmittance < kTransmittanceCutoff) break;
        const ProjectedGaussian& pg = projected[pos];
        const double alpha = pg.alphaAt(Vec2(x, y));
        const double w = alpha * transmittance;
        transmittance *= 1.0 - alpha;
        if (w > 0.0 && (valid.empty() || valid[pg.index]))
          acc += w * features.row(pg.index).cast<double>();
      }
      image.row(y * cam.width + x) = acc.cast<float>();
    }
  });
  return image;
}

FeatureMap renderFeatureMap(const GaussianScene& scene, const Camera& cam,
                            const SemanticField& field, int view_id, int threads) {
  FeatureMap map;
  map.view_id = view_id;
  map.granularity = field.granularity;
  map.width = cam.width;
  map.height = cam.height;
  map.data = renderFeatureImage(scene, cam, field.features, field.valid, threads);
  return map;
}

}  // namespace nrgs
