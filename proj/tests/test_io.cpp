#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "nrgs/io.hpp"
#include "test_util.hpp"

using namespace nrgs;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("io");

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("nrgs_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("crc32 matches the reference value for 123456789") {
  const char* s = "123456789";
  CHECK(crc32({reinterpret_cast<const std::uint8_t*>(s), 9}) == 0xCBF43926u);
}

TEST_CASE("tensor files round-trip exactly") {
  TempDir dir;
  Tensor t;
  t.dims = {2, 3, 4};
  for (int i = 0; i < 24; ++i) t.data.push_back(0.25f * i - 1.5f);
  writeTensor(dir / "t.nrgt", t);
  const Tensor back = readTensor(dir / "t.nrgt");
  CHECK(back.dims == t.dims);
  CHECK(back.data == t.data);

  SUBCASE("rewriting produces byte-identical files") {
    const auto first = slurp(dir / "t.nrgt");
    writeTensor(dir / "t2.nrgt", back);
    CHECK(first == slurp(dir / "t2.nrgt"));
  }
}

TEST_CASE("tensor error cases produce their named error kinds") {
  TempDir dir;
  Tensor t;
  t.dims = {4};
  t.data = {1, 2, 3, 4};
  writeTensor(dir / "t.nrgt", t);
  auto bytes = slurp(dir / "t.nrgt");

  SUBCASE("truncation") {
    bytes.resize(bytes.size() - 5);
    spit(dir / "bad.nrgt", bytes);
    try {
      readTensor(dir / "bad.nrgt");
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(e.kind() == IoErrorKind::kTruncated);
    }
  }
  SUBCASE("magic mismatch") {
    bytes[0] = 'X';
    spit(dir / "bad.nrgt", bytes);
    try {
      readTensor(dir / "bad.nrgt");
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(e.kind() == IoErrorKind::kBadMagic);
    }
  }
  SUBCASE("version mismatch") {
    bytes[4] = 9;
    spit(dir / "bad.nrgt", bytes);
    try {
      readTensor(dir / "bad.nrgt");
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(e.kind() == IoErrorKind::kBadVersion);
    }
  }
  SUBCASE("non-finite payload") {
    Tensor nan_tensor;
    nan_tensor.dims = {2};
    nan_tensor.data = {1.0f, std::numeric_limits<float>::quiet_NaN()};
    writeTensor(dir / "nan.nrgt", nan_tensor);
    try {
      readTensor(dir / "nan.nrgt");
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(e.kind() == IoErrorKind::kNonFinite);
    }
  }
  SUBCASE("trailing bytes") {
    bytes.push_back(0);
    spit(dir / "bad.nrgt", bytes);
    CHECK_THROWS_AS(readTensor(dir / "bad.nrgt"), IoError);
  }
}

TEST_CASE("scene PLY serialization is byte-stable across a round trip") {
  TempDir dir;
  Rng rng(81);
  const GaussianScene scene = testutil::randomScene(rng, 23);
  writeScenePly(dir / "scene.ply", scene);
  const SceneLoadResult loaded = readScenePly(dir / "scene.ply");
  CHECK(loaded.warnings.empty());
  REQUIRE(loaded.scene.size() == scene.size());
  writeScenePly(dir / "again.ply", loaded.scene);
  CHECK(slurp(dir / "scene.ply") == slurp(dir / "again.ply"));
  CHECK(validateScene(loaded.scene).empty());
}

TEST_CASE("scene loading renormalizes quaternions and keeps index order") {
  TempDir dir;
  Rng rng(82);
  GaussianScene scene = testutil::randomScene(rng, 4);
  scene.gaussians[2].quat.coeffs() *= 3.0;  // denormalized on purpose
  writeScenePly(dir / "scene.ply", scene);
  const SceneLoadResult loaded = readScenePly(dir / "scene.ply");
  CHECK(loaded.scene.gaussians[2].quat.norm() == doctest::Approx(1.0).epsilon(1e-6));
  for (int i = 0; i < 4; ++i)
    CHECK((loaded.scene.gaussians[i].mu - scene.gaussians[i].mu).norm() < 1e-6);
}

TEST_CASE("convention mismatches raise warnings naming the property") {
  TempDir dir;
  Rng rng(83);
  GaussianScene scene = testutil::randomScene(rng, 3);
  writeScenePly(dir / "scene.ply", scene);
  auto bytes = slurp(dir / "scene.ply");
  // Patch vertex 0's opacity (property 3) to a logit-style value and scale_0
  // (property 8) to a log-style negative value.
  const std::size_t body = std::string(bytes.begin(), bytes.end()).find("end_header\n") +
                           std::string("end_header\n").size();
  const float bad_opacity = -4.3f, bad_scale = -2.0f;
  std::memcpy(bytes.data() + body + 3 * 4, &bad_opacity, 4);
  std::memcpy(bytes.data() + body + 8 * 4, &bad_scale, 4);
  spit(dir / "foreign.ply", bytes);
  const SceneLoadResult loaded = readScenePly(dir / "foreign.ply");
  REQUIRE(loaded.warnings.size() == 2);
  CHECK(loaded.warnings[0].find("opacity") != std::string::npos);
  CHECK(loaded.warnings[1].find("scale") != std::string::npos);
  CHECK(validateScene(loaded.scene).empty());  // values were clamped
}

TEST_CASE("PLY parse failures carry precise kinds") {
  TempDir dir;
  SUBCASE("missing property") {
    std::string text =
        "ply\nformat binary_little_endian 1.0\nelement vertex 0\n"
        "property float x\nproperty float y\nproperty float z\nend_header\n";
    std::ofstream(dir / "sparse.ply") << text;
    try {
      readScenePly(dir / "sparse.ply");
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(e.kind() == IoErrorKind::kMissingEntry);
    }
  }
  SUBCASE("not a ply") {
    std::ofstream(dir / "x.ply") << "plyx\nend_header\n";
    try {
      readScenePly(dir / "x.ply");
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(e.kind() == IoErrorKind::kBadMagic);
    }
  }
}

TEST_CASE("checkpoints round-trip with bitwise-identical forward passes") {
  TempDir dir;
  Rng rng(84);
  const GaussianScene scene = testutil::randomScene(rng, 10);
  MlpConfig cfg;
  cfg.hidden = 12;
  cfg.blocks = 2;
  cfg.out_dim = 6;
  const Mlp<float> model = initMlp<float>(cfg, computeNormStats(scene), 31);
  writeCheckpoint(dir / "m.nrgm", model);
  const Mlp<float> back = readCheckpoint(dir / "m.nrgm");
  CHECK(back.config == cfg);
  CHECK(back.seed == model.seed);
  CHECK((back.params.array() == model.params.array()).all());

  const BatchMatrix<float> x = encodeBatch<float>(scene, 2, model.stats);
  const BatchMatrix<float> x2 = encodeBatch<float>(scene, 2, back.stats);
  CHECK((x.array() == x2.array()).all());
  CHECK((forward<float>(model, x).array() == forward<float>(back, x2).array()).all());
}

TEST_CASE("a flipped payload byte fails the checkpoint CRC") {
  TempDir dir;
  MlpConfig cfg;
  cfg.hidden = 4;
  cfg.blocks = 1;
  cfg.out_dim = 2;
  writeCheckpoint(dir / "m.nrgm", initMlp<float>(cfg, NormStats{}, 1));
  auto bytes = slurp(dir / "m.nrgm");
  bytes[bytes.size() - 12] ^= 0x40;  // inside the parameter payload
  spit(dir / "bad.nrgm", bytes);
  try {
    readCheckpoint(dir / "bad.nrgm");
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(e.kind() == IoErrorKind::kCrcMismatch);
  }
}

TEST_CASE("cameras round-trip through JSON") {
  TempDir dir;
  Rng rng(85);
  std::vector<Camera> cams{testutil::randomCamera(rng, 32), testutil::randomCamera(rng, 48)};
  writeCameras(dir / "cams.json", cams);
  const std::vector<Camera> back = readCameras(dir / "cams.json");
  REQUIRE(back.size() == 2);
  for (int v = 0; v < 2; ++v) {
    CHECK(back[v].fx == cams[v].fx);
    CHECK(back[v].width == cams[v].width);
    CHECK((back[v].world_to_cam_rot - cams[v].world_to_cam_rot).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK(back[v].world_to_cam_trans == cams[v].world_to_cam_trans);
  }
  writeCameras(dir / "cams2.json", back);
  CHECK(slurp(dir / "cams.json") == slurp(dir / "cams2.json"));
}

TEST_CASE("semantic fields round-trip through their tensor quartet") {
  TempDir dir;
  SemanticField field;
  field.granularity = 2;
  field.features = RowMatrixXf::Random(5, 3);
  field.variance = RowMatrixXf::Random(5, 3).cwiseAbs();
  field.weight_mass = Eigen::VectorXf::Constant(5, 0.5f);
  field.valid.assign(5, 1);
  field.valid[4] = 0;
  field.weight_mass[4] = 0.0f;
  field.features.row(4).setZero();
  field.variance.row(4).setZero();
  writeField(dir / "field_g2", field);
  const SemanticField back = readField(dir / "field_g2", 2);
  CHECK(back.granularity == 2);
  CHECK((back.features.array() == field.features.array()).all());
  CHECK((back.variance.array() == field.variance.array()).all());
  CHECK(back.valid == field.valid);
}

TEST_CASE("feature manifests ingest and validate external maps") {
  TempDir dir;
  Rng rng(86);
  std::vector<Camera> cams{testutil::randomCamera(rng, 12), testutil::randomCamera(rng, 12)};
  std::vector<ManifestEntry> entries;
  for (int v = 0; v < 2; ++v) {
    for (int g = 1; g <= 3; ++g) {
      const std::string name =
          "f_v" + std::to_string(v) + "_g" + std::to_string(g) + ".nrgt";
      writeFeatureMapTensor(dir / name, testutil::randomFeatureMap(rng, cams[v], 8, v, g));
      entries.push_back({v, g, name});
    }
  }
  writeFeatureManifest(dir / "manifest.json", entries);

  SUBCASE("a complete manifest yields all maps") {
    const auto maps = ingestExternalFeatures(dir / "manifest.json", cams);
    CHECK(maps.size() == 6);
  }
  SUBCASE("a dimension mismatch names the offending file") {
    writeFeatureMapTensor(dir / entries[3].path,
                          testutil::randomFeatureMap(rng, cams[1], 7, 1, 1));
    try {
      ingestExternalFeatures(dir / "manifest.json", cams);
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(e.kind() == IoErrorKind::kDimensionMismatch);
      CHECK(std::string(e.what()).find(entries[3].path) != std::string::npos);
    }
  }
  SUBCASE("a missing view is reported") {
    entries.pop_back();
    writeFeatureManifest(dir / "manifest.json", entries);
    try {
      ingestExternalFeatures(dir / "manifest.json", cams);
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(e.kind() == IoErrorKind::kMissingEntry);
    }
  }
  SUBCASE("an unmatched view id is rejected") {
    entries[0].view_id = 7;
    writeFeatureManifest(dir / "manifest.json", entries);
    CHECK_THROWS_AS(ingestExternalFeatures(dir / "manifest.json", cams), IoError);
  }
  SUBCASE("an empty manifest is an empty list") {
    writeFeatureManifest(dir / "manifest.json", {});
    CHECK(ingestExternalFeatures(dir / "manifest.json", cams).empty());
  }
}

TEST_CASE("ground truth round-trips through JSON") {
  TempDir dir;
  GroundTruth truth;
  truth.labels.resize(3, 3);
  truth.labels << 0, 0, 0, 1, 2, 4, 1, 3, 7;
  truth.part_to_whole = {0, 0, 1, 1};
  truth.subpart_to_part = {0, 0, 1, 1, 2, 2, 3, 3};
  truth.prototypes[0] = RowMatrixXf::Random(2, 4);
  truth.prototypes[1] = RowMatrixXf::Random(4, 4);
  truth.prototypes[2] = RowMatrixXf::Random(8, 4);
  writeGroundTruth(dir / "gt.json", truth);
  const GroundTruth back = readGroundTruth(dir / "gt.json");
  CHECK(back.labels == truth.labels);
  CHECK(back.part_to_whole == truth.part_to_whole);
  for (int g = 0; g < 3; ++g)
    CHECK((back.prototypes[g].array() == truth.prototypes[g].array()).all());
}

TEST_CASE("atomic writes leave no temp files behind") {
  TempDir dir;
  writeTextAtomic(dir / "report.txt", "alpha=1\n");
  CHECK(fs::exists(dir / "report.txt"));
  int files = 0;
  for (const auto& entry : fs::directory_iterator(dir.path)) {
    (void)entry;
    ++files;
  }
  CHECK(files == 1);
}

TEST_CASE("pgm rasters carry the expected header and payload") {
  TempDir dir;
  const std::vector<std::uint8_t> gray = {0, 64, 128, 255, 32, 16};
  writePgm(dir / "img.pgm", 3, 2, gray);
  const auto bytes = slurp(dir / "img.pgm");
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == header.size() + gray.size());
  CHECK(std::equal(header.begin(), header.end(), bytes.begin()));
  CHECK(std::equal(gray.begin(), gray.end(), bytes.begin() + header.size()));
}

TEST_SUITE_END();
