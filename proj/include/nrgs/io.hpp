#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrgs/mlp.hpp"
#include "nrgs/synth.hpp"
#include "nrgs/types.hpp"

namespace nrgs {

enum class IoErrorKind {
  kTruncated,
  kBadMagic,
  kBadVersion,
  kCrcMismatch,
  kNonFinite,
  kDimensionMismatch,
  kParse,
  kInvalidValue,
  kMissingEntry,
};

const char* errorKindName(IoErrorKind kind);

inline std::ostream& operator<<(std::ostream& os, IoErrorKind kind) {
  return os << errorKindName(kind);
}

class IoError : public std::runtime_error {
 public:
  IoError(IoErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(errorKindName(kind)) + ": " + message), kind_(kind) {}

  IoErrorKind kind() const { return kind_; }

 private:
  IoErrorKind kind_;
};

/// CRC-32 (IEEE 802.3, reflected polynomial 0xEDB88320).
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Writes bytes to a temp file next to `path` and renames into place, so a
/// reader never observes a half-written artifact.
void writeBytesAtomic(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);
void writeTextAtomic(const std::filesystem::path& path, const std::string& text);

// --- Tensor files ("NRGT": magic, u32 version, u32 rank, rank dims, f32 payload,
// all little-endian, row-major). Rejects non-finite payloads on load.

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t elementCount() const {
    std::size_t n = 1;
    for (std::uint32_t d : dims) n *= d;
    return n;
  }
};

inline constexpr std::uint32_t kTensorVersion = 1;

void writeTensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor readTensor(const std::filesystem::path& path);

void writeFeatureMapTensor(const std::filesystem::path& path, const FeatureMap& map);
FeatureMap readFeatureMapTensor(const std::filesystem::path& path, int view_id,
                                int granularity);

// --- Scene files: binary little-endian PLY with float32 vertex properties
// x,y,z,opacity,rot_0..rot_3,scale_0..scale_2,red,green,blue.

void writeScenePly(const std::filesystem::path& path, const GaussianScene& scene);

struct SceneLoadResult {
  GaussianScene scene;
  /// Convention-mismatch warnings ("opacity outside [0,1] ..."), raised when
  /// values look like another exporter's activation convention. The loader
  /// renormalizes quaternions and clamps offending values.
  std::vector<std::string> warnings;
};

SceneLoadResult readScenePly(const std::filesystem::path& path);

// --- Model checkpoints ("NRGM": magic, version, architecture, seed,
// normalization stats, f32 parameter payload, trailing CRC32 of the payload).

inline constexpr std::uint32_t kCheckpointVersion = 1;

void writeCheckpoint(const std::filesystem::path& path, const Mlp<float>& model);
Mlp<float> readCheckpoint(const std::filesystem::path& path);

// --- Cameras and ground truth as JSON.

void writeCameras(const std::filesystem::path& path, std::span<const Camera> cams);
std::vector<Camera> readCameras(const std::filesystem::path& path);

void writeGroundTruth(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth readGroundTruth(const std::filesystem::path& path);

// --- Semantic fields: four tensors under a shared stem
// (<stem>.features.nrgt, .variance.nrgt, .mass.nrgt, .valid.nrgt).

void writeField(const std::filesystem::path& stem, const SemanticField& field);
SemanticField readField(const std::filesystem::path& stem, int granularity,
                        bool lifted = true);

// --- Feature-map manifests; the ingestion path for externally extracted
// features. Entry paths are resolved relative to the manifest location.

struct ManifestEntry {
  int view_id;
  int granularity;
  std::string path;
};

void writeFeatureManifest(const std::filesystem::path& path,
                          std::span<const ManifestEntry> entries);
std::vector<ManifestEntry> readFeatureManifest(const std::filesystem::path& path);

/// Loads and validates every manifest entry: one shared feature dimension,
/// view ids matching the camera list, image sizes matching each camera, and
/// complete (view, granularity) coverage over the granularities present.
std::vector<FeatureMap> ingestExternalFeatures(const std::filesystem::path& manifest_path,
                                               std::span<const Camera> cams);

// --- Rasters and reports.

void writePgm(const std::filesystem::path& path, int width, int height,
              std::span<const std::uint8_t> gray);

void writeKeyValueReport(const std::filesystem::path& path,
                         std::span<const std::pair<std::string, std::string>> entries);

}  // namespace nrgs
