#include "nrgs/io.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace nrgs {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

const char* errorKindName(IoErrorKind kind) {
  switch (kind) {
    case IoErrorKind::kTruncated: return "truncated file";
    case IoErrorKind::kBadMagic: return "magic mismatch";
    case IoErrorKind::kBadVersion: return "version mismatch";
    case IoErrorKind::kCrcMismatch: return "crc mismatch";
    case IoErrorKind::kNonFinite: return "non-finite value";
    case IoErrorKind::kDimensionMismatch: return "dimension mismatch";
    case IoErrorKind::kParse: return "parse error";
    case IoErrorKind::kInvalidValue: return "invalid value";
    case IoErrorKind::kMissingEntry: return "missing entry";
  }
  return "unknown";
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::uint8_t b : bytes) crc = table[(crc ^ b) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

void writeBytesAtomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::kParse, "cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(IoErrorKind::kParse, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

void writeTextAtomic(const fs::path& path, const std::string& text) {
  writeBytesAtomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()),
                          text.size()});
}

namespace {

// All on-disk integers and floats are little-endian; these helpers assume a
// little-endian host (checked at startup in the CLI, and true for every
// supported target).

template <typename T>
void appendRaw(std::vector<std::uint8_t>& buf, const T& value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  buf.insert(buf.end(), p, p + sizeof(T));
}

void appendBytes(std::vector<std::uint8_t>& buf, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  buf.insert(buf.end(), p, p + n);
}

class ByteReader {
 public:
  ByteReader(const fs::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrorKind::kTruncated, "cannot open " + path_);
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  template <typename T>
  T read() {
    if (pos_ + sizeof(T) > bytes_.size())
      throw IoError(IoErrorKind::kTruncated, path_ + " ends inside a record");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  void readInto(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size())
      throw IoError(IoErrorKind::kTruncated, path_ + " ends inside the payload");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::span<const std::uint8_t> view(std::size_t n) {
    if (pos_ + n > bytes_.size())
      throw IoError(IoErrorKind::kTruncated, path_ + " ends inside the payload");
    std::span<const std::uint8_t> s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void expectMagic(const char (&magic)[5]) {
    if (pos_ + 4 > bytes_.size())
      throw IoError(IoErrorKind::kTruncated, path_ + " shorter than its magic");
    if (std::memcmp(bytes_.data() + pos_, magic, 4) != 0)
      throw IoError(IoErrorKind::kBadMagic, path_ + " is not a " + magic + " file");
    pos_ += 4;
  }

  void expectEnd() {
    if (pos_ != bytes_.size())
      throw IoError(IoErrorKind::kParse, path_ + " has trailing bytes");
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void writeTensor(const fs::path& path, const Tensor& tensor) {
  if (tensor.data.size() != tensor.elementCount())
    throw IoError(IoErrorKind::kDimensionMismatch,
                  "tensor payload does not match its dims");
  std::vector<std::uint8_t> buf;
  buf.reserve(16 + 4 * tensor.dims.size() + 4 * tensor.data.size());
  appendBytes(buf, "NRGT", 4);
  appendRaw(buf, kTensorVersion);
  appendRaw(buf, static_cast<std::uint32_t>(tensor.dims.size()));
  for (std::uint32_t d : tensor.dims) appendRaw(buf, d);
  appendBytes(buf, tensor.data.data(), 4 * tensor.data.size());
  writeBytesAtomic(path, buf);
}

Tensor readTensor(const fs::path& path) {
  ByteReader reader(path);
  reader.expectMagic("NRGT");
  const auto version = reader.read<std::uint32_t>();
  if (version != kTensorVersion)
    throw IoError(IoErrorKind::kBadVersion,
                  path.string() + " has tensor version " + std::to_string(version));
  const auto rank = reader.read<std::uint32_t>();
  if (rank > 8)
    throw IoError(IoErrorKind::kParse, path.string() + " has implausible rank");
  Tensor tensor;
  tensor.dims.resize(rank);
  std::size_t count = 1;
  for (std::uint32_t r = 0; r < rank; ++r) {
    tensor.dims[r] = reader.read<std::uint32_t>();
    count *= tensor.dims[r];
  }
  if (reader.remaining() != 4 * count)
    throw IoError(IoErrorKind::kTruncated,
                  path.string() + " payload size does not match its dims");
  tensor.data.resize(count);
  reader.readInto(tensor.data.data(), 4 * count);
  reader.expectEnd();
  for (float v : tensor.data)
    if (!std::isfinite(v))
      throw IoError(IoErrorKind::kNonFinite, path.string() + " payload");
  return tensor;
}

void writeFeatureMapTensor(const fs::path& path, const FeatureMap& map) {
  Tensor tensor;
  tensor.dims = {static_cast<std::uint32_t>(map.height),
                 static_cast<std::uint32_t>(map.width),
                 static_cast<std::uint32_t>(map.dim())};
  tensor.data.assign(map.data.data(), map.data.data() + map.data.size());
  writeTensor(path, tensor);
}

FeatureMap readFeatureMapTensor(const fs::path& path, int view_id, int granularity) {
  const Tensor tensor = readTensor(path);
  if (tensor.dims.size() != 3)
    throw IoError(IoErrorKind::kDimensionMismatch,
                  path.string() + " is not a rank-3 feature map");
  FeatureMap map;
  map.view_id = view_id;
  map.granularity = granularity;
  map.height = static_cast<int>(tensor.dims[0]);
  map.width = static_cast<int>(tensor.dims[1]);
  const int dim = static_cast<int>(tensor.dims[2]);
  map.data.resize(static_cast<Eigen::Index>(map.height) * map.width, dim);
  std::memcpy(map.data.data(), tensor.data.data(), 4 * tensor.data.size());
  return map;
}

// --- PLY scenes ------------------------------------------------------------

namespace {

constexpr const char* kPlyProps[14] = {
    "x",       "y",       "z",       "opacity", "rot_0",   "rot_1",  "rot_2",
    "rot_3",   "scale_0", "scale_1", "scale_2", "red",     "green",  "blue"};

}  // namespace

void writeScenePly(const fs::path& path, const GaussianScene& scene) {
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\n"
         << "element vertex " << scene.size() << "\n";
  for (const char* prop : kPlyProps) header << "property float " << prop << "\n";
  header << "end_header\n";

  std::vector<std::uint8_t> buf;
  const std::string h = header.str();
  buf.reserve(h.size() + scene.gaussians.size() * 14 * 4);
  appendBytes(buf, h.data(), h.size());
  for (const Gaussian& g : scene.gaussians) {
    const float row[14] = {
        static_cast<float>(g.mu.x()),    static_cast<float>(g.mu.y()),
        static_cast<float>(g.mu.z()),    static_cast<float>(g.opacity),
        static_cast<float>(g.quat.w()),  static_cast<float>(g.quat.x()),
        static_cast<float>(g.quat.y()),  static_cast<float>(g.quat.z()),
        static_cast<float>(g.scale.x()), static_cast<float>(g.scale.y()),
        static_cast<float>(g.scale.z()), static_cast<float>(g.rgb.x()),
        static_cast<float>(g.rgb.y()),   static_cast<float>(g.rgb.z())};
    appendBytes(buf, row, sizeof(row));
  }
  writeBytesAtomic(path, buf);
}

namespace {

struct PlyHeader {
  std::size_t vertex_count = 0;
  std::vector<std::string> properties;  // in file order, all float32
  std::size_t header_bytes = 0;
};

PlyHeader parsePlyHeader(const std::vector<char>& bytes, const std::string& path) {
  // Find the end of the header first; the body is binary.
  const std::string needle = "end_header\n";
  const auto it = std::search(bytes.begin(), bytes.end(), needle.begin(), needle.end());
  if (it == bytes.end())
    throw IoError(IoErrorKind::kTruncated, path + " has no end_header");
  PlyHeader header;
  header.header_bytes = static_cast<std::size_t>(it - bytes.begin()) + needle.size();

  std::istringstream in(std::string(bytes.begin(), it + needle.size()));
  std::string line;
  std::getline(in, line);
  if (line != "ply") throw IoError(IoErrorKind::kBadMagic, path + " is not a PLY file");
  bool in_vertex = false;
  bool format_seen = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment" || word.empty()) continue;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian")
        throw IoError(IoErrorKind::kParse, path + " must be binary_little_endian");
      format_seen = true;
    } else if (word == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (name != "vertex")
        throw IoError(IoErrorKind::kParse, path + " has unsupported element " + name);
      if (in_vertex)
        throw IoError(IoErrorKind::kParse, path + " has multiple vertex elements");
      in_vertex = true;
      header.vertex_count = count;
    } else if (word == "property") {
      if (!in_vertex)
        throw IoError(IoErrorKind::kParse, path + " property outside vertex element");
      std::string type, name;
      ls >> type >> name;
      if (type != "float" && type != "float32")
        throw IoError(IoErrorKind::kParse,
                      path + " property " + name + " is not float32");
      header.properties.push_back(name);
    } else if (word == "end_header") {
      break;
    } else {
      throw IoError(IoErrorKind::kParse, path + " unexpected header token " + word);
    }
  }
  if (!format_seen) throw IoError(IoErrorKind::kParse, path + " missing format line");
  return header;
}

}  // namespace

SceneLoadResult readScenePly(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrorKind::kTruncated, "cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  const PlyHeader header = parsePlyHeader(bytes, path.string());

  std::map<std::string, std::size_t> offset;
  for (std::size_t p = 0; p < header.properties.size(); ++p)
    offset[header.properties[p]] = p;
  for (const char* prop : kPlyProps)
    if (!offset.count(prop))
      throw IoError(IoErrorKind::kMissingEntry,
                    path.string() + " lacks property " + prop);

  const std::size_t stride = 4 * header.properties.size();
  if (bytes.size() - header.header_bytes != stride * header.vertex_count)
    throw IoError(IoErrorKind::kTruncated,
                  path.string() + " body does not match vertex count");

  SceneLoadResult result;
  std::set<std::string> warned;
  const auto warn = [&](const std::string& prop, const std::string& what) {
    if (warned.insert(prop).second)
      result.warnings.push_back("convention mismatch on property " + prop + ": " + what);
  };

  std::vector<Gaussian> gaussians(header.vertex_count);
  const char* body = bytes.data() + header.header_bytes;
  for (std::size_t i = 0; i < header.vertex_count; ++i) {
    float v[14];
    for (int p = 0; p < 14; ++p) {
      std::memcpy(&v[p], body + i * stride + 4 * offset[kPlyProps[p]], 4);
      if (!std::isfinite(v[p]))
        throw IoError(IoErrorKind::kNonFinite, path.string() + " vertex " +
                                                   std::to_string(i) + " property " +
                                                   kPlyProps[p]);
    }
    Gaussian& g = gaussians[i];
    g.mu = Vec3(v[0], v[1], v[2]);
    g.opacity = v[3];
    if (g.opacity < 0.0 || g.opacity > 1.0) {
      warn("opacity", "outside [0,1]; expected post-activation opacity");
      g.opacity = std::clamp(g.opacity, 0.0, 1.0);
    }
    Quat q(v[4], v[5], v[6], v[7]);
    const double qn = q.norm();
    if (qn < 1e-12)
      throw IoError(IoErrorKind::kInvalidValue, path.string() + " vertex " +
                                                    std::to_string(i) +
                                                    " has a zero quaternion");
    // Renormalize only when outside the invariant tolerance; touching
    // already-unit quaternions would break byte-identical round trips.
    g.quat = std::abs(qn - 1.0) > 1e-6 ? Quat(q.coeffs() / qn) : q;
    g.scale = Vec3(v[8], v[9], v[10]);
    if ((g.scale.array() <= 0.0).any())
      warn("scale", "non-positive; expected linear standard deviations");
    g.scale = g.scale.cwiseMax(1e-6);
    g.rgb = Vec3(v[11], v[12], v[13]);
    for (int c = 0; c < 3; ++c) {
      if (g.rgb[c] < 0.0 || g.rgb[c] > 1.0)
        warn(kPlyProps[11 + c], "outside [0,1]; expected normalized color");
    }
    g.rgb = g.rgb.cwiseMax(0.0).cwiseMin(1.0);
  }
  result.scene = makeScene(std::move(gaussians));
  return result;
}

// --- Checkpoints -----------------------------------------------------------

void writeCheckpoint(const fs::path& path, const Mlp<float>& model) {
  const MlpConfig& c = model.config;
  if (model.params.size() != c.paramCount())
    throw IoError(IoErrorKind::kDimensionMismatch,
                  "model parameter count does not match its config");
  std::vector<std::uint8_t> buf;
  appendBytes(buf, "NRGM", 4);
  appendRaw(buf, kCheckpointVersion);
  appendRaw(buf, static_cast<std::uint32_t>(c.in_dim));
  appendRaw(buf, static_cast<std::uint32_t>(c.hidden));
  appendRaw(buf, static_cast<std::uint32_t>(c.blocks));
  appendRaw(buf, static_cast<std::uint32_t>(c.out_dim));
  appendRaw(buf, static_cast<std::uint64_t>(model.seed));
  // Normalization stats stay f64: they feed the input encoding, and forward
  // passes must be bitwise identical across a save/load cycle.
  for (int i = 0; i < kInputDim; ++i) appendRaw(buf, model.stats.shift[i]);
  for (int i = 0; i < kInputDim; ++i) appendRaw(buf, model.stats.scale[i]);
  appendRaw(buf, static_cast<std::uint64_t>(model.params.size()));
  const std::size_t payload_start = buf.size();
  appendBytes(buf, model.params.data(), 4 * model.params.size());
  const std::uint32_t crc =
      crc32({buf.data() + payload_start, buf.size() - payload_start});
  appendRaw(buf, crc);
  writeBytesAtomic(path, buf);
}

Mlp<float> readCheckpoint(const fs::path& path) {
  ByteReader reader(path);
  reader.expectMagic("NRGM");
  const auto version = reader.read<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw IoError(IoErrorKind::kBadVersion, path.string() + " has checkpoint version " +
                                                std::to_string(version));
  Mlp<float> model;
  model.config.in_dim = static_cast<int>(reader.read<std::uint32_t>());
  model.config.hidden = static_cast<int>(reader.read<std::uint32_t>());
  model.config.blocks = static_cast<int>(reader.read<std::uint32_t>());
  model.config.out_dim = static_cast<int>(reader.read<std::uint32_t>());
  model.seed = reader.read<std::uint64_t>();
  if (model.config.in_dim != kInputDim)
    throw IoError(IoErrorKind::kDimensionMismatch,
                  path.string() + " input width is not " + std::to_string(kInputDim));
  for (int i = 0; i < kInputDim; ++i) model.stats.shift[i] = reader.read<double>();
  for (int i = 0; i < kInputDim; ++i) {
    model.stats.scale[i] = reader.read<double>();
    if (!(model.stats.scale[i] > 0.0))
      throw IoError(IoErrorKind::kInvalidValue,
                    path.string() + " normalization scale must be positive");
  }
  const auto count = reader.read<std::uint64_t>();
  if (count != static_cast<std::uint64_t>(model.config.paramCount()))
    throw IoError(IoErrorKind::kDimensionMismatch,
                  path.string() + " parameter count does not match its config");
  const auto payload = reader.view(4 * count);
  const auto stored_crc = reader.read<std::uint32_t>();
  reader.expectEnd();
  if (crc32(payload) != stored_crc)
    throw IoError(IoErrorKind::kCrcMismatch, path.string() + " parameter payload");
  model.params.resize(static_cast<Eigen::Index>(count));
  std::memcpy(model.params.data(), payload.data(), payload.size());
  if (!model.params.allFinite())
    throw IoError(IoErrorKind::kNonFinite, path.string() + " parameters");
  return model;
}

// --- Cameras ---------------------------------------------------------------

namespace {

ordered_json loadJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrorKind::kTruncated, "cannot open " + path.string());
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(IoErrorKind::kParse, path.string() + ": " + e.what());
  }
}

}  // namespace

void writeCameras(const fs::path& path, std::span<const Camera> cams) {
  ordered_json doc;
  doc["cameras"] = ordered_json::array();
  for (const Camera& cam : cams) {
    ordered_json j;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    j["znear"] = cam.znear;
    ordered_json rows = ordered_json::array();
    for (int r = 0; r < 3; ++r)
      rows.push_back({cam.world_to_cam_rot(r, 0), cam.world_to_cam_rot(r, 1),
                      cam.world_to_cam_rot(r, 2), cam.world_to_cam_trans[r]});
    j["world_to_cam"] = rows;
    doc["cameras"].push_back(j);
  }
  writeTextAtomic(path, doc.dump(2) + "\n");
}

std::vector<Camera> readCameras(const fs::path& path) {
  const ordered_json doc = loadJson(path);
  if (!doc.contains("cameras") || !doc["cameras"].is_array())
    throw IoError(IoErrorKind::kParse, path.string() + " lacks a cameras array");
  std::vector<Camera> cams;
  for (const auto& j : doc["cameras"]) {
    try {
      Camera cam;
      cam.fx = j.at("fx").get<double>();
      cam.fy = j.at("fy").get<double>();
      cam.cx = j.at("cx").get<double>();
      cam.cy = j.at("cy").get<double>();
      cam.width = j.at("width").get<int>();
      cam.height = j.at("height").get<int>();
      cam.znear = j.at("znear").get<double>();
      const auto& rows = j.at("world_to_cam");
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c)
          cam.world_to_cam_rot(r, c) = rows.at(r).at(c).get<double>();
        cam.world_to_cam_trans[r] = rows.at(r).at(3).get<double>();
      }
      cams.push_back(cam);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(IoErrorKind::kParse, path.string() + ": " + e.what());
    }
  }
  for (std::size_t v = 0; v < cams.size(); ++v) {
    const auto issues = validateCamera(cams[v]);
    if (!issues.empty())
      throw IoError(IoErrorKind::kInvalidValue, path.string() + " camera " +
                                                    std::to_string(v) + ": " +
                                                    issues.front());
  }
  return cams;
}

// --- Ground truth ----------------------------------------------------------

void writeGroundTruth(const fs::path& path, const GroundTruth& truth) {
  ordered_json doc;
  ordered_json labels = ordered_json::array();
  for (Eigen::Index i = 0; i < truth.labels.rows(); ++i)
    labels.push_back({truth.labels(i, 0), truth.labels(i, 1), truth.labels(i, 2)});
  doc["labels"] = std::move(labels);
  doc["part_to_whole"] = truth.part_to_whole;
  doc["subpart_to_part"] = truth.subpart_to_part;
  ordered_json protos;
  for (int g = 1; g <= 3; ++g) {
    ordered_json rows = ordered_json::array();
    const RowMatrixXf& p = truth.prototypes[g - 1];
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      ordered_json row = ordered_json::array();
      for (Eigen::Index c = 0; c < p.cols(); ++c) row.push_back(p(r, c));
      rows.push_back(std::move(row));
    }
    protos["g" + std::to_string(g)] = std::move(rows);
  }
  doc["prototypes"] = std::move(protos);
  writeTextAtomic(path, doc.dump() + "\n");
}

GroundTruth readGroundTruth(const fs::path& path) {
  const ordered_json doc = loadJson(path);
  GroundTruth truth;
  try {
    const auto& labels = doc.at("labels");
    truth.labels.resize(labels.size(), 3);
    for (std::size_t i = 0; i < labels.size(); ++i)
      for (int g = 0; g < 3; ++g) truth.labels(i, g) = labels.at(i).at(g).get<int>();
    truth.part_to_whole = doc.at("part_to_whole").get<std::vector<int>>();
    truth.subpart_to_part = doc.at("subpart_to_part").get<std::vector<int>>();
    for (int g = 1; g <= 3; ++g) {
      const auto& rows = doc.at("prototypes").at("g" + std::to_string(g));
      if (rows.empty())
        throw IoError(IoErrorKind::kMissingEntry,
                      path.string() + " has no prototypes at granularity " +
                          std::to_string(g));
      RowMatrixXf p(rows.size(), rows.at(0).size());
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows.at(r).size(); ++c)
          p(r, c) = rows.at(r).at(c).get<float>();
      truth.prototypes[g - 1] = std::move(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(IoErrorKind::kParse, path.string() + ": " + e.what());
  }
  return truth;
}

// --- Fields ----------------------------------------------------------------

namespace {

fs::path fieldPart(const fs::path& stem, const char* part) {
  return fs::path(stem.string() + part);
}

}  // namespace

void writeField(const fs::path& stem, const SemanticField& field) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(field.size()),
            static_cast<std::uint32_t>(field.dim())};
  t.data.assign(field.features.data(), field.features.data() + field.features.size());
  writeTensor(fieldPart(stem, ".features.nrgt"), t);
  t.data.assign(field.variance.data(), field.variance.data() + field.variance.size());
  writeTensor(fieldPart(stem, ".variance.nrgt"), t);
  t.dims = {static_cast<std::uint32_t>(field.size())};
  t.data.assign(field.weight_mass.data(), field.weight_mass.data() + field.size());
  writeTensor(fieldPart(stem, ".mass.nrgt"), t);
  t.data.assign(field.valid.begin(), field.valid.end());
  writeTensor(fieldPart(stem, ".valid.nrgt"), t);
}

SemanticField readField(const fs::path& stem, int granularity, bool lifted) {
  const Tensor features = readTensor(fieldPart(stem, ".features.nrgt"));
  const Tensor variance = readTensor(fieldPart(stem, ".variance.nrgt"));
  const Tensor mass = readTensor(fieldPart(stem, ".mass.nrgt"));
  const Tensor valid = readTensor(fieldPart(stem, ".valid.nrgt"));
  if (features.dims.size() != 2 || variance.dims != features.dims ||
      mass.dims.size() != 1 || mass.dims[0] != features.dims[0] ||
      valid.dims != mass.dims)
    throw IoError(IoErrorKind::kDimensionMismatch,
                  stem.string() + " field tensors disagree on shape");
  SemanticField field;
  field.granularity = granularity;
  const int n = static_cast<int>(features.dims[0]);
  const int dim = static_cast<int>(features.dims[1]);
  field.features.resize(n, dim);
  std::memcpy(field.features.data(), features.data.data(), 4 * features.data.size());
  field.variance.resize(n, dim);
  std::memcpy(field.variance.data(), variance.data.data(), 4 * variance.data.size());
  field.weight_mass.resize(n);
  std::memcpy(field.weight_mass.data(), mass.data.data(), 4 * mass.data.size());
  field.valid.resize(n);
  for (int i = 0; i < n; ++i) {
    if (valid.data[i] != 0.0f && valid.data[i] != 1.0f)
      throw IoError(IoErrorKind::kInvalidValue,
                    stem.string() + " validity mask must be 0/1");
    field.valid[i] = valid.data[i] != 0.0f;
  }
  const auto issues = validateField(field, n, lifted);
  if (!issues.empty())
    throw IoError(IoErrorKind::kInvalidValue, stem.string() + ": " + issues.front());
  return field;
}

// --- Manifests -------------------------------------------------------------

void writeFeatureManifest(const fs::path& path, std::span<const ManifestEntry> entries) {
  ordered_json doc;
  doc["features"] = ordered_json::array();
  for (const ManifestEntry& e : entries) {
    ordered_json j;
    j["view_id"] = e.view_id;
    j["granularity"] = e.granularity;
    j["path"] = e.path;
    doc["features"].push_back(j);
  }
  writeTextAtomic(path, doc.dump(2) + "\n");
}

std::vector<ManifestEntry> readFeatureManifest(const fs::path& path) {
  const ordered_json doc = loadJson(path);
  if (!doc.contains("features") || !doc["features"].is_array())
    throw IoError(IoErrorKind::kParse, path.string() + " lacks a features array");
  std::vector<ManifestEntry> entries;
  try {
    for (const auto& j : doc["features"])
      entries.push_back({j.at("view_id").get<int>(), j.at("granularity").get<int>(),
                         j.at("path").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw IoError(IoErrorKind::kParse, path.string() + ": " + e.what());
  }
  return entries;
}

std::vector<FeatureMap> ingestExternalFeatures(const fs::path& manifest_path,
                                               std::span<const Camera> cams) {
  const std::vector<ManifestEntry> entries = readFeatureManifest(manifest_path);
  const fs::path base = manifest_path.parent_path();
  std::vector<FeatureMap> maps;
  std::set<std::pair<int, int>> seen;
  std::set<int> granularities;
  int dim = -1;
  for (const ManifestEntry& e : entries) {
    if (e.granularity < 1 || e.granularity > 3)
      throw IoError(IoErrorKind::kInvalidValue,
                    e.path + " has granularity outside {1,2,3}");
    if (e.view_id < 0 || e.view_id >= static_cast<int>(cams.size()))
      throw IoError(IoErrorKind::kInvalidValue,
                    e.path + " names view " + std::to_string(e.view_id) +
                        " with no matching camera");
    if (!seen.insert({e.view_id, e.granularity}).second)
      throw IoError(IoErrorKind::kInvalidValue,
                    e.path + " duplicates a (view, granularity) pair");
    FeatureMap map = readFeatureMapTensor(base / e.path, e.view_id, e.granularity);
    if (dim < 0) dim = map.dim();
    if (map.dim() != dim)
      throw IoError(IoErrorKind::kDimensionMismatch,
                    e.path + " has feature dimension " + std::to_string(map.dim()) +
                        ", expected " + std::to_string(dim));
    const Camera& cam = cams[e.view_id];
    if (map.width != cam.width || map.height != cam.height)
      throw IoError(IoErrorKind::kDimensionMismatch,
                    e.path + " image size does not match camera " +
                        std::to_string(e.view_id));
    granularities.insert(e.granularity);
    maps.push_back(std::move(map));
  }
  // Every present granularity must cover every camera.
  std::string missing;
  for (int g : granularities)
    for (std::size_t v = 0; v < cams.size(); ++v)
      if (!seen.count({static_cast<int>(v), g}))
        missing += " (view " + std::to_string(v) + ", g" + std::to_string(g) + ")";
  if (!missing.empty())
    throw IoError(IoErrorKind::kMissingEntry,
                  manifest_path.string() + " lacks feature maps for:" + missing);
  return maps;
}

// --- Rasters and reports ---------------------------------------------------

void writePgm(const fs::path& path, int width, int height,
              std::span<const std::uint8_t> gray) {
  if (gray.size() != static_cast<std::size_t>(width) * height)
    throw IoError(IoErrorKind::kDimensionMismatch, "pgm payload size mismatch");
  std::ostringstream header;
  header << "P5\n" << width << " " << height << "\n255\n";
  std::vector<std::uint8_t> buf;
  const std::string h = header.str();
  buf.reserve(h.size() + gray.size());
  appendBytes(buf, h.data(), h.size());
  buf.insert(buf.end(), gray.begin(), gray.end());
  writeBytesAtomic(path, buf);
}

void writeKeyValueReport(const fs::path& path,
                         std::span<const std::pair<std::string, std::string>> entries) {
  std::ostringstream out;
  for (const auto& [key, value] : entries) out << key << "=" << value << "\n";
  writeTextAtomic(path, out.str());
}

}  // namespace nrgs
