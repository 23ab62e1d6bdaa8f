// Command-line surface: synth | lift | regularize | eval | ablate | pipeline.
// Exit codes: 0 success, 1 usage error, 2 I/O or format error, 3 numerical or
// training failure.

#include <bit>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nrgs/eval.hpp"
#include "nrgs/io.hpp"
#include "nrgs/lifter.hpp"
#include "nrgs/mlp.hpp"
#include "nrgs/projection.hpp"
#include "nrgs/synth.hpp"
#include "nrgs/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace nrgs;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  SynthConfig synth;
  TrainConfig train;
  int mlp_hidden = 256;
  int mlp_blocks = 3;
  bool render_relevance = false;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

NoiseMode parseNoiseMode(const std::string& s) {
  if (s == "swap_class") return NoiseMode::kSwapClass;
  if (s == "blend") return NoiseMode::kBlend;
  if (s == "dropout") return NoiseMode::kDropout;
  throw UsageError("unknown noise_mode '" + s + "'");
}

const char* noiseModeName(NoiseMode m) {
  switch (m) {
    case NoiseMode::kSwapClass: return "swap_class";
    case NoiseMode::kBlend: return "blend";
    case NoiseMode::kDropout: return "dropout";
  }
  return "?";
}

WeightingMode parseWeighting(const std::string& s) {
  if (s == "equal") return WeightingMode::kEqual;
  if (s == "variance") return WeightingMode::kVariance;
  throw UsageError("unknown weighting '" + s + "' (expected equal|variance)");
}

GranularityMode parseGranularityMode(const std::string& s) {
  if (s == "shared") return GranularityMode::kShared;
  if (s == "independent") return GranularityMode::kIndependent;
  throw UsageError("unknown granularity-mode '" + s + "' (expected shared|independent)");
}

void rejectUnknownKeys(const ordered_json& obj, const std::vector<std::string>& known,
                       const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw UsageError("unknown config key '" + where + key + "'");
    (void)value;
  }
}

template <typename T>
void maybeGet(const ordered_json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

RunConfig loadConfig(const std::string& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw IoError(IoErrorKind::kTruncated, "cannot open config " + path);
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(IoErrorKind::kParse, path + ": " + e.what());
  }
  rejectUnknownKeys(doc, {"seed", "threads", "synth", "train", "model", "eval"}, "");
  maybeGet(doc, "seed", cfg.seed);
  maybeGet(doc, "threads", cfg.threads);
  if (doc.contains("synth")) {
    const auto& s = doc["synth"];
    rejectUnknownKeys(s,
                      {"n_gaussians", "n_classes", "parts_per_class",
                       "subparts_per_part", "n_views", "image_width", "image_height",
                       "feature_dim", "noise_rate", "noise_mode", "blob_radius",
                       "camera_radius", "opacity_min", "opacity_max",
                       "splat_scale_min", "splat_scale_max", "position_spread"},
                      "synth.");
    maybeGet(s, "n_gaussians", cfg.synth.n_gaussians);
    maybeGet(s, "n_classes", cfg.synth.n_classes);
    maybeGet(s, "parts_per_class", cfg.synth.parts_per_class);
    maybeGet(s, "subparts_per_part", cfg.synth.subparts_per_part);
    maybeGet(s, "n_views", cfg.synth.n_views);
    maybeGet(s, "image_width", cfg.synth.image_width);
    maybeGet(s, "image_height", cfg.synth.image_height);
    maybeGet(s, "feature_dim", cfg.synth.feature_dim);
    maybeGet(s, "noise_rate", cfg.synth.noise_rate);
    if (s.contains("noise_mode"))
      cfg.synth.noise_mode = parseNoiseMode(s["noise_mode"].get<std::string>());
    maybeGet(s, "blob_radius", cfg.synth.blob_radius);
    maybeGet(s, "camera_radius", cfg.synth.camera_radius);
    maybeGet(s, "opacity_min", cfg.synth.opacity_min);
    maybeGet(s, "opacity_max", cfg.synth.opacity_max);
    maybeGet(s, "splat_scale_min", cfg.synth.splat_scale_min);
    maybeGet(s, "splat_scale_max", cfg.synth.splat_scale_max);
    maybeGet(s, "position_spread", cfg.synth.position_spread);
  }
  if (doc.contains("train")) {
    const auto& t = doc["train"];
    rejectUnknownKeys(t,
                      {"gamma", "lambda_cos", "epsilon", "lr", "batch_size", "epochs",
                       "weighting", "granularity_mode"},
                      "train.");
    maybeGet(t, "gamma", cfg.train.gamma);
    maybeGet(t, "lambda_cos", cfg.train.lambda_cos);
    maybeGet(t, "epsilon", cfg.train.epsilon);
    maybeGet(t, "lr", cfg.train.lr);
    maybeGet(t, "batch_size", cfg.train.batch_size);
    maybeGet(t, "epochs", cfg.train.epochs);
    if (t.contains("weighting"))
      cfg.train.weighting = parseWeighting(t["weighting"].get<std::string>());
    if (t.contains("granularity_mode"))
      cfg.train.granularity_mode =
          parseGranularityMode(t["granularity_mode"].get<std::string>());
  }
  if (doc.contains("model")) {
    const auto& m = doc["model"];
    rejectUnknownKeys(m, {"hidden", "blocks"}, "model.");
    maybeGet(m, "hidden", cfg.mlp_hidden);
    maybeGet(m, "blocks", cfg.mlp_blocks);
  }
  if (doc.contains("eval")) {
    const auto& e = doc["eval"];
    rejectUnknownKeys(e, {"render_relevance"}, "eval.");
    maybeGet(e, "render_relevance", cfg.render_relevance);
  }
  return cfg;
}

ordered_json configJson(const RunConfig& cfg) {
  ordered_json doc;
  doc["seed"] = cfg.seed;
  doc["threads"] = cfg.threads;
  doc["synth"] = {{"n_gaussians", cfg.synth.n_gaussians},
                  {"n_classes", cfg.synth.n_classes},
                  {"parts_per_class", cfg.synth.parts_per_class},
                  {"subparts_per_part", cfg.synth.subparts_per_part},
                  {"n_views", cfg.synth.n_views},
                  {"image_width", cfg.synth.image_width},
                  {"image_height", cfg.synth.image_height},
                  {"feature_dim", cfg.synth.feature_dim},
                  {"noise_rate", cfg.synth.noise_rate},
                  {"noise_mode", noiseModeName(cfg.synth.noise_mode)},
                  {"blob_radius", cfg.synth.blob_radius},
                  {"camera_radius", cfg.synth.camera_radius},
                  {"opacity_min", cfg.synth.opacity_min},
                  {"opacity_max", cfg.synth.opacity_max},
                  {"splat_scale_min", cfg.synth.splat_scale_min},
                  {"splat_scale_max", cfg.synth.splat_scale_max},
                  {"position_spread", cfg.synth.position_spread}};
  doc["train"] = {
      {"gamma", cfg.train.gamma},
      {"lambda_cos", cfg.train.lambda_cos},
      {"epsilon", cfg.train.epsilon},
      {"lr", cfg.train.lr},
      {"batch_size", cfg.train.batch_size},
      {"epochs", cfg.train.epochs},
      {"weighting",
       cfg.train.weighting == WeightingMode::kVariance ? "variance" : "equal"},
      {"granularity_mode",
       cfg.train.granularity_mode == GranularityMode::kShared ? "shared"
                                                              : "independent"}};
  doc["model"] = {{"hidden", cfg.mlp_hidden}, {"blocks", cfg.mlp_blocks}};
  doc["eval"] = {{"render_relevance", cfg.render_relevance}};
  return doc;
}

void echoConfig(const RunConfig& cfg, const fs::path& out_dir) {
  writeTextAtomic(out_dir / "resolved_config.json", configJson(cfg).dump(2) + "\n");
}

struct StageClock {
  using clock = std::chrono::steady_clock;
  clock::time_point start = clock::now();
  double seconds() const {
    return std::chrono::duration<double>(clock::now() - start).count();
  }
};

std::vector<int> viewSubset(const std::string& mode, int n_views) {
  if (mode == "all") {
    std::vector<int> ids(n_views);
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
  }
  if (mode == "even") return trainViewIds(n_views);
  if (mode == "odd") return testViewIds(n_views);
  throw UsageError("unknown view subset '" + mode + "' (expected all|even|odd)");
}

// --- Stage implementations (shared by the subcommands and `pipeline`). ----

void runSynth(const RunConfig& cfg, const fs::path& out, int threads) {
  fs::create_directories(out / "features");
  SynthConfig scfg = cfg.synth;
  scfg.seed = cfg.seed;
  const SynthScene synth = generateScene(scfg);
  writeScenePly(out / "scene.ply", synth.scene);
  writeCameras(out / "cameras.json", synth.cameras);
  writeGroundTruth(out / "ground_truth.json", synth.truth);

  std::vector<ManifestEntry> entries;
  for (int g = 1; g <= 3; ++g) {
    const std::vector<FeatureMap> maps = renderCorruptedFeatureMaps(
        synth.scene, synth.truth, synth.cameras, g, scfg, threads);
    for (const FeatureMap& map : maps) {
      char name[64];
      std::snprintf(name, sizeof(name), "g%d_v%03d.nrgt", g, map.view_id);
      writeFeatureMapTensor(out / "features" / name, map);
      entries.push_back({map.view_id, g, name});
    }
  }
  writeFeatureManifest(out / "features" / "manifest.json", entries);
  echoConfig(cfg, out);
}

void runLift(const fs::path& scene_path, const fs::path& cameras_path,
             const fs::path& manifest_path, const std::string& views,
             const fs::path& out, int threads) {
  fs::create_directories(out);
  const SceneLoadResult loaded = readScenePly(scene_path);
  for (const std::string& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
  const std::vector<Camera> all_cams = readCameras(cameras_path);
  const std::vector<FeatureMap> all_maps = ingestExternalFeatures(manifest_path, all_cams);

  const std::vector<int> subset = viewSubset(views, static_cast<int>(all_cams.size()));
  std::vector<int> remap(all_cams.size(), -1);
  std::vector<Camera> cams;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    remap[subset[i]] = static_cast<int>(i);
    cams.push_back(all_cams[subset[i]]);
  }
  std::vector<FeatureMap> maps;
  for (const FeatureMap& m : all_maps) {
    if (remap[m.view_id] < 0) continue;
    FeatureMap copy = m;
    copy.view_id = remap[m.view_id];
    maps.push_back(std::move(copy));
  }

  for (int g = 1; g <= 3; ++g) {
    const SemanticField field = lift(loaded.scene, cams, maps, g, threads);
    writeField(out / ("lifted_g" + std::to_string(g)), field);
    std::cout << "lifted_valid_fraction_g" << g << "="
              << fmt(std::count(field.valid.begin(), field.valid.end(), 1) /
                     static_cast<double>(std::max(1, field.size())))
              << "\n";
  }
}

void runRegularize(const RunConfig& cfg, const fs::path& scene_path,
                   const fs::path& fields_dir, const fs::path& out) {
  fs::create_directories(out);
  const SceneLoadResult loaded = readScenePly(scene_path);
  std::vector<SemanticField> fields;
  for (int g = 1; g <= 3; ++g)
    fields.push_back(readField(fields_dir / ("lifted_g" + std::to_string(g)), g));

  TrainConfig tcfg = cfg.train;
  tcfg.seed = cfg.seed;
  MlpConfig mcfg;
  mcfg.hidden = cfg.mlp_hidden;
  mcfg.blocks = cfg.mlp_blocks;
  mcfg.out_dim = fields[0].dim();

  const TrainResult result = train(loaded.scene, fields, tcfg, mcfg);

  if (result.models.size() == 1) {
    writeCheckpoint(out / "checkpoint.nrgm", result.models.front());
  } else {
    for (int g = 1; g <= 3; ++g)
      writeCheckpoint(out / ("checkpoint_g" + std::to_string(g) + ".nrgm"),
                      result.models[g - 1]);
  }
  for (int g = 1; g <= 3; ++g) {
    const SemanticField reg =
        regularizeField(result.modelFor(g), loaded.scene, fields[g - 1]);
    writeField(out / ("regularized_g" + std::to_string(g)), reg);
  }

  std::string log;
  for (const EpochLogEntry& e : result.log) {
    ordered_json j;
    j["epoch"] = e.epoch;
    j["mix"] = e.mix;
    j["mean_loss"] = e.mean_loss;
    j["mean_p"] = e.mean_weight;
    j["cosine_skipped"] = e.cosine_skipped;
    log += j.dump() + "\n";
  }
  writeTextAtomic(out / "loss_log.jsonl", log);
  if (!result.log.empty())
    std::cout << "final_mean_loss=" << fmt(result.log.back().mean_loss) << "\n";
  echoConfig(cfg, out);
}

FieldMetrics runEval(const fs::path& scene_path, const fs::path& cameras_path,
                     const fs::path& gt_path, const fs::path& fields_stem,
                     const std::string& views, bool render_relevance,
                     const fs::path& out, int threads) {
  fs::create_directories(out);
  const SceneLoadResult loaded = readScenePly(scene_path);
  const std::vector<Camera> all_cams = readCameras(cameras_path);
  const GroundTruth truth = readGroundTruth(gt_path);

  std::vector<SemanticField> fields;
  for (int g = 1; g <= 3; ++g)
    fields.push_back(readField(fs::path(fields_stem.string() + "_g" + std::to_string(g)),
                               g, /*lifted=*/false));

  const std::vector<int> subset = viewSubset(views, static_cast<int>(all_cams.size()));
  std::vector<Camera> eval_cams;
  for (int v : subset) eval_cams.push_back(all_cams[v]);

  const FieldMetrics metrics =
      evaluateFields(loaded.scene, truth, eval_cams, fields, {}, threads);

  std::vector<std::pair<std::string, std::string>> report;
  report.emplace_back("fields", fields_stem.filename().string());
  report.emplace_back("eval_views", views);
  report.emplace_back("miou_3d", fmt(metrics.miou3d_mean));
  for (int g = 1; g <= 3; ++g)
    report.emplace_back("miou_3d_g" + std::to_string(g), fmt(metrics.miou3d[g - 1]));
  report.emplace_back("miou_2d", fmt(metrics.miou2d_mean));
  report.emplace_back("macc", fmt(metrics.macc));
  report.emplace_back("mean_cos", fmt(metrics.mean_cos));
  for (int g = 1; g <= 3; ++g)
    report.emplace_back("mean_variance_g" + std::to_string(g),
                        fmt(meanVarianceNorm(fields[g - 1])));
  writeKeyValueReport(out / "eval_report.txt", report);

  if (render_relevance) {
    const std::vector<Query> queries = queriesFor(truth, 1);
    for (std::size_t i = 0; i < eval_cams.size(); ++i) {
      for (const Query& q : queries) {
        const Eigen::MatrixXf rel =
            relevanceMap(loaded.scene, eval_cams[i], fields[0], q, threads);
        std::vector<std::uint8_t> gray(rel.size());
        for (int y = 0; y < rel.rows(); ++y)
          for (int x = 0; x < rel.cols(); ++x)
            gray[static_cast<std::size_t>(y) * rel.cols() + x] =
                static_cast<std::uint8_t>(
                    std::lround((rel(y, x) + 1.0f) * 0.5f * 255.0f));
        char name[64];
        std::snprintf(name, sizeof(name), "relevance_v%03d_c%02d.pgm",
                      subset[i], q.label_id);
        writePgm(out / name, static_cast<int>(rel.cols()),
                 static_cast<int>(rel.rows()), gray);
      }
    }
  }
  return metrics;
}

void runAblate(const RunConfig& cfg, const fs::path& out, int threads) {
  fs::create_directories(out);
  SynthConfig scfg = cfg.synth;
  scfg.seed = cfg.seed;
  TrainConfig tcfg = cfg.train;
  tcfg.seed = cfg.seed;
  MlpConfig mcfg;
  mcfg.hidden = cfg.mlp_hidden;
  mcfg.blocks = cfg.mlp_blocks;
  mcfg.out_dim = scfg.feature_dim;

  const SynthScene synth = generateScene(scfg);
  const AblationReport report = ablationGrid(synth, scfg, tcfg, mcfg, threads);

  std::vector<std::pair<std::string, std::string>> lines;
  const auto emit = [&](const AblationRow& row) {
    lines.emplace_back(row.name + ".miou_3d", fmt(row.metrics.miou3d_mean));
    lines.emplace_back(row.name + ".macc", fmt(row.metrics.macc));
    lines.emplace_back(row.name + ".mean_cos", fmt(row.metrics.mean_cos));
  };
  emit(report.baseline);
  for (const AblationRow& row : report.rows) emit(row);
  writeKeyValueReport(out / "ablation_report.txt", lines);
  echoConfig(cfg, out);

  for (const auto& [key, value] : lines) std::cout << key << "=" << value << "\n";
}

int runPipeline(const RunConfig& cfg, const fs::path& out, int threads) {
  StageClock total;
  StageClock clock;
  runSynth(cfg, out, threads);
  const double t_synth = clock.seconds();

  clock = StageClock{};
  runLift(out / "scene.ply", out / "cameras.json", out / "features" / "manifest.json",
          "even", out, threads);
  const double t_lift = clock.seconds();

  clock = StageClock{};
  runRegularize(cfg, out / "scene.ply", out, out);
  const double t_regularize = clock.seconds();

  clock = StageClock{};
  const FieldMetrics metrics =
      runEval(out / "scene.ply", out / "cameras.json", out / "ground_truth.json",
              out / "regularized", "odd", cfg.render_relevance, out, threads);
  const double t_eval = clock.seconds();

  std::cout << "timing_synth_s=" << fmt(t_synth) << "\n"
            << "timing_lift_s=" << fmt(t_lift) << "\n"
            << "timing_regularize_s=" << fmt(t_regularize) << "\n"
            << "timing_eval_s=" << fmt(t_eval) << "\n"
            << "timing_total_s=" << fmt(total.seconds()) << "\n";
  std::cout << "miou_3d=" << fmt(metrics.miou3d_mean) << "\n"
            << "miou_2d=" << fmt(metrics.miou2d_mean) << "\n"
            << "macc=" << fmt(metrics.macc) << "\n"
            << "mean_cos=" << fmt(metrics.mean_cos) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  static_assert(std::endian::native == std::endian::little,
                "file formats assume a little-endian host");

  CLI::App app{"Training-free semantic lifting onto 3D Gaussians with "
               "variance-weighted neural regularization"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", views = "all";
  std::string scene_path, cameras_path, manifest_path, fields_dir, gt_path,
      fields_stem;
  std::optional<std::uint64_t> seed_flag;
  std::optional<double> gamma_flag, lambda_flag, noise_flag;
  std::optional<std::string> weighting_flag, gmode_flag;
  std::optional<int> threads_flag;
  bool render_relevance = false;

  const auto addCommonFlags = [&](CLI::App* cmd, bool with_train, bool with_noise) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed_flag, "global seed override");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--threads", threads_flag, "worker thread cap");
    if (with_noise)
      cmd->add_option("--noise-rate", noise_flag, "corruption rate override");
    if (with_train) {
      cmd->add_option("--gamma", gamma_flag, "variance-weight temperature");
      cmd->add_option("--lambda-cos", lambda_flag, "cosine-loss coefficient");
      cmd->add_option("--weighting", weighting_flag, "equal|variance");
      cmd->add_option("--granularity-mode", gmode_flag, "shared|independent");
    }
  };

  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a benchmark scene");
  addCommonFlags(synth_cmd, false, true);

  CLI::App* lift_cmd = app.add_subcommand("lift", "lift 2D features onto Gaussians");
  addCommonFlags(lift_cmd, false, false);
  lift_cmd->add_option("--scene", scene_path, "scene PLY")->required();
  lift_cmd->add_option("--cameras", cameras_path, "cameras JSON")->required();
  lift_cmd->add_option("--features", manifest_path, "feature manifest JSON")->required();
  lift_cmd->add_option("--views", views, "view subset: all|even|odd");

  CLI::App* reg_cmd = app.add_subcommand("regularize", "train the regularizer");
  addCommonFlags(reg_cmd, true, false);
  reg_cmd->add_option("--scene", scene_path, "scene PLY")->required();
  reg_cmd->add_option("--fields", fields_dir, "directory with lifted_g{1,2,3} fields")
      ->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate fields against ground truth");
  addCommonFlags(eval_cmd, false, false);
  eval_cmd->add_option("--scene", scene_path, "scene PLY")->required();
  eval_cmd->add_option("--cameras", cameras_path, "cameras JSON")->required();
  eval_cmd->add_option("--gt", gt_path, "ground-truth JSON")->required();
  eval_cmd->add_option("--fields", fields_stem, "field stem prefix (adds _g{1,2,3})")
      ->required();
  eval_cmd->add_option("--views", views, "view subset: all|even|odd")
      ->default_val("odd");
  eval_cmd->add_flag("--render-relevance", render_relevance,
                     "write relevance PGM rasters");

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "run the ablation grid");
  addCommonFlags(ablate_cmd, true, true);

  CLI::App* pipe_cmd =
      app.add_subcommand("pipeline", "synth + lift + regularize + eval");
  addCommonFlags(pipe_cmd, true, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    RunConfig cfg = loadConfig(config_path);
    if (seed_flag) cfg.seed = *seed_flag;
    if (threads_flag) cfg.threads = *threads_flag;
    if (noise_flag) cfg.synth.noise_rate = *noise_flag;
    if (gamma_flag) cfg.train.gamma = *gamma_flag;
    if (lambda_flag) cfg.train.lambda_cos = *lambda_flag;
    if (weighting_flag) cfg.train.weighting = parseWeighting(*weighting_flag);
    if (gmode_flag)
      cfg.train.granularity_mode = parseGranularityMode(*gmode_flag);
    if (render_relevance) cfg.render_relevance = true;
    const int threads = std::max(1, cfg.threads);
    const fs::path out(out_dir);

    if (synth_cmd->parsed()) {
      StageClock clock;
      runSynth(cfg, out, threads);
      std::cout << "timing_synth_s=" << fmt(clock.seconds()) << "\n";
    } else if (lift_cmd->parsed()) {
      StageClock clock;
      runLift(scene_path, cameras_path, manifest_path, views, out, threads);
      std::cout << "timing_lift_s=" << fmt(clock.seconds()) << "\n";
    } else if (reg_cmd->parsed()) {
      StageClock clock;
      runRegularize(cfg, scene_path, fields_dir, out);
      std::cout << "timing_regularize_s=" << fmt(clock.seconds()) << "\n";
    } else if (eval_cmd->parsed()) {
      StageClock clock;
      const FieldMetrics metrics = runEval(scene_path, cameras_path, gt_path,
                                           fields_stem, views, cfg.render_relevance,
                                           out, threads);
      std::cout << "timing_eval_s=" << fmt(clock.seconds()) << "\n";
      std::cout << "miou_3d=" << fmt(metrics.miou3d_mean) << "\n"
                << "miou_2d=" << fmt(metrics.miou2d_mean) << "\n"
                << "macc=" << fmt(metrics.macc) << "\n"
                << "mean_cos=" << fmt(metrics.mean_cos) << "\n";
    } else if (ablate_cmd->parsed()) {
      runAblate(cfg, out, threads);
    } else if (pipe_cmd->parsed()) {
      return runPipeline(cfg, out, threads);
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
