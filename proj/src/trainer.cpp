#include "nrgs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nrgs {

Eigen::VectorXd varianceWeights(const SemanticField& field, double gamma, double epsilon) {
  const int n = field.size();
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (int i = 0; i < n; ++i) {
    if (!field.valid[i]) continue;
    v[i] = field.variance.row(i).cast<double>().norm();
    vmin = std::min(vmin, v[i]);
    vmax = std::max(vmax, v[i]);
    any = true;
  }
  if (!any) return p;
  for (int i = 0; i < n; ++i) {
    if (!field.valid[i]) continue;
    const double vt = (v[i] - vmin) / (vmax - vmin + epsilon);
    p[i] = std::exp(-gamma * vt);
  }
  return p;
}

namespace {

struct SampleSet {
  BatchMatrix<float> inputs;    // S x 15
  BatchMatrix<float> targets;   // S x D
  Eigen::VectorXf weights;      // S, in (0,1]
};

SampleSet buildSamples(const GaussianScene& scene, const SemanticField& field,
                       const NormStats& stats, const TrainConfig& tcfg) {
  Eigen::VectorXd p_full;
  if (tcfg.weighting == WeightingMode::kVariance)
    p_full = varianceWeights(field, tcfg.gamma, tcfg.epsilon);

  std::vector<int> rows;
  for (int i = 0; i < field.size(); ++i)
    if (field.valid[i]) rows.push_back(i);
  if (rows.empty())
    throw TrainingError("no valid training samples at granularity " +
                        std::to_string(field.granularity));

  const BatchMatrix<float> all_inputs =
      encodeBatch<float>(scene, field.granularity, stats);
  SampleSet s;
  s.inputs.resize(rows.size(), kInputDim);
  s.targets.resize(rows.size(), field.dim());
  s.weights.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    s.inputs.row(r) = all_inputs.row(rows[r]);
    s.targets.row(r) = field.features.row(rows[r]);
    s.weights[r] = tcfg.weighting == WeightingMode::kVariance
                       ? static_cast<float>(p_full[rows[r]])
                       : 1.0f;
  }
  return s;
}

void appendSet(SampleSet& dst, const SampleSet& src) {
  if (dst.inputs.rows() == 0) {
    dst = src;
    return;
  }
  const Eigen::Index n = dst.inputs.rows(), m = src.inputs.rows();
  dst.inputs.conservativeResize(n + m, Eigen::NoChange);
  dst.targets.conservativeResize(n + m, Eigen::NoChange);
  dst.weights.conservativeResize(n + m);
  dst.inputs.bottomRows(m) = src.inputs;
  dst.targets.bottomRows(m) = src.targets;
  dst.weights.tail(m) = src.weights;
}

void runTraining(Mlp<float>& model, const SampleSet& samples, const TrainConfig& tcfg,
                 int model_tag, const std::string& mix, std::vector<EpochLogEntry>& log) {
  const Eigen::Index count = samples.inputs.rows();
  const int dim = static_cast<int>(samples.targets.cols());
  const Eigen::Index batch_size = std::min<Eigen::Index>(tcfg.batch_size, count);
  AdamOptimizer<float> adam(model.params.size(), tcfg.lr);
  std::vector<Eigen::Index> perm(count);
  std::iota(perm.begin(), perm.end(), Eigen::Index(0));
  const double mean_weight = samples.weights.cast<double>().mean();

  BatchMatrix<float> x_batch, t_batch;
  Eigen::VectorXf p_batch;
  ForwardContext<float> ctx;
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    Rng rng(Rng::deriveSeed(tcfg.seed,
                            (static_cast<std::uint64_t>(model_tag) << 32) | epoch));
    for (Eigen::Index i = count - 1; i > 0; --i) {
      const Eigen::Index j = rng.uniformInt(static_cast<int>(i + 1));
      std::swap(perm[i], perm[j]);
    }
    double epoch_loss = 0.0;
    int skipped = 0;
    for (Eigen::Index start = 0; start < count; start += batch_size) {
      const Eigen::Index b = std::min(batch_size, count - start);
      x_batch.resize(b, kInputDim);
      t_batch.resize(b, dim);
      p_batch.resize(b);
      for (Eigen::Index r = 0; r < b; ++r) {
        x_batch.row(r) = samples.inputs.row(perm[start + r]);
        t_batch.row(r) = samples.targets.row(perm[start + r]);
        p_batch[r] = samples.weights[perm[start + r]];
      }
      const BatchMatrix<float> preds = forward<float>(model, x_batch, &ctx);
      const LossValue<float> value =
          lossWeighted<float>(t_batch, preds, p_batch, tcfg.lambda_cos);
      const Eigen::VectorXf grad = backward<float>(model, ctx, value.grad);
      adam.step(model.params, grad);
      epoch_loss += value.loss * static_cast<double>(b);
      skipped += value.cosine_skipped;
    }
    epoch_loss /= static_cast<double>(count);
    if (!std::isfinite(epoch_loss))
      throw TrainingError("training loss diverged at epoch " + std::to_string(epoch));
    log.push_back({epoch, mix, epoch_loss, mean_weight, skipped});
  }
}

}  // namespace

TrainResult train(const GaussianScene& scene, std::span<const SemanticField> fields,
                  const TrainConfig& tcfg, const MlpConfig& mcfg) {
  const SemanticField* by_g[3] = {nullptr, nullptr, nullptr};
  for (const SemanticField& f : fields) {
    if (f.granularity < 1 || f.granularity > 3)
      throw std::invalid_argument("field granularity out of range");
    by_g[f.granularity - 1] = &f;
  }
  for (int g = 0; g < 3; ++g)
    if (!by_g[g])
      throw std::invalid_argument("missing field for granularity " + std::to_string(g + 1));
  const int dim = by_g[0]->dim();
  if (by_g[1]->dim() != dim || by_g[2]->dim() != dim)
    throw std::invalid_argument("fields disagree on feature dimension");
  if (mcfg.out_dim != dim)
    throw std::invalid_argument("mlp out_dim does not match field dimension");

  const NormStats stats = computeNormStats(scene);
  TrainResult result;
  if (tcfg.granularity_mode == GranularityMode::kShared) {
    SampleSet all;
    for (int g = 1; g <= 3; ++g)
      appendSet(all, buildSamples(scene, *by_g[g - 1], stats, tcfg));
    Mlp<float> model = initMlp<float>(mcfg, stats, tcfg.seed);
    runTraining(model, all, tcfg, 0, "shared", result.log);
    result.models.push_back(std::move(model));
  } else {
    for (int g = 1; g <= 3; ++g) {
      const SampleSet s = buildSamples(scene, *by_g[g - 1], stats, tcfg);
      Mlp<float> model = initMlp<float>(mcfg, stats, Rng::deriveSeed(tcfg.seed, g));
      runTraining(model, s, tcfg, g, "g" + std::to_string(g), result.log);
      result.models.push_back(std::move(model));
    }
  }
  return result;
}

SemanticField regularizeField(const Mlp<float>& model, const GaussianScene& scene,
                              const SemanticField& lifted) {
  const int n = scene.size();
  const int dim = model.config.out_dim;
  SemanticField out;
  out.granularity = lifted.granularity;
  out.features.resize(n, dim);
  out.variance = RowMatrixXf::Zero(n, dim);
  out.weight_mass = lifted.weight_mass;
  out.valid.assign(n, 1);

  const BatchMatrix<float> inputs =
      encodeBatch<float>(scene, lifted.granularity, model.stats);
  constexpr Eigen::Index kChunk = 8192;
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index b = std::min<Eigen::Index>(kChunk, n - start);
    out.features.middleRows(start, b) =
        forward<float>(model, inputs.middleRows(start, b));
  }
  return out;
}

}  // namespace nrgs
