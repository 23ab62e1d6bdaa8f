#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nrgs/rng.hpp"
#include "nrgs/types.hpp"

namespace nrgs {

/// Batch matrices are (batch x channels); weights inside the flat parameter
/// vector are row-major (out x in) with the bias following each weight block.
template <class Scalar>
using BatchMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// MLP input channels: position(3), opacity(1), rotation quaternion(4),
/// log-scale(3), rgb(3), granularity(1).
inline constexpr int kInputDim = 15;

struct MlpConfig {
  int in_dim = kInputDim;
  int hidden = 256;
  int blocks = 3;
  int out_dim = 512;

  std::int64_t paramCount() const {
    const std::int64_t h = hidden;
    return h * in_dim + h + blocks * 2 * (h * h + h) +
           static_cast<std::int64_t>(out_dim) * h + out_dim;
  }

  bool operator==(const MlpConfig&) const = default;
};

/// Per-channel affine input normalization (x - shift) / scale. Position
/// channels map the scene bbox to [-1,1]; scale channels standardize the
/// log-scales; all other channels pass through.
struct NormStats {
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(kInputDim);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(kInputDim);
};

NormStats computeNormStats(const GaussianScene& scene);

/// Encodes one Gaussian plus the granularity conditioning scalar into the
/// 15-channel input. Granularity g in {1,2,3} lands on {-1,0,+1}; the
/// quaternion is sign-canonicalized to w >= 0. Throws std::invalid_argument
/// for a granularity outside {1,2,3}.
Eigen::VectorXd encodeInput(const Gaussian& g, int granularity, const NormStats& stats);

/// Encodes the whole scene at one granularity as a batch.
template <class Scalar>
BatchMatrix<Scalar> encodeBatch(const GaussianScene& scene, int granularity,
                                const NormStats& stats) {
  BatchMatrix<Scalar> out(scene.size(), kInputDim);
  for (int i = 0; i < scene.size(); ++i)
    out.row(i) = encodeInput(scene.gaussians[i], granularity, stats).cast<Scalar>();
  return out;
}

/// Offsets of each linear layer inside the flat parameter vector:
/// entry (hidden x in), then per residual block two (hidden x hidden)
/// layers, then the head (out x hidden).
struct ParamLayout {
  explicit ParamLayout(const MlpConfig& c) : config(c) {}

  MlpConfig config;

  std::int64_t entryW() const { return 0; }
  std::int64_t entryB() const { return static_cast<std::int64_t>(config.hidden) * config.in_dim; }
  std::int64_t blockBase(int k) const {
    return entryB() + config.hidden +
           static_cast<std::int64_t>(k) * 2 *
               (static_cast<std::int64_t>(config.hidden) * config.hidden + config.hidden);
  }
  std::int64_t blockW1(int k) const { return blockBase(k); }
  std::int64_t blockB1(int k) const { return blockW1(k) + static_cast<std::int64_t>(config.hidden) * config.hidden; }
  std::int64_t blockW2(int k) const { return blockB1(k) + config.hidden; }
  std::int64_t blockB2(int k) const { return blockW2(k) + static_cast<std::int64_t>(config.hidden) * config.hidden; }
  std::int64_t headW() const { return blockBase(config.blocks); }
  std::int64_t headB() const { return headW() + static_cast<std::int64_t>(config.out_dim) * config.hidden; }
};

/// The conditional residual MLP: h0 = relu(Win x + bin); per block
/// h <- h + W2 relu(W1 h + b1) + b2; output = Wout h + bout.
template <class Scalar>
struct Mlp {
  MlpConfig config;
  NormStats stats;
  std::uint64_t seed = 0;
  Eigen::VectorX<Scalar> params;

  ParamLayout layout() const { return ParamLayout(config); }

  template <class Other>
  Mlp<Other> cast() const {
    Mlp<Other> m;
    m.config = config;
    m.stats = stats;
    m.seed = seed;
    m.params = params.template cast<Other>();
    return m;
  }
};

namespace detail {

template <class Scalar>
using WeightMap = Eigen::Map<
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class Scalar>
using BiasMap = Eigen::Map<const Eigen::RowVectorX<Scalar>>;
template <class Scalar>
using MutWeightMap =
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class Scalar>
using MutBiasMap = Eigen::Map<Eigen::RowVectorX<Scalar>>;

}  // namespace detail

/// Cached activations of one forward pass, consumed by backward().
template <class Scalar>
struct ForwardContext {
  BatchMatrix<Scalar> input;                    // B x in
  BatchMatrix<Scalar> entry_pre;                // B x H, pre-activation
  std::vector<BatchMatrix<Scalar>> block_in;    // hidden state entering block k
  std::vector<BatchMatrix<Scalar>> branch_pre;  // B x H, pre-activation of W1
  BatchMatrix<Scalar> final_hidden;             // B x H
};

template <class Scalar>
BatchMatrix<Scalar> forward(const Mlp<Scalar>& mlp,
                            const Eigen::Ref<const BatchMatrix<Scalar>>& input,
                            ForwardContext<Scalar>* ctx = nullptr) {
  const MlpConfig& c = mlp.config;
  if (input.cols() != c.in_dim)
    throw std::invalid_argument("mlp input width mismatch");
  const ParamLayout lay = mlp.layout();
  const Scalar* p = mlp.params.data();
  const auto relu = [](const BatchMatrix<Scalar>& z) {
    return z.cwiseMax(Scalar(0));
  };

  detail::WeightMap<Scalar> entry_w(p + lay.entryW(), c.hidden, c.in_dim);
  detail::BiasMap<Scalar> entry_b(p + lay.entryB(), c.hidden);
  BatchMatrix<Scalar> pre = (input * entry_w.transpose()).rowwise() + entry_b;
  if (ctx) {
    ctx->input = input;
    ctx->entry_pre = pre;
    ctx->block_in.clear();
    ctx->branch_pre.clear();
  }
  BatchMatrix<Scalar> hidden = relu(pre);

  for (int k = 0; k < c.blocks; ++k) {
    detail::WeightMap<Scalar> w1(p + lay.blockW1(k), c.hidden, c.hidden);
    detail::BiasMap<Scalar> b1(p + lay.blockB1(k), c.hidden);
    detail::WeightMap<Scalar> w2(p + lay.blockW2(k), c.hidden, c.hidden);
    detail::BiasMap<Scalar> b2(p + lay.blockB2(k), c.hidden);
    BatchMatrix<Scalar> branch = (hidden * w1.transpose()).rowwise() + b1;
    if (ctx) {
      ctx->block_in.push_back(hidden);
      ctx->branch_pre.push_back(branch);
    }
    hidden += (relu(branch) * w2.transpose()).rowwise() + b2;
  }

  detail::WeightMap<Scalar> head_w(p + lay.headW(), c.out_dim, c.hidden);
  detail::BiasMap<Scalar> head_b(p + lay.headB(), c.out_dim);
  if (ctx) ctx->final_hidden = hidden;
  return (hidden * head_w.transpose()).rowwise() + head_b;
}

/// Exact reverse-mode gradient of sum(upstream .* output) with respect to
/// the flat parameter vector. Requires the context of the matching forward
/// pass; throws std::invalid_argument on a shape mismatch.
template <class Scalar>
Eigen::VectorX<Scalar> backward(const Mlp<Scalar>& mlp, const ForwardContext<Scalar>& ctx,
                                const Eigen::Ref<const BatchMatrix<Scalar>>& upstream) {
  const MlpConfig& c = mlp.config;
  if (upstream.rows() != ctx.input.rows() || upstream.cols() != c.out_dim)
    throw std::invalid_argument("mlp upstream shape mismatch");
  if (static_cast<int>(ctx.branch_pre.size()) != c.blocks)
    throw std::invalid_argument("mlp forward context mismatch");
  const ParamLayout lay = mlp.layout();
  const Scalar* p = mlp.params.data();
  Eigen::VectorX<Scalar> grad = Eigen::VectorX<Scalar>::Zero(mlp.params.size());
  Scalar* gp = grad.data();

  const auto reluMask = [](const BatchMatrix<Scalar>& pre) {
    return (pre.array() > Scalar(0)).template cast<Scalar>().matrix();
  };

  // Head.
  detail::MutWeightMap<Scalar> g_head_w(gp + lay.headW(), c.out_dim, c.hidden);
  detail::MutBiasMap<Scalar> g_head_b(gp + lay.headB(), c.out_dim);
  detail::WeightMap<Scalar> head_w(p + lay.headW(), c.out_dim, c.hidden);
  g_head_w.noalias() = upstream.transpose() * ctx.final_hidden;
  g_head_b = upstream.colwise().sum();
  BatchMatrix<Scalar> d_hidden = upstream * head_w;

  // Residual blocks, last to first.
  for (int k = c.blocks - 1; k >= 0; --k) {
    detail::WeightMap<Scalar> w1(p + lay.blockW1(k), c.hidden, c.hidden);
    detail::WeightMap<Scalar> w2(p + lay.blockW2(k), c.hidden, c.hidden);
    detail::MutWeightMap<Scalar> g_w1(gp + lay.blockW1(k), c.hidden, c.hidden);
    detail::MutBiasMap<Scalar> g_b1(gp + lay.blockB1(k), c.hidden);
    detail::MutWeightMap<Scalar> g_w2(gp + lay.blockW2(k), c.hidden, c.hidden);
    detail::MutBiasMap<Scalar> g_b2(gp + lay.blockB2(k), c.hidden);

    const BatchMatrix<Scalar> act = ctx.branch_pre[k].cwiseMax(Scalar(0));
    g_w2.noalias() = d_hidden.transpose() * act;
    g_b2 = d_hidden.colwise().sum();
    BatchMatrix<Scalar> d_branch =
        (d_hidden * w2).cwiseProduct(reluMask(ctx.branch_pre[k]));
    g_w1.noalias() = d_branch.transpose() * ctx.block_in[k];
    g_b1 = d_branch.colwise().sum();
    d_hidden += d_branch * w1;
  }

  // Entry layer.
  detail::MutWeightMap<Scalar> g_entry_w(gp + lay.entryW(), c.hidden, c.in_dim);
  detail::MutBiasMap<Scalar> g_entry_b(gp + lay.entryB(), c.hidden);
  const BatchMatrix<Scalar> d_entry = d_hidden.cwiseProduct(reluMask(ctx.entry_pre));
  g_entry_w.noalias() = d_entry.transpose() * ctx.input;
  g_entry_b = d_entry.colwise().sum();
  return grad;
}

/// He fan-in initialization; the second linear layer of each residual block
/// starts at zero so every block begins as the identity. Biases are zero.
/// The same seed always yields the same parameters.
template <class Scalar>
Mlp<Scalar> initMlp(const MlpConfig& config, const NormStats& stats, std::uint64_t seed) {
  Mlp<Scalar> mlp;
  mlp.config = config;
  mlp.stats = stats;
  mlp.seed = seed;
  mlp.params = Eigen::VectorX<Scalar>::Zero(config.paramCount());
  Rng rng(seed);
  const ParamLayout lay = mlp.layout();
  const auto fill = [&](std::int64_t offset, std::int64_t count, int fan_in) {
    const double sd = std::sqrt(2.0 / fan_in);
    for (std::int64_t i = 0; i < count; ++i)
      mlp.params[offset + i] = static_cast<Scalar>(sd * rng.normal());
  };
  fill(lay.entryW(), static_cast<std::int64_t>(config.hidden) * config.in_dim, config.in_dim);
  for (int k = 0; k < config.blocks; ++k)
    fill(lay.blockW1(k), static_cast<std::int64_t>(config.hidden) * config.hidden,
         config.hidden);
  fill(lay.headW(), static_cast<std::int64_t>(config.out_dim) * config.hidden,
       config.hidden);
  return mlp;
}

}  // namespace nrgs
