#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrgs/mlp.hpp"
#include "nrgs/types.hpp"

namespace nrgs {

enum class WeightingMode { kEqual, kVariance };
enum class GranularityMode { kShared, kIndependent };

struct TrainConfig {
  double gamma = 5.0;        // variance-weight temperature
  double lambda_cos = 1.0;   // cosine-term coefficient
  double epsilon = 1e-8;     // denominator guard in the variance normalization
  double lr = 1e-3;
  int batch_size = 4096;
  int epochs = 50;
  std::uint64_t seed = 0;
  WeightingMode weighting = WeightingMode::kVariance;
  GranularityMode granularity_mode = GranularityMode::kShared;
};

/// Raised when the optimization cannot proceed (no valid samples, loss
/// diverged to non-finite values).
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Confidence weights p_i = exp(-gamma * v~) with v = ||Var(f_i)||_2 min-max
/// normalized over the valid rows of this field. Invalid rows get 0.
Eigen::VectorXd varianceWeights(const SemanticField& field, double gamma, double epsilon);

template <class Scalar>
struct LossValue {
  double loss = 0.0;
  BatchMatrix<Scalar> grad;   // d(mean loss)/d preds
  int cosine_skipped = 0;     // rows whose prediction norm collapsed
};

namespace detail {

/// Shared core of the equal and variance-weighted objectives:
/// mean_i p_i * (||f - f^||^2 + lambda * (1 - cos(f, f^))). With p == null
/// every row weight is exactly 1, so the two losses agree to the last bit.
template <class Scalar>
LossValue<Scalar> rowLoss(const Eigen::Ref<const BatchMatrix<Scalar>>& targets,
                          const Eigen::Ref<const BatchMatrix<Scalar>>& preds,
                          const Scalar* p, double lambda_cos) {
  if (targets.rows() != preds.rows() || targets.cols() != preds.cols())
    throw std::invalid_argument("loss shape mismatch");
  const Eigen::Index batch = targets.rows();
  LossValue<Scalar> out;
  out.grad.setZero(batch, targets.cols());
  const Scalar norm_floor = Scalar(1e-12);
  double total = 0.0;
  for (Eigen::Index r = 0; r < batch; ++r) {
    const Scalar w = p ? p[r] : Scalar(1);
    if (w == Scalar(0)) continue;
    const auto target = targets.row(r);
    const auto pred = preds.row(r);
    Eigen::RowVectorX<Scalar> grad_row = Scalar(2) * (pred - target);
    Scalar row_loss = (pred - target).squaredNorm();
    const Scalar tn = target.norm();
    const Scalar pn = pred.norm();
    if (pn < norm_floor || tn < norm_floor) {
      ++out.cosine_skipped;
    } else {
      const Scalar cos = target.dot(pred) / (tn * pn);
      row_loss += Scalar(lambda_cos) * (Scalar(1) - cos);
      grad_row += Scalar(lambda_cos) * (cos / (pn * pn) * pred - target / (tn * pn));
    }
    total += static_cast<double>(w) * static_cast<double>(row_loss);
    out.grad.row(r) = (w / Scalar(batch)) * grad_row;
  }
  out.loss = total / static_cast<double>(batch);
  return out;
}

}  // namespace detail

/// Equal-weighted objective over a batch.
template <class Scalar>
LossValue<Scalar> lossEqual(const Eigen::Ref<const BatchMatrix<Scalar>>& targets,
                            const Eigen::Ref<const BatchMatrix<Scalar>>& preds,
                            double lambda_cos) {
  return detail::rowLoss<Scalar>(targets, preds, nullptr, lambda_cos);
}

/// Variance-weighted objective; rows with p_i = 0 contribute nothing.
template <class Scalar>
LossValue<Scalar> lossWeighted(const Eigen::Ref<const BatchMatrix<Scalar>>& targets,
                               const Eigen::Ref<const BatchMatrix<Scalar>>& preds,
                               const Eigen::Ref<const Eigen::VectorX<Scalar>>& p,
                               double lambda_cos) {
  if (p.size() != targets.rows())
    throw std::invalid_argument("loss weight count mismatch");
  return detail::rowLoss<Scalar>(targets, preds, p.data(), lambda_cos);
}

template <class Scalar>
class AdamOptimizer {
 public:
  AdamOptimizer(Eigen::Index n, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
        m_(Eigen::VectorX<Scalar>::Zero(n)), v_(Eigen::VectorX<Scalar>::Zero(n)) {}

  void step(Eigen::VectorX<Scalar>& params, const Eigen::VectorX<Scalar>& grad) {
    ++t_;
    m_ = Scalar(beta1_) * m_ + Scalar(1.0 - beta1_) * grad;
    v_ = Scalar(beta2_) * v_ + Scalar(1.0 - beta2_) * grad.cwiseProduct(grad);
    const Scalar corr1 = Scalar(1.0 - std::pow(beta1_, t_));
    const Scalar corr2 = Scalar(1.0 - std::pow(beta2_, t_));
    params -= (Scalar(lr_) / corr1) *
              (m_.array() / ((v_.array() / corr2).sqrt() + Scalar(eps_))).matrix();
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  Eigen::VectorX<Scalar> m_, v_;
  long t_ = 0;
};

struct EpochLogEntry {
  int epoch;
  std::string mix;       // "shared" or "g1"/"g2"/"g3"
  double mean_loss;
  double mean_weight;    // mean p over the samples visited this epoch
  int cosine_skipped;
};

struct TrainResult {
  std::vector<Mlp<float>> models;  // one (shared) or three (independent, by g)
  std::vector<EpochLogEntry> log;

  /// The model serving granularity g.
  const Mlp<float>& modelFor(int granularity) const {
    return models.size() == 1 ? models.front() : models.at(granularity - 1);
  }
};

/// Optimizes the regularizer on the valid rows of the three lifted fields.
/// Shared mode trains one conditioned model on the shuffled union of all
/// granularities; independent mode trains one model per granularity.
/// Deterministic for a fixed seed. Throws TrainingError when a granularity
/// has no valid samples or the loss becomes non-finite.
TrainResult train(const GaussianScene& scene, std::span<const SemanticField> fields,
                  const TrainConfig& tcfg, const MlpConfig& mcfg);

/// Replaces a lifted field with the model's predictions for every Gaussian,
/// including rows the lifting never observed. Variance is zero and all rows
/// valid; the accumulated weight mass is carried over for bookkeeping.
SemanticField regularizeField(const Mlp<float>& model, const GaussianScene& scene,
                              const SemanticField& lifted);

}  // namespace nrgs
