#pragma once

#include <span>
#include <vector>

#include "nrgs/projection.hpp"
#include "nrgs/types.hpp"

namespace nrgs {

/// Streaming two-moment accumulator for weighted feature statistics.
/// Holds sums in double so a whole pass over many views stays exact enough
/// to be checked against a brute-force reference at 1e-6.
struct LiftAccumulator {
  Eigen::VectorXd sum_weight;       // N
  RowMatrixXd sum_weighted;         // N x D, sum of w * F
  RowMatrixXd sum_weighted_sq;      // N x D, sum of w * F^2

  LiftAccumulator(int n, int dim)
      : sum_weight(Eigen::VectorXd::Zero(n)),
        sum_weighted(RowMatrixXd::Zero(n, dim)),
        sum_weighted_sq(RowMatrixXd::Zero(n, dim)) {}

  int size() const { return static_cast<int>(sum_weight.size()); }
  int dim() const { return static_cast<int>(sum_weighted.cols()); }
};

/// Folds one view into the accumulator: for every record, samples the
/// feature map at the record's pixel and adds w, w*F and w*F^2.
/// Throws std::invalid_argument on a feature-dimension mismatch.
void accumulateView(LiftAccumulator& acc, std::span<const WeightRecord> records,
                    const FeatureMap& fmap);

/// Turns sums into a field: f = sum(wF)/sum(w) and
/// Var = max(0, sum(wF^2)/sum(w) - f^2) where the mass reaches
/// kMinWeightMass; everything else is zeroed and marked invalid.
SemanticField finalizeField(const LiftAccumulator& acc, int granularity);

/// Full lifting pass at one granularity: folds every view in ascending
/// view_id order, then finalizes. Input map order does not matter; a
/// missing or duplicated view's map is a hard error naming the view.
/// `threads` processes view chunks in parallel (private accumulators merged
/// in ascending order); the merged result depends on the partition only
/// through float rounding, and threads = 1 is the canonical sequential fold.
SemanticField lift(const GaussianScene& scene, std::span<const Camera> cams,
                   std::span<const FeatureMap> fmaps, int granularity, int threads = 1);

}  // namespace nrgs
