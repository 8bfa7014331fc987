#pragma once

#include <cstdint>
#include <vector>

#include "edgelab/grid.hpp"

namespace edgelab::loss {

// How gradients treat the prediction-dependent weights of the
// prediction-weighted loss. DetachedWeights treats them as constants of the
// forward pass; FullGradient differentiates through the edge-mass sums as
// well (an O(N) rank-1 correction, see pred_loss).
enum class GradMode { DetachedWeights, FullGradient };

// PixelSum is the plain sum over pixels; PerPixelMean divides the PixelSum
// result (value and gradient) by the pixel count, so training step sizes are
// resolution-independent.
enum class Normalization { PixelSum, PerPixelMean };

struct LossConfig {
  double lambda_label = 1.1;  // non-edge weight multiplier, label side
  double lambda_pred = 1.1;   // non-edge weight multiplier, prediction side
  double balance_b = 1.0;     // mix between label and prediction losses
  double clamp_eps = 1e-7;    // predictions are clamped into [eps, 1-eps]
                              // before any log
  GradMode grad_mode = GradMode::DetachedWeights;
  Normalization normalization = Normalization::PixelSum;

  void validate() const;
};

struct LossResult {
  double value = 0.0;
  Grid<double> gradient;  // dL/dy_hat per pixel, same shape as the input
};

// Per-pixel weights plus the global quantities they derive from. Operations
// populate only their own side; the other grid is left empty.
struct WeightMaps {
  Grid<double> label_weights;
  Grid<double> pred_weights;
  double alpha = 0.0;  // fraction of non-edge pixels in the ground truth
  double i_pos = 0.0;  // total predicted edge mass, sum of predictions
  double i_neg = 0.0;  // pixel count minus i_pos
};

// Ground-truth-derived weights: edge pixels carry alpha, non-edge pixels
// carry lambda_label * (1 - alpha). Computed per map, never pooled.
WeightMaps compute_label_weights(const BinaryMap& gt, const LossConfig& cfg);

// Prediction-derived weights: each pixel carries
//   y_hat * i_neg/N + (1 - y_hat) * lambda_pred * i_pos/N,
// computed from the raw (unclamped) prediction, per map.
WeightMaps compute_pred_weights(const SoftMap& pred, const LossConfig& cfg);

// Label-weighted binary cross-entropy (the classical recall-oriented
// weighting). Weights are constants of the ground truth, so both gradient
// modes agree.
LossResult label_loss(const SoftMap& pred, const BinaryMap& gt,
                      const LossConfig& cfg);

// Prediction-weighted cross-entropy, penalizing confident edges that lack
// ground-truth support.
LossResult pred_loss(const SoftMap& pred, const BinaryMap& gt,
                     const LossConfig& cfg);

// (label_loss + b * pred_loss) / (1 + b). b == 0 reproduces label_loss
// bit-for-bit.
LossResult swbce_loss(const SoftMap& pred, const BinaryMap& gt,
                      const LossConfig& cfg);

struct MultiLevelResult {
  // Unscaled per-level swbce results; the gradient of the weighted total
  // with respect to level k's prediction is level_weights[k] *
  // levels[k].gradient.
  std::vector<LossResult> levels;
  double total = 0.0;  // sum of level_weights[k] * levels[k].value
};

// Weighted multi-output supervision: one swbce term per prediction level.
MultiLevelResult multi_level_loss(const std::vector<SoftMap>& preds,
                                  const BinaryMap& gt,
                                  const std::vector<double>& level_weights,
                                  const LossConfig& cfg);

// Forward value of the cross-entropy under externally fixed weights. Used by
// the finite-difference harness to freeze weights in DetachedWeights mode.
double weighted_ce_value(const SoftMap& pred, const BinaryMap& gt,
                         const Grid<double>& weights, double clamp_eps);

}  // namespace edgelab::loss
