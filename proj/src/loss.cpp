#include "edgelab/loss.hpp"

#include <cmath>

#include "edgelab/errors.hpp"

namespace edgelab::loss {

namespace {

double clamp_prob(double v, double eps) {
  if (v < eps) return eps;
  if (v > 1.0 - eps) return 1.0 - eps;
  return v;
}

// Cross-entropy term per pixel, evaluated at the clamped prediction.
double ce_term(uint8_t y, double p_clamped) {
  return y ? std::log(p_clamped) : std::log(1.0 - p_clamped);
}

// Derivative of the cross-entropy term with respect to the prediction.
double ce_deriv(uint8_t y, double p_clamped) {
  return y ? 1.0 / p_clamped : -1.0 / (1.0 - p_clamped);
}

// Divides value and gradient by the pixel count when PerPixelMean is
// requested; PixelSum results pass through untouched. Doing this as a single
// final division keeps "mean == sum / N" exact.
void apply_normalization(LossResult& r, const LossConfig& cfg) {
  if (cfg.normalization == Normalization::PerPixelMean) {
    const double n = static_cast<double>(r.gradient.size());
    r.value /= n;
    for (double& g : r.gradient.data) g /= n;
  }
}

// Sum-mode weighted cross-entropy with the gradient taken through the log
// terms only (weights frozen). Pixel sums run sequentially in row-major
// order with a single accumulator, so results are independent of threading.
LossResult weighted_ce_sum(const SoftMap& pred, const BinaryMap& gt,
                           const Grid<double>& w, double eps) {
  LossResult r;
  r.gradient = Grid<double>(pred.height, pred.width, 0.0);
  double total = 0.0;
  for (int64_t i = 0; i < pred.size(); ++i) {
    const double raw = pred.data[i];
    const double pc = clamp_prob(raw, eps);
    const uint8_t y = gt.data[i];
    total -= w.data[i] * ce_term(y, pc);
    if (raw >= eps && raw <= 1.0 - eps) {
      r.gradient.data[i] = -w.data[i] * ce_deriv(y, pc);
    }
  }
  r.value = total;
  return r;
}

LossResult label_loss_sum(const SoftMap& pred, const BinaryMap& gt,
                          const LossConfig& cfg) {
  const WeightMaps w = compute_label_weights(gt, cfg);
  return weighted_ce_sum(pred, gt, w.label_weights, cfg.clamp_eps);
}

LossResult pred_loss_sum(const SoftMap& pred, const BinaryMap& gt,
                         const LossConfig& cfg) {
  const WeightMaps w = compute_pred_weights(pred, cfg);
  LossResult r = weighted_ce_sum(pred, gt, w.pred_weights, cfg.clamp_eps);
  if (cfg.grad_mode == GradMode::FullGradient) {
    // Each prediction also moves every pixel's weight through the edge mass
    // i_pos. Writing alpha_hat_i = p_i * i_neg/N + (1-p_i) * lam * i_pos/N
    // with i_pos = sum(p), the extra gradient splits into a per-pixel term
    //   d(alpha_hat_k)/d(p_k)|direct = (i_neg - lam * i_pos) / N
    // and a rank-1 term shared by all pixels,
    //   T = sum_i (lam * (1 - p_i) - p_i) * CE_i.
    const double n = static_cast<double>(pred.size());
    const double lam = cfg.lambda_pred;
    const double direct = (w.i_neg - lam * w.i_pos) / n;
    double t = 0.0;
    for (int64_t i = 0; i < pred.size(); ++i) {
      const double pc = clamp_prob(pred.data[i], cfg.clamp_eps);
      t += (lam * (1.0 - pred.data[i]) - pred.data[i]) *
           ce_term(gt.data[i], pc);
    }
    for (int64_t i = 0; i < pred.size(); ++i) {
      const double pc = clamp_prob(pred.data[i], cfg.clamp_eps);
      r.gradient.data[i] -= direct * ce_term(gt.data[i], pc) + t / n;
    }
  }
  return r;
}

}  // namespace

void LossConfig::validate() const {
  if (!(lambda_label > 0.0)) {
    throw InvalidConfig("lambda_label must be positive");
  }
  if (!(lambda_pred > 0.0)) {
    throw InvalidConfig("lambda_pred must be positive");
  }
  if (!(balance_b >= 0.0)) {
    throw InvalidConfig("balance_b must be nonnegative");
  }
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) {
    throw InvalidConfig("clamp_eps must lie in (0, 0.5)");
  }
}

WeightMaps compute_label_weights(const BinaryMap& gt, const LossConfig& cfg) {
  WeightMaps w;
  const int64_t n = gt.size();
  const int64_t negatives = n - count_positives(gt);
  w.alpha = static_cast<double>(negatives) / static_cast<double>(n);
  const double edge_weight = w.alpha;
  const double non_edge_weight = cfg.lambda_label * (1.0 - w.alpha);
  w.label_weights = Grid<double>(gt.height, gt.width, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    w.label_weights.data[i] = gt.data[i] ? edge_weight : non_edge_weight;
  }
  return w;
}

WeightMaps compute_pred_weights(const SoftMap& pred, const LossConfig& cfg) {
  WeightMaps w;
  const int64_t n = pred.size();
  double mass = 0.0;
  for (double v : pred.data) mass += v;
  w.i_pos = mass;
  w.i_neg = static_cast<double>(n) - mass;
  const double pos_side = w.i_neg / static_cast<double>(n);
  const double neg_side = cfg.lambda_pred * w.i_pos / static_cast<double>(n);
  w.pred_weights = Grid<double>(pred.height, pred.width, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    const double v = pred.data[i];
    w.pred_weights.data[i] = v * pos_side + (1.0 - v) * neg_side;
  }
  return w;
}

LossResult label_loss(const SoftMap& pred, const BinaryMap& gt,
                      const LossConfig& cfg) {
  cfg.validate();
  require_same_shape(pred, gt, "label_loss");
  LossResult r = label_loss_sum(pred, gt, cfg);
  apply_normalization(r, cfg);
  return r;
}

LossResult pred_loss(const SoftMap& pred, const BinaryMap& gt,
                     const LossConfig& cfg) {
  cfg.validate();
  require_same_shape(pred, gt, "pred_loss");
  LossResult r = pred_loss_sum(pred, gt, cfg);
  apply_normalization(r, cfg);
  return r;
}

LossResult swbce_loss(const SoftMap& pred, const BinaryMap& gt,
                      const LossConfig& cfg) {
  cfg.validate();
  require_same_shape(pred, gt, "swbce_loss");
  const double b = cfg.balance_b;
  if (b == 0.0) {
    // The combination degenerates to the label loss; reuse its exact
    // evaluation path so the b == 0 result is bit-identical.
    return label_loss(pred, gt, cfg);
  }
  LossResult lab = label_loss_sum(pred, gt, cfg);
  LossResult prd = pred_loss_sum(pred, gt, cfg);
  LossResult r;
  r.value = (lab.value + b * prd.value) / (1.0 + b);
  r.gradient = Grid<double>(pred.height, pred.width, 0.0);
  for (int64_t i = 0; i < pred.size(); ++i) {
    r.gradient.data[i] =
        (lab.gradient.data[i] + b * prd.gradient.data[i]) / (1.0 + b);
  }
  apply_normalization(r, cfg);
  return r;
}

MultiLevelResult multi_level_loss(const std::vector<SoftMap>& preds,
                                  const BinaryMap& gt,
                                  const std::vector<double>& level_weights,
                                  const LossConfig& cfg) {
  if (preds.empty()) {
    throw EmptyLevelList("multi_level_loss: no prediction levels given");
  }
  if (level_weights.size() != preds.size()) {
    throw DimensionMismatch(
        "multi_level_loss: " + std::to_string(level_weights.size()) +
        " level weights for " + std::to_string(preds.size()) + " levels");
  }
  MultiLevelResult out;
  out.levels.reserve(preds.size());
  for (size_t k = 0; k < preds.size(); ++k) {
    out.levels.push_back(swbce_loss(preds[k], gt, cfg));
    out.total += level_weights[k] * out.levels.back().value;
  }
  return out;
}

double weighted_ce_value(const SoftMap& pred, const BinaryMap& gt,
                         const Grid<double>& weights, double clamp_eps) {
  require_same_shape(pred, gt, "weighted_ce_value");
  require_same_shape(pred, weights, "weighted_ce_value");
  double total = 0.0;
  for (int64_t i = 0; i < pred.size(); ++i) {
    const double pc = clamp_prob(pred.data[i], clamp_eps);
    total -= weights.data[i] * ce_term(gt.data[i], pc);
  }
  return total;
}

}  // namespace edgelab::loss
