#include "jointqa/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jointqa::losses {

namespace {

Scalar safe_log(Scalar p) { return std::log(std::max(p, kProbFloor)); }

}  // namespace

Scalar rc_loss(const heads::ReaderScores& scores, chunking::LocalSpan label) {
  const auto m = static_cast<std::size_t>(scores.p_start.size());
  if (label.start >= m || label.end >= m) {
    throw std::invalid_argument("rc_loss: label outside the sequence");
  }
  const Scalar ls = safe_log(scores.p_start[static_cast<Eigen::Index>(label.start)]);
  const Scalar le = safe_log(scores.p_end[static_cast<Eigen::Index>(label.end)]);
  return -(ls + le);
}

std::pair<Scalar, Scalar> dr_class_weights(std::size_t n_pos, std::size_t n_neg) {
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("dr_class_weights: both classes must be present");
  }
  const Scalar n = static_cast<Scalar>(n_pos + n_neg);
  return {n / static_cast<Scalar>(n_pos), n / static_cast<Scalar>(n_neg)};
}

Scalar dr_loss(Scalar p_dr, bool relevant, std::pair<Scalar, Scalar> class_weights) {
  if (!(p_dr >= 0.0 && p_dr <= 1.0)) {
    throw std::invalid_argument("dr_loss: probability outside [0, 1]");
  }
  if (relevant) return -class_weights.first * safe_log(p_dr);
  return -class_weights.second * safe_log(1.0 - p_dr);
}

Scalar adjustment_factor(chunking::LocalSpan gold, chunking::LocalSpan pred, Scalar epsilon_len) {
  if (epsilon_len <= 0.0) {
    throw std::invalid_argument("adjustment_factor: epsilon must be positive");
  }
  if (gold.start == 0 && gold.end == 0) return 1.0;
  if (gold.end < gold.start || pred.end < pred.start) {
    throw std::invalid_argument("adjustment_factor: inverted span");
  }
  const Scalar len_gold = static_cast<Scalar>(gold.end - gold.start);
  const Scalar len_pred = static_cast<Scalar>(pred.end - pred.start);
  const Scalar denom = std::max(len_gold, epsilon_len);
  return std::exp(std::abs(len_pred - len_gold) / denom);
}

LossBreakdown joint_loss(Scalar l_rc, Scalar l_dr, const LossConfig& config, Scalar w_adjust) {
  if (!std::isfinite(l_rc) || !std::isfinite(l_dr)) {
    throw std::invalid_argument("joint_loss: non-finite component loss");
  }
  if (config.lambda < 0.0) {
    throw std::invalid_argument("joint_loss: lambda must be non-negative");
  }
  if (!(w_adjust >= 1.0) || !std::isfinite(w_adjust)) {
    throw std::invalid_argument("joint_loss: adjustment factor must be finite and >= 1");
  }
  LossBreakdown out;
  out.l_rc = l_rc;
  out.l_dr = l_dr;
  out.w_adjust = config.adjustable ? w_adjust : 1.0;
  out.total = out.w_adjust * l_rc + config.lambda * l_dr;
  return out;
}

}  // namespace jointqa::losses
