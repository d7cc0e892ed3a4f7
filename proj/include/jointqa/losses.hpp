#pragma once

#include <cstddef>
#include <optional>
#include <utility>

#include "jointqa/chunking.hpp"
#include "jointqa/heads.hpp"
#include "jointqa/types.hpp"

namespace jointqa::losses {

/// Probabilities are clamped away from 0 before taking logs.
inline constexpr Scalar kProbFloor = 1e-12;

struct LossConfig {
  Scalar lambda = 4.0;   // weight on the document-relevance term
  bool adjustable = false;  // scale the span loss by the length-mismatch factor
  Scalar epsilon_len = 1.0;  // denominator floor for the mismatch factor
  std::optional<std::pair<Scalar, Scalar>> class_weights;  // (positive, negative); auto if unset
};

struct LossBreakdown {
  Scalar l_rc = 0.0;
  Scalar l_dr = 0.0;
  Scalar w_adjust = 1.0;
  Scalar total = 0.0;
};

/// Cross-entropy of the labelled start/end pair: -(log p_start[s] + log p_end[e]).
Scalar rc_loss(const heads::ReaderScores& scores, chunking::LocalSpan label);

/// Inverse-class-frequency weights (w_pos, w_neg) = n/(n_pos), n/(n_neg).
std::pair<Scalar, Scalar> dr_class_weights(std::size_t n_pos, std::size_t n_neg);

/// Weighted binary cross-entropy for one block's relevance probability.
Scalar dr_loss(Scalar p_dr, bool relevant, std::pair<Scalar, Scalar> class_weights);

/// exp(|len(pred) - len(gold)| / max(len(gold), epsilon)), treated as a
/// constant during optimisation. Lengths are end - start; returns 1 when the
/// gold label is the no-answer sentinel.
Scalar adjustment_factor(chunking::LocalSpan gold, chunking::LocalSpan pred, Scalar epsilon_len = 1.0);

/// total = w_adjust * l_rc + lambda * l_dr (w_adjust forced to 1 when the
/// adjustable factor is disabled).
LossBreakdown joint_loss(Scalar l_rc, Scalar l_dr, const LossConfig& config, Scalar w_adjust = 1.0);

}  // namespace jointqa::losses
