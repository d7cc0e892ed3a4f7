#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jointqa/corpus.hpp"
#include "jointqa/types.hpp"

namespace jointqa::ranking {

enum class Strategy { ours_with_doc, ours_without_doc, wklm, mp_bert };

Strategy parse_strategy(const std::string& name);
std::string strategy_name(Strategy s);

struct StrategyConfig {
  Strategy strategy = Strategy::ours_with_doc;
  Scalar alpha = 0.5;  // used only by the linear-combination strategies
};

/// One block's answer prediction with the probabilities needed to recompute
/// its score under any strategy. `span` is in document token coordinates;
/// empty means the block predicted no answer (p_s/p_e then equal p_s0/p_e0).
struct PredictionRecord {
  std::string question_id;
  std::string doc_id;
  std::size_t block_index = 1;
  std::optional<corpus::AnswerSpan> span;
  Scalar p_s = 0.0;
  Scalar p_e = 0.0;
  Scalar p_s0 = 0.0;
  Scalar p_e0 = 0.0;
  Scalar p_dr = 0.0;
  Scalar score = 0.0;
  std::string strategy;
};

/// (p_s + p_e) - (p_s0 + p_e0): span confidence corrected by the no-answer
/// mass. Exactly 0 for a no-answer prediction.
Scalar reading_score(const PredictionRecord& record);

Scalar joint_score(const PredictionRecord& record, const StrategyConfig& config);

/// Best block record for one document: maximal joint score, ties broken by
/// lower block index. Scores and strategy name are filled in on the result.
PredictionRecord aggregate_document(const std::vector<PredictionRecord>& records,
                                    const StrategyConfig& config);

struct QuestionRanking {
  /// Top-K answer candidates, scored and sorted; duplicates of the same
  /// document span are collapsed, all no-answer blocks collapse to one entry.
  std::vector<PredictionRecord> answers;
  /// Every candidate document ordered by its aggregated (max-block) score.
  std::vector<std::pair<std::string, Scalar>> documents;
};

inline constexpr Scalar kNeverAbstain = -std::numeric_limits<Scalar>::infinity();

/// Ranks one question's block records. When the best score falls below
/// `abstain_threshold` a no-answer entry is promoted to rank 1.
QuestionRanking rank_answers(const std::vector<PredictionRecord>& records,
                             const StrategyConfig& config, std::size_t k,
                             Scalar abstain_threshold = kNeverAbstain);

}  // namespace jointqa::ranking
