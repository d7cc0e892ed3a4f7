#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jointqa/corpus.hpp"
#include "jointqa/types.hpp"

namespace jointqa::metrics {

/// One row of a prediction file, spans in character coordinates.
struct PredictedAnswer {
  std::string question_id;
  std::size_t rank = 1;
  std::string doc_id;
  std::size_t start_char = 0;
  std::size_t end_char = 0;
  Scalar score = 0.0;
  bool no_answer = false;
};

struct QuestionResult {
  std::string question_id;
  Scalar f1_top1 = 0.0;
  std::map<std::size_t, Scalar> best_f1_at;  // K -> max F1 among top-K answers
  std::size_t doc_rank = 0;                  // 1-based rank of the gold doc; 0 = absent
  std::string error_class;                   // answerable questions only
};

struct EvalReport {
  Scalar ma_f1 = 0.0;                       // macro top-1 F1 (= F1@1)
  std::map<std::size_t, Scalar> f1_at;      // K -> macro max-F1@K, all questions
  std::map<std::size_t, Scalar> ha_f1_at;   // same, answerable questions only
  Scalar mrr = 0.0;
  std::map<std::size_t, Scalar> recall_at;
  std::map<std::string, std::size_t> error_histogram;
  std::vector<QuestionResult> per_question;
  std::size_t question_count = 0;
  std::size_t answerable_count = 0;
};

/// Token-overlap F1 between two inclusive token spans. Conventions: both
/// no-answer -> 1, exactly one no-answer -> 0, different documents -> 0.
Scalar span_f1(const std::optional<corpus::AnswerSpan>& pred,
               const std::optional<corpus::AnswerSpan>& gold);

/// Macro F1 family over per-question ranked F1 lists.
struct F1Summary {
  Scalar ma_f1 = 0.0;
  std::map<std::size_t, Scalar> f1_at;
  std::map<std::size_t, Scalar> ha_f1_at;
};
F1Summary macro_f1(const std::vector<std::vector<Scalar>>& ranked_f1s,
                   const std::vector<bool>& answerable, const std::vector<std::size_t>& ks);

/// doc_ranks: per answerable question, 1-based rank of its gold document
/// (0 when the ranking misses it entirely).
std::pair<Scalar, std::map<std::size_t, Scalar>> mrr_recall(const std::vector<std::size_t>& doc_ranks,
                                                            const std::vector<std::size_t>& ks);

/// Buckets one answerable question's top-1 prediction: correct_span,
/// span_too_small / span_too_large (strict containment on both ends),
/// span_mismatch (any other overlap, including boundary-sharing), wrong_doc.
/// Abstaining on an answerable question counts as wrong_doc.
std::string classify_error(const std::optional<corpus::AnswerSpan>& pred,
                           const corpus::AnswerSpan& gold);

/// Full evaluation of a prediction set against an ingested dataset.
/// `doc_rankings` (question_id -> ranked doc ids) feeds MRR/R@K; when a
/// question is missing there, the ranking is derived from the order in which
/// documents first appear in its answer rows.
EvalReport evaluate(const std::vector<PredictedAnswer>& rows, const corpus::Dataset& gold,
                    const std::vector<std::size_t>& ks,
                    const std::map<std::string, std::vector<std::string>>& doc_rankings = {});

std::vector<PredictedAnswer> read_predictions_jsonl(const std::string& path);
std::map<std::string, std::vector<std::string>> read_doc_rankings(const std::string& path);

std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);

}  // namespace jointqa::metrics
