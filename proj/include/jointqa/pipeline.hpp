#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "jointqa/corpus.hpp"
#include "jointqa/metrics.hpp"
#include "jointqa/model.hpp"
#include "jointqa/ranking.hpp"
#include "jointqa/training.hpp"

namespace jointqa::pipeline {

struct PredictOptions {
  ranking::StrategyConfig strategy;
  std::size_t top_k = 5;
  Scalar abstain_threshold = ranking::kNeverAbstain;
};

/// Scores every block of one question and turns the head outputs into
/// prediction records (spans in document token coordinates).
std::vector<ranking::PredictionRecord> question_records(const model::JointModel& model,
                                                        const encoder::ParameterSet& params,
                                                        const training::QuestionBlocks& question);

struct QuestionPrediction {
  std::string question_id;
  ranking::QuestionRanking ranking;
};

std::vector<QuestionPrediction> predict_dataset(const model::JointModel& model,
                                                const encoder::ParameterSet& params,
                                                const std::vector<training::QuestionBlocks>& questions,
                                                const PredictOptions& options);

/// Answer rows as JSON lines {question_id, rank, doc_id, start_char,
/// end_char, score, no_answer}; token spans are expanded to character
/// offsets against the dataset's documents.
void write_predictions(const std::filesystem::path& path,
                       const std::vector<QuestionPrediction>& predictions,
                       const corpus::Dataset& dataset);

/// Per-question ranked document ids as a JSON object, the MRR/R@K input.
void write_doc_rankings(const std::filesystem::path& path,
                        const std::vector<QuestionPrediction>& predictions);

/// In-memory evaluation (equivalent to writing the files and reading them
/// back through the metrics module).
metrics::EvalReport evaluate_predictions(const std::vector<QuestionPrediction>& predictions,
                                         const corpus::Dataset& dataset,
                                         const std::vector<std::size_t>& ks);

}  // namespace jointqa::pipeline
