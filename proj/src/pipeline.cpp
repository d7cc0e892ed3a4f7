#include "jointqa/pipeline.hpp"

#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "jointqa/serialize.hpp"

namespace jointqa::pipeline {

std::vector<ranking::PredictionRecord> question_records(const model::JointModel& model,
                                                        const encoder::ParameterSet& params,
                                                        const training::QuestionBlocks& question) {
  std::vector<ranking::PredictionRecord> records;
  records.reserve(question.blocks.size());
  for (const chunking::Block& block : question.blocks) {
    const model::BlockScores scores = model.score_block(params, block);
    ranking::PredictionRecord rec;
    rec.question_id = block.question_id;
    rec.doc_id = block.doc_id;
    rec.block_index = block.block_index;
    rec.p_s0 = scores.reader.p_start[0];
    rec.p_e0 = scores.reader.p_end[0];
    rec.p_dr = scores.p_dr;
    const auto doc_span = chunking::project_span_to_document(block, scores.span);
    if (doc_span.has_value()) {
      rec.span = corpus::AnswerSpan{block.doc_id, doc_span->first, doc_span->second};
      rec.p_s = scores.reader.p_start[static_cast<Eigen::Index>(scores.span.start)];
      rec.p_e = scores.reader.p_end[static_cast<Eigen::Index>(scores.span.end)];
    } else {
      rec.p_s = rec.p_s0;
      rec.p_e = rec.p_e0;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<QuestionPrediction> predict_dataset(const model::JointModel& model,
                                                const encoder::ParameterSet& params,
                                                const std::vector<training::QuestionBlocks>& questions,
                                                const PredictOptions& options) {
  std::vector<QuestionPrediction> out;
  out.reserve(questions.size());
  for (const training::QuestionBlocks& qb : questions) {
    QuestionPrediction qp;
    qp.question_id = qb.example->question.question_id;
    qp.ranking = ranking::rank_answers(question_records(model, params, qb), options.strategy,
                                       options.top_k, options.abstain_threshold);
    out.push_back(std::move(qp));
  }
  return out;
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<QuestionPrediction>& predictions,
                       const corpus::Dataset& dataset) {
  std::ostringstream out;
  for (const QuestionPrediction& qp : predictions) {
    std::size_t rank = 0;
    for (const ranking::PredictionRecord& rec : qp.ranking.answers) {
      ++rank;
      nlohmann::json j;
      j["question_id"] = qp.question_id;
      j["rank"] = rank;
      j["doc_id"] = rec.doc_id;
      if (rec.span.has_value()) {
        const corpus::Document& doc = dataset.document(rec.span->doc_id);
        const corpus::CharRange range =
            corpus::token_span_to_char_range(doc, rec.span->start, rec.span->end);
        j["start_char"] = range.begin;
        j["end_char"] = range.end;
        j["no_answer"] = false;
      } else {
        j["start_char"] = 0;
        j["end_char"] = 0;
        j["no_answer"] = true;
      }
      j["score"] = rec.score;
      out << j.dump() << '\n';
    }
  }
  serialize::atomic_write_file(path, out.str());
}

void write_doc_rankings(const std::filesystem::path& path,
                        const std::vector<QuestionPrediction>& predictions) {
  nlohmann::json j = nlohmann::json::object();
  for (const QuestionPrediction& qp : predictions) {
    nlohmann::json docs = nlohmann::json::array();
    for (const auto& [doc_id, score] : qp.ranking.documents) docs.push_back(doc_id);
    j[qp.question_id] = std::move(docs);
  }
  serialize::atomic_write_file(path, j.dump(2) + "\n");
}

metrics::EvalReport evaluate_predictions(const std::vector<QuestionPrediction>& predictions,
                                         const corpus::Dataset& dataset,
                                         const std::vector<std::size_t>& ks) {
  std::vector<metrics::PredictedAnswer> rows;
  std::map<std::string, std::vector<std::string>> doc_rankings;
  for (const QuestionPrediction& qp : predictions) {
    std::size_t rank = 0;
    for (const ranking::PredictionRecord& rec : qp.ranking.answers) {
      ++rank;
      metrics::PredictedAnswer row;
      row.question_id = qp.question_id;
      row.rank = rank;
      row.doc_id = rec.doc_id;
      row.score = rec.score;
      if (rec.span.has_value()) {
        const corpus::Document& doc = dataset.document(rec.span->doc_id);
        const corpus::CharRange range =
            corpus::token_span_to_char_range(doc, rec.span->start, rec.span->end);
        row.start_char = range.begin;
        row.end_char = range.end;
      } else {
        row.no_answer = true;
      }
      rows.push_back(std::move(row));
    }
    std::vector<std::string>& ranked_docs = doc_rankings[qp.question_id];
    for (const auto& [doc_id, score] : qp.ranking.documents) ranked_docs.push_back(doc_id);
  }
  return metrics::evaluate(rows, dataset, ks, doc_rankings);
}

}  // namespace jointqa::pipeline
