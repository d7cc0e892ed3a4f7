#include "jointqa/ranking.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <tuple>

namespace jointqa::ranking {

Strategy parse_strategy(const std::string& name) {
  if (name == "ours_with_doc") return Strategy::ours_with_doc;
  if (name == "ours_without_doc") return Strategy::ours_without_doc;
  if (name == "wklm") return Strategy::wklm;
  if (name == "mp_bert") return Strategy::mp_bert;
  throw std::invalid_argument("unknown ranking strategy '" + name + "'");
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::ours_with_doc: return "ours_with_doc";
    case Strategy::ours_without_doc: return "ours_without_doc";
    case Strategy::wklm: return "wklm";
    case Strategy::mp_bert: return "mp_bert";
  }
  throw std::invalid_argument("unknown ranking strategy");
}

Scalar reading_score(const PredictionRecord& record) {
  return (record.p_s + record.p_e) - (record.p_s0 + record.p_e0);
}

Scalar joint_score(const PredictionRecord& record, const StrategyConfig& config) {
  if (config.alpha < 0.0 || config.alpha > 1.0) {
    throw std::invalid_argument("alpha must lie in [0, 1]");
  }
  switch (config.strategy) {
    case Strategy::ours_with_doc:
      return config.alpha * record.p_dr + (1.0 - config.alpha) * reading_score(record);
    case Strategy::ours_without_doc:
      return reading_score(record);
    case Strategy::wklm:
      return config.alpha * record.p_dr + record.p_s + record.p_e;
    case Strategy::mp_bert:
      return record.p_dr * record.p_s * record.p_e;
  }
  throw std::invalid_argument("unknown ranking strategy");
}

namespace {

PredictionRecord scored(PredictionRecord record, const StrategyConfig& config) {
  record.score = joint_score(record, config);
  record.strategy = strategy_name(config.strategy);
  return record;
}

struct CandidateKey {
  bool no_answer;
  std::string doc_id;
  std::size_t start, end;

  bool operator<(const CandidateKey& o) const {
    return std::tie(no_answer, doc_id, start, end) < std::tie(o.no_answer, o.doc_id, o.start, o.end);
  }
};

bool better_candidate(const PredictionRecord& a, const PredictionRecord& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.block_index < b.block_index;
}

}  // namespace

PredictionRecord aggregate_document(const std::vector<PredictionRecord>& records,
                                    const StrategyConfig& config) {
  if (records.empty()) {
    throw std::invalid_argument("aggregate_document: no block records for document");
  }
  PredictionRecord best = scored(records.front(), config);
  for (std::size_t i = 1; i < records.size(); ++i) {
    PredictionRecord cand = scored(records[i], config);
    if (better_candidate(cand, best)) best = std::move(cand);
  }
  return best;
}

QuestionRanking rank_answers(const std::vector<PredictionRecord>& records,
                             const StrategyConfig& config, std::size_t k,
                             Scalar abstain_threshold) {
  if (k == 0) throw std::invalid_argument("rank_answers: k must be positive");
  QuestionRanking out;
  if (records.empty()) return out;

  // Collapse to one candidate per distinct (doc, span); all no-answer blocks
  // share a single key. Per-document maxima feed the document ranking.
  std::map<CandidateKey, PredictionRecord> candidates;
  std::map<std::string, PredictionRecord> doc_best;
  for (const PredictionRecord& raw : records) {
    PredictionRecord rec = scored(raw, config);
    CandidateKey key{!rec.span.has_value(),
                     rec.span ? rec.span->doc_id : std::string{},
                     rec.span ? rec.span->start : 0,
                     rec.span ? rec.span->end : 0};
    auto [it, inserted] = candidates.try_emplace(key, rec);
    if (!inserted && better_candidate(rec, it->second)) it->second = rec;

    auto [dit, dinserted] = doc_best.try_emplace(rec.doc_id, rec);
    if (!dinserted && better_candidate(rec, dit->second)) dit->second = rec;
  }

  std::vector<PredictionRecord> ordered;
  ordered.reserve(candidates.size());
  for (auto& [key, rec] : candidates) ordered.push_back(std::move(rec));
  std::sort(ordered.begin(), ordered.end(),
            [](const PredictionRecord& a, const PredictionRecord& b) {
              const std::size_t a_start = a.span ? a.span->start : 0;
              const std::size_t b_start = b.span ? b.span->start : 0;
              const std::size_t a_end = a.span ? a.span->end : 0;
              const std::size_t b_end = b.span ? b.span->end : 0;
              const bool a_real = a.span.has_value();
              const bool b_real = b.span.has_value();
              // Total order over deduplicated candidates: score descending,
              // then document, span position, and real-before-no-answer, so
              // the top-k cut never depends on sort internals.
              return std::tie(b.score, a.doc_id, a_start, a_end, b_real) <
                     std::tie(a.score, b.doc_id, b_start, b_end, a_real);
            });

  // Abstain when even the best candidate is not confident enough: promote the
  // existing no-answer entry if there is one, otherwise synthesize one.
  if (!ordered.empty() && ordered.front().span.has_value() &&
      ordered.front().score < abstain_threshold) {
    auto na = std::find_if(ordered.begin(), ordered.end(),
                           [](const PredictionRecord& r) { return !r.span.has_value(); });
    if (na != ordered.end()) {
      std::rotate(ordered.begin(), na, na + 1);
    } else {
      PredictionRecord abstain = ordered.front();
      abstain.span.reset();
      abstain.p_s = abstain.p_s0;
      abstain.p_e = abstain.p_e0;
      ordered.insert(ordered.begin(), scored(std::move(abstain), config));
    }
  }

  if (ordered.size() > k) ordered.resize(k);
  out.answers = std::move(ordered);

  out.documents.reserve(doc_best.size());
  for (const auto& [doc_id, rec] : doc_best) out.documents.emplace_back(doc_id, rec.score);
  std::sort(out.documents.begin(), out.documents.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  return out;
}

}  // namespace jointqa::ranking
