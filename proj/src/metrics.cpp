#include "jointqa/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace jointqa::metrics {

namespace {

using nlohmann::json;

std::size_t span_len(const corpus::AnswerSpan& s) { return s.end - s.start + 1; }

std::vector<std::size_t> normalize_ks(const std::vector<std::size_t>& ks) {
  std::set<std::size_t> uniq(ks.begin(), ks.end());
  uniq.erase(0);
  if (uniq.empty()) uniq.insert(1);
  return {uniq.begin(), uniq.end()};
}

}  // namespace

Scalar span_f1(const std::optional<corpus::AnswerSpan>& pred,
               const std::optional<corpus::AnswerSpan>& gold) {
  if (!pred.has_value() && !gold.has_value()) return 1.0;
  if (pred.has_value() != gold.has_value()) return 0.0;
  if (pred->doc_id != gold->doc_id) return 0.0;
  const std::size_t lo = std::max(pred->start, gold->start);
  const std::size_t hi = std::min(pred->end, gold->end);
  if (hi < lo) return 0.0;
  const Scalar overlap = static_cast<Scalar>(hi - lo + 1);
  const Scalar precision = overlap / static_cast<Scalar>(span_len(*pred));
  const Scalar recall = overlap / static_cast<Scalar>(span_len(*gold));
  return 2.0 * precision * recall / (precision + recall);
}

F1Summary macro_f1(const std::vector<std::vector<Scalar>>& ranked_f1s,
                   const std::vector<bool>& answerable, const std::vector<std::size_t>& ks) {
  if (ranked_f1s.size() != answerable.size()) {
    throw std::invalid_argument("macro_f1: answerable flags do not match question count");
  }
  const std::vector<std::size_t> kset = normalize_ks(ks);
  F1Summary out;
  if (ranked_f1s.empty()) {
    for (std::size_t k : kset) out.f1_at[k] = out.ha_f1_at[k] = 0.0;
    return out;
  }
  std::size_t n_ha = 0;
  for (bool a : answerable) n_ha += a ? 1 : 0;
  for (std::size_t k : kset) {
    out.f1_at[k] = 0.0;
    out.ha_f1_at[k] = 0.0;
  }
  for (std::size_t i = 0; i < ranked_f1s.size(); ++i) {
    const std::vector<Scalar>& f1s = ranked_f1s[i];
    if (f1s.empty()) {
      throw std::invalid_argument("macro_f1: question " + std::to_string(i) +
                                  " has no predictions");
    }
    out.ma_f1 += f1s.front();
    for (std::size_t k : kset) {
      const std::size_t take = std::min(k, f1s.size());
      const Scalar best = *std::max_element(f1s.begin(), f1s.begin() + take);
      out.f1_at[k] += best;
      if (answerable[i]) out.ha_f1_at[k] += best;
    }
  }
  const Scalar inv_n = 1.0 / static_cast<Scalar>(ranked_f1s.size());
  out.ma_f1 *= inv_n;
  for (std::size_t k : kset) {
    out.f1_at[k] *= inv_n;
    out.ha_f1_at[k] = n_ha == 0 ? 0.0 : out.ha_f1_at[k] / static_cast<Scalar>(n_ha);
  }
  return out;
}

std::pair<Scalar, std::map<std::size_t, Scalar>> mrr_recall(const std::vector<std::size_t>& doc_ranks,
                                                            const std::vector<std::size_t>& ks) {
  const std::vector<std::size_t> kset = normalize_ks(ks);
  std::map<std::size_t, Scalar> recall;
  for (std::size_t k : kset) recall[k] = 0.0;
  if (doc_ranks.empty()) return {0.0, recall};
  Scalar mrr = 0.0;
  for (std::size_t rank : doc_ranks) {
    if (rank == 0) continue;  // gold document absent from the ranking
    mrr += 1.0 / static_cast<Scalar>(rank);
    for (std::size_t k : kset) {
      if (rank <= k) recall[k] += 1.0;
    }
  }
  const Scalar inv_n = 1.0 / static_cast<Scalar>(doc_ranks.size());
  mrr *= inv_n;
  for (std::size_t k : kset) recall[k] *= inv_n;
  return {mrr, recall};
}

std::string classify_error(const std::optional<corpus::AnswerSpan>& pred,
                           const corpus::AnswerSpan& gold) {
  if (!pred.has_value() || pred->doc_id != gold.doc_id) return "wrong_doc";
  if (pred->start == gold.start && pred->end == gold.end) return "correct_span";
  if (pred->start > gold.start && pred->end < gold.end) return "span_too_small";
  if (pred->start < gold.start && pred->end > gold.end) return "span_too_large";
  return "span_mismatch";
}

namespace {

struct ParsedPred {
  std::optional<corpus::AnswerSpan> span;
  bool parse_failed = false;
  std::string doc_id;  // as written in the row, even when conversion fails
};

ParsedPred to_token_span(const PredictedAnswer& row, const corpus::Dataset& gold) {
  ParsedPred out;
  out.doc_id = row.doc_id;
  if (row.no_answer) return out;
  try {
    const corpus::Document& doc = gold.document(row.doc_id);
    auto [start_tok, end_tok] = corpus::char_span_to_token_span(doc, row.start_char, row.end_char);
    out.span = corpus::AnswerSpan{row.doc_id, start_tok, end_tok};
  } catch (const std::exception&) {
    out.parse_failed = true;
  }
  return out;
}

}  // namespace

EvalReport evaluate(const std::vector<PredictedAnswer>& rows, const corpus::Dataset& gold,
                    const std::vector<std::size_t>& ks,
                    const std::map<std::string, std::vector<std::string>>& doc_rankings) {
  std::map<std::string, std::vector<const PredictedAnswer*>> by_question;
  for (const PredictedAnswer& row : rows) by_question[row.question_id].push_back(&row);
  for (auto& [qid, qrows] : by_question) {
    std::sort(qrows.begin(), qrows.end(),
              [](const PredictedAnswer* a, const PredictedAnswer* b) { return a->rank < b->rank; });
  }

  const std::vector<std::size_t> kset = normalize_ks(ks);
  EvalReport report;
  report.question_count = gold.examples.size();
  std::vector<std::vector<Scalar>> ranked_f1s;
  std::vector<bool> answerable;
  std::vector<std::size_t> doc_ranks;  // answerable questions only

  for (const corpus::QAExample& ex : gold.examples) {
    const std::string& qid = ex.question.question_id;
    auto it = by_question.find(qid);
    if (it == by_question.end() || it->second.empty()) {
      throw std::runtime_error("question '" + qid + "' has no prediction rows");
    }
    const std::vector<const PredictedAnswer*>& qrows = it->second;

    QuestionResult qr;
    qr.question_id = qid;
    std::vector<Scalar> f1s;
    f1s.reserve(qrows.size());
    std::vector<ParsedPred> parsed;
    parsed.reserve(qrows.size());
    for (const PredictedAnswer* row : qrows) {
      parsed.push_back(to_token_span(*row, gold));
      const ParsedPred& p = parsed.back();
      f1s.push_back(p.parse_failed ? 0.0 : span_f1(p.span, ex.gold));
    }
    qr.f1_top1 = f1s.front();
    for (std::size_t k : kset) {
      const std::size_t take = std::min(k, f1s.size());
      qr.best_f1_at[k] = *std::max_element(f1s.begin(), f1s.begin() + take);
    }

    if (ex.answerable) {
      report.answerable_count += 1;

      // Rank of the gold document, from the explicit ranking when given,
      // otherwise from first appearance in the answer rows.
      std::vector<std::string> ranking;
      if (auto rit = doc_rankings.find(qid); rit != doc_rankings.end()) {
        ranking = rit->second;
      } else {
        for (const PredictedAnswer* row : qrows) {
          if (!row->doc_id.empty() &&
              std::find(ranking.begin(), ranking.end(), row->doc_id) == ranking.end()) {
            ranking.push_back(row->doc_id);
          }
        }
      }
      const auto pos = std::find(ranking.begin(), ranking.end(), ex.gold->doc_id);
      qr.doc_rank = pos == ranking.end()
                        ? 0
                        : static_cast<std::size_t>(std::distance(ranking.begin(), pos)) + 1;
      doc_ranks.push_back(qr.doc_rank);

      const ParsedPred& top = parsed.front();
      if (top.parse_failed) {
        qr.error_class = (top.doc_id == ex.gold->doc_id) ? "span_mismatch" : "wrong_doc";
      } else {
        qr.error_class = classify_error(top.span, *ex.gold);
      }
      report.error_histogram[qr.error_class] += 1;
    }

    ranked_f1s.push_back(std::move(f1s));
    answerable.push_back(ex.answerable);
    report.per_question.push_back(std::move(qr));
  }

  const F1Summary f1 = macro_f1(ranked_f1s, answerable, kset);
  report.ma_f1 = f1.ma_f1;
  report.f1_at = f1.f1_at;
  report.ha_f1_at = f1.ha_f1_at;
  const auto [mrr, recall] = mrr_recall(doc_ranks, kset);
  report.mrr = mrr;
  report.recall_at = recall;
  return report;
}

std::vector<PredictedAnswer> read_predictions_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions: " + path);
  std::vector<PredictedAnswer> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("predictions line " + std::to_string(lineno) + ": " + e.what());
    }
    for (const char* field : {"question_id", "rank", "doc_id", "start_char", "end_char", "score",
                              "no_answer"}) {
      if (!j.contains(field)) {
        throw std::runtime_error("predictions line " + std::to_string(lineno) +
                                 ": missing field '" + field + "'");
      }
    }
    PredictedAnswer row;
    row.question_id = j["question_id"].get<std::string>();
    row.rank = j["rank"].get<std::size_t>();
    row.doc_id = j["doc_id"].get<std::string>();
    row.start_char = j["start_char"].get<std::size_t>();
    row.end_char = j["end_char"].get<std::size_t>();
    row.score = j["score"].get<Scalar>();
    row.no_answer = j["no_answer"].get<bool>();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::map<std::string, std::vector<std::string>> read_doc_rankings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open document ranking file: " + path);
  json j = json::parse(in);
  if (!j.is_object()) throw std::runtime_error("document ranking file must be a JSON object");
  std::map<std::string, std::vector<std::string>> out;
  for (auto& [qid, docs] : j.items()) {
    out[qid] = docs.get<std::vector<std::string>>();
  }
  return out;
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["ma_f1"] = report.ma_f1;
  for (const auto& [k, v] : report.f1_at) j["f1_at"][std::to_string(k)] = v;
  for (const auto& [k, v] : report.ha_f1_at) j["ha_f1_at"][std::to_string(k)] = v;
  j["mrr"] = report.mrr;
  for (const auto& [k, v] : report.recall_at) j["recall_at"][std::to_string(k)] = v;
  j["question_count"] = report.question_count;
  j["answerable_count"] = report.answerable_count;
  for (const auto& [cls, n] : report.error_histogram) j["error_histogram"][cls] = n;
  j["per_question"] = json::array();
  for (const QuestionResult& qr : report.per_question) {
    json q;
    q["question_id"] = qr.question_id;
    q["f1_top1"] = qr.f1_top1;
    for (const auto& [k, v] : qr.best_f1_at) q["best_f1_at"][std::to_string(k)] = v;
    q["doc_rank"] = qr.doc_rank;
    if (!qr.error_class.empty()) q["error_class"] = qr.error_class;
    j["per_question"].push_back(std::move(q));
  }
  return j.dump(2);
}

std::string report_to_table(const EvalReport& report) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "questions: " << report.question_count << " (" << report.answerable_count
      << " answerable)\n";
  out << "Ma-F1:  " << report.ma_f1 << "\n";
  for (const auto& [k, v] : report.f1_at) out << "F1@" << k << ":   " << v << "\n";
  for (const auto& [k, v] : report.ha_f1_at) out << "HA_F1@" << k << ": " << v << "\n";
  out << "MRR:    " << report.mrr << "\n";
  for (const auto& [k, v] : report.recall_at) out << "R@" << k << ":    " << v << "\n";
  if (!report.error_histogram.empty()) {
    out << "errors:";
    for (const auto& [cls, n] : report.error_histogram) out << " " << cls << "=" << n;
    out << "\n";
  }
  return out.str();
}

}  // namespace jointqa::metrics
