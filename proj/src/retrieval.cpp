#include "jointqa/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace jointqa::retrieval {

InvertedIndex build_index(const std::map<std::string, corpus::Document>& documents) {
  if (documents.empty()) {
    throw std::invalid_argument("build_index: empty corpus");
  }
  InvertedIndex index;
  std::size_t total_len = 0;
  for (const auto& [doc_id, doc] : documents) {
    std::map<std::string, std::size_t> tf;
    for (const auto& tok : doc.tokens) {
      ++tf[corpus::lowercase_ascii(tok)];
    }
    for (const auto& [term, freq] : tf) {
      index.postings[term].push_back(Posting{doc_id, freq});
    }
    index.doc_lengths[doc_id] = doc.tokens.size();
    total_len += doc.tokens.size();
  }
  index.doc_count = documents.size();
  index.avg_doc_length = static_cast<double>(total_len) / static_cast<double>(index.doc_count);
  return index;
}

double bm25_term_score(std::size_t tf, std::size_t df, std::size_t doc_len,
                       double avg_doc_len, std::size_t doc_count, const Bm25Params& params) {
  // Lucene-style idf, always nonnegative.
  double n = static_cast<double>(doc_count);
  double dfd = static_cast<double>(df);
  double idf = std::log(1.0 + (n - dfd + 0.5) / (dfd + 0.5));
  double f = static_cast<double>(tf);
  double norm = params.k1 * (1.0 - params.b + params.b * static_cast<double>(doc_len) / avg_doc_len);
  return idf * f * (params.k1 + 1.0) / (f + norm);
}

std::vector<ScoredDoc> retrieve(const InvertedIndex& index,
                                const std::vector<std::string>& query_tokens, std::size_t k,
                                const RetrieveOptions& options) {
  if (k < 1) {
    throw std::invalid_argument("retrieve: k must be >= 1");
  }
  // Duplicate query terms score once per occurrence.
  std::unordered_map<std::string, double> scores;
  for (const auto& raw : query_tokens) {
    std::string term = corpus::lowercase_ascii(raw);
    auto it = index.postings.find(term);
    if (it == index.postings.end()) continue;
    std::size_t df = it->second.size();
    for (const Posting& p : it->second) {
      scores[p.doc_id] += bm25_term_score(p.term_frequency, df, index.doc_lengths.at(p.doc_id),
                                          index.avg_doc_length, index.doc_count, options.bm25);
    }
  }
  std::vector<ScoredDoc> ranked;
  ranked.reserve(scores.size());
  for (const auto& [doc_id, score] : scores) {
    ranked.push_back(ScoredDoc{doc_id, score});
  }
  std::sort(ranked.begin(), ranked.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  if (ranked.size() > k) {
    ranked.resize(k);
  } else if (options.pad_to_k && ranked.size() < k) {
    // doc_lengths is sorted by id; fill with lowest ids not already present.
    for (const auto& [doc_id, _] : index.doc_lengths) {
      if (ranked.size() >= k) break;
      bool present = std::any_of(ranked.begin(), ranked.end(),
                                 [&](const ScoredDoc& s) { return s.doc_id == doc_id; });
      if (!present) ranked.push_back(ScoredDoc{doc_id, 0.0});
    }
  }
  return ranked;
}

std::vector<std::string> query_tokens(const corpus::Question& question, bool title_only) {
  if (title_only) {
    return corpus::tokenize(question.title).first;
  }
  std::vector<std::string> toks;
  for (const auto& t : question.tokens) {
    if (t != "[SEP]") toks.push_back(t);
  }
  return toks;
}

}  // namespace jointqa::retrieval
