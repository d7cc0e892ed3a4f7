#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "jointqa/corpus.hpp"

namespace jointqa::retrieval {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct Posting {
  std::string doc_id;
  std::size_t term_frequency = 0;
};

struct InvertedIndex {
  std::map<std::string, std::vector<Posting>> postings; // term (lowercased) -> postings
  std::map<std::string, std::size_t> doc_lengths;
  double avg_doc_length = 0.0;
  std::size_t doc_count = 0;
};

struct RetrieveOptions {
  Bm25Params bm25;
  // Pad the result list with lowest-id unmatched docs up to k so downstream
  // batch shapes stay stable.
  bool pad_to_k = true;
};

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;
};

InvertedIndex build_index(const std::map<std::string, corpus::Document>& documents);

/// BM25 term score against one document, with index-level stats held fixed.
double bm25_term_score(std::size_t tf, std::size_t df, std::size_t doc_len,
                       double avg_doc_len, std::size_t doc_count, const Bm25Params& params);

/// Top-k documents for the query tokens, sorted by score descending with
/// doc_id ascending tie-breaks.
std::vector<ScoredDoc> retrieve(const InvertedIndex& index,
                                const std::vector<std::string>& query_tokens, std::size_t k,
                                const RetrieveOptions& options = {});

/// Query string for a question: title+body by default.
std::vector<std::string> query_tokens(const corpus::Question& question, bool title_only = false);

}  // namespace jointqa::retrieval
