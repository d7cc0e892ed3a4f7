#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "jointqa/types.hpp"

namespace jointqa::synthetic {

/// Planted-pattern QA generator. Every question asks about a key token; its
/// gold document embeds that key followed by an answer span drawn from a
/// shared answer vocabulary. Negative candidates are other questions' gold
/// documents (real key+answer patterns with the wrong key) plus pure filler
/// documents, so document relevance requires matching the specific key, not
/// just spotting an answer-like pattern.
///
/// Keys, answer terms, and question-template words are shared across
/// domains; filler is split into a shared pool and a per-domain pool so two
/// domains overlap in roughly half of their term sets.
struct SyntheticConfig {
  std::string domain = "alpha";  // label, also the per-domain filler prefix
  std::size_t questions = 200;
  std::size_t pool_size = 20;

  std::size_t key_alphabet = 250;   // shared key tokens; must cover `questions`
  /// With unique keys each question gets its own key, so a model can succeed
  /// by memorizing key-document pairs. Allowing reuse (a small alphabet drawn
  /// with replacement) plants the same key in several documents, which makes
  /// literal key matching the only consistent relevance rule; candidate pools
  /// then exclude other documents planted with the question's own key.
  bool unique_keys = true;
  /// Copies of the key planted in the gold document. One copy sits directly
  /// before the answer span; extras land on random filler slots. More copies
  /// strengthen the lexical-match signal without changing which document is
  /// relevant.
  std::size_t key_repeats = 1;
  std::size_t shared_filler = 15;   // filler terms common to all domains
  std::size_t domain_filler = 250;  // filler terms unique to this domain
  std::size_t answer_vocab = 30;    // shared answer-payload terms

  std::size_t doc_tokens_min = 30;
  std::size_t doc_tokens_max = 55;
  std::size_t answer_len_min = 2;
  std::size_t answer_len_max = 7;
  std::size_t extra_filler_docs = 40;  // answer-free corpus documents
  Scalar unanswerable_fraction = 0.0;

  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticData {
  std::string questions_json;  // target-format question file
  std::string corpus_json;
};

SyntheticData generate(const SyntheticConfig& config);

/// Writes `<stem>.questions.json` and `<stem>.corpus.json` under `dir`.
void write_dataset(const std::filesystem::path& dir, const std::string& stem,
                   const SyntheticConfig& config);

}  // namespace jointqa::synthetic
