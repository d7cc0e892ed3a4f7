#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "jointqa/types.hpp"

namespace jointqa::corpus {

/// Half-open character range [begin, end) into the source text.
struct CharRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const CharRange&) const = default;
};

struct Document {
  std::string doc_id;
  std::string text;
  std::vector<std::string> tokens;     // raw substrings of text
  std::vector<CharRange> char_offsets; // one per token, strictly increasing
};

struct Question {
  std::string question_id;
  std::string title;
  std::string body;
  std::vector<std::string> tokens; // title tokens, "[SEP]", body tokens
};

/// Inclusive token-index span inside one document.
struct AnswerSpan {
  std::string doc_id;
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const AnswerSpan&) const = default;
};

struct QAExample {
  Question question;
  std::vector<std::string> candidate_doc_ids;
  std::optional<AnswerSpan> gold;
  bool answerable = false;
};

enum class Split { train, validation, test };
enum class DomainTag { auxiliary, target };

struct Dataset {
  std::string name;
  Split split = Split::train;
  std::vector<QAExample> examples;
  std::map<std::string, Document> documents;
  DomainTag domain_tag = DomainTag::target;

  std::size_t answerable_count() const;
  const Document& document(const std::string& doc_id) const;
};

enum class DatasetFormat { target_qa_json, auxiliary_qa_json };

struct IngestOptions {
  // Auxiliary records name a single gold document; candidate pools are
  // filled with neighbouring doc_ids (sorted order, cyclic) up to this size.
  std::size_t aux_pool_size = 20;
};

/// Lowercased whitespace-plus-punctuation tokenizer. Token strings are the
/// raw substrings of the input; lowercasing happens at vocabulary lookup so
/// offsets always round-trip: text[offsets[i]) == tokens[i].
std::pair<std::vector<std::string>, std::vector<CharRange>> tokenize(const std::string& text);

/// Populates tokens/char_offsets from doc.text.
void tokenize_document(Document& doc);

/// Title and body joined by a single "[SEP]" token.
std::vector<std::string> question_tokens(const std::string& title, const std::string& body);

/// Minimal token range covering the character range [start_char, end_char).
/// Throws if the range covers no token (whitespace only) or is out of bounds.
std::pair<std::size_t, std::size_t> char_span_to_token_span(const Document& doc,
                                                            std::size_t start_char,
                                                            std::size_t end_char);

/// Expands a token span back to the covering character range.
CharRange token_span_to_char_range(const Document& doc, std::size_t start_tok, std::size_t end_tok);

Dataset ingest_dataset(const std::string& questions_path, const std::string& corpus_path,
                       DatasetFormat format, const IngestOptions& options = {});

/// Same as ingest_dataset but over already-parsed JSON strings (used by tests
/// and the synthetic generator).
Dataset ingest_dataset_from_strings(const std::string& questions_json, const std::string& corpus_json,
                                    DatasetFormat format, const IngestOptions& options = {});

/// Corpus-built vocabulary with reserved special ids. Terms are stored
/// lowercased; lookup of an unknown term yields kUnkId.
class Vocabulary {
 public:
  static Vocabulary build(const std::vector<const Dataset*>& datasets);
  static Vocabulary from_terms(std::vector<std::string> sorted_terms);

  TokenId to_id(const std::string& raw_token) const;
  std::size_t size() const { return kFirstVocabId + terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, TokenId> ids_;
};

std::string lowercase_ascii(std::string s);

}  // namespace jointqa::corpus
