#include "jointqa/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace jointqa::corpus {

using nlohmann::json;

namespace {

bool is_space_byte(unsigned char c) { return std::isspace(c) != 0; }

// Word bytes form runs; any other printable byte is a single-char token.
// Bytes >= 0x80 count as word bytes so UTF-8 sequences are never split.
bool is_word_byte(unsigned char c) {
  return std::isalnum(c) != 0 || c == '_' || c >= 0x80;
}

json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw std::runtime_error(what + ": not valid JSON");
  }
  return j;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_json(buf.str(), path);
}

const json& require_field(const json& rec, const char* field, const char* kind, std::size_t index) {
  auto it = rec.find(field);
  if (it == rec.end()) {
    throw std::runtime_error(std::string(kind) + " record " + std::to_string(index) +
                             ": missing field '" + field + "'");
  }
  return *it;
}

std::map<std::string, Document> load_corpus(const json& arr) {
  if (!arr.is_array()) {
    throw std::runtime_error("corpus file: expected a JSON array");
  }
  std::map<std::string, Document> docs;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& rec = arr[i];
    Document doc;
    doc.doc_id = require_field(rec, "doc_id", "corpus", i).get<std::string>();
    doc.text = require_field(rec, "text", "corpus", i).get<std::string>();
    tokenize_document(doc);
    docs[doc.doc_id] = std::move(doc);
  }
  return docs;
}

AnswerSpan answer_from_chars(const Document& doc, std::size_t start_char, std::size_t end_char,
                             std::size_t record_index) {
  try {
    auto [s, e] = char_span_to_token_span(doc, start_char, end_char);
    return AnswerSpan{doc.doc_id, s, e};
  } catch (const std::exception& ex) {
    throw std::runtime_error("question record " + std::to_string(record_index) +
                             ": bad answer span: " + ex.what());
  }
}

}  // namespace

std::pair<std::vector<std::string>, std::vector<CharRange>> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::vector<CharRange> offsets;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (is_space_byte(c)) {
      ++i;
      continue;
    }
    std::size_t begin = i;
    if (is_word_byte(c)) {
      while (i < n && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    } else {
      ++i; // punctuation: one token per byte
    }
    tokens.push_back(text.substr(begin, i - begin));
    offsets.push_back(CharRange{begin, i});
  }
  return {std::move(tokens), std::move(offsets)};
}

void tokenize_document(Document& doc) {
  auto [tokens, offsets] = tokenize(doc.text);
  doc.tokens = std::move(tokens);
  doc.char_offsets = std::move(offsets);
}

std::vector<std::string> question_tokens(const std::string& title, const std::string& body) {
  std::vector<std::string> out = tokenize(title).first;
  auto body_toks = tokenize(body).first;
  if (!out.empty() && !body_toks.empty()) {
    out.push_back("[SEP]");
  }
  out.insert(out.end(), body_toks.begin(), body_toks.end());
  return out;
}

std::pair<std::size_t, std::size_t> char_span_to_token_span(const Document& doc,
                                                            std::size_t start_char,
                                                            std::size_t end_char) {
  if (start_char > end_char || end_char > doc.text.size()) {
    throw std::invalid_argument("char span (" + std::to_string(start_char) + "," +
                                std::to_string(end_char) + ") out of range for doc '" +
                                doc.doc_id + "'");
  }
  std::size_t first = doc.char_offsets.size();
  std::size_t last = 0;
  bool any = false;
  for (std::size_t t = 0; t < doc.char_offsets.size(); ++t) {
    const CharRange& r = doc.char_offsets[t];
    if (r.begin < end_char && r.end > start_char) { // nonempty intersection
      if (!any) first = t;
      last = t;
      any = true;
    }
  }
  if (!any) {
    throw std::runtime_error("char span (" + std::to_string(start_char) + "," +
                             std::to_string(end_char) + ") covers no token in doc '" +
                             doc.doc_id + "'");
  }
  return {first, last};
}

CharRange token_span_to_char_range(const Document& doc, std::size_t start_tok, std::size_t end_tok) {
  if (start_tok > end_tok || end_tok >= doc.char_offsets.size()) {
    throw std::invalid_argument("token span out of range for doc '" + doc.doc_id + "'");
  }
  return CharRange{doc.char_offsets[start_tok].begin, doc.char_offsets[end_tok].end};
}

std::size_t Dataset::answerable_count() const {
  return static_cast<std::size_t>(
      std::count_if(examples.begin(), examples.end(), [](const QAExample& e) { return e.answerable; }));
}

const Document& Dataset::document(const std::string& doc_id) const {
  auto it = documents.find(doc_id);
  if (it == documents.end()) {
    throw std::runtime_error("unknown doc_id '" + doc_id + "' in dataset '" + name + "'");
  }
  return it->second;
}

namespace {

Dataset ingest_target(const json& questions, std::map<std::string, Document> docs,
                      const IngestOptions&) {
  Dataset ds;
  ds.domain_tag = DomainTag::target;
  ds.documents = std::move(docs);
  std::set<std::string> dangling;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const json& rec = questions[i];
    QAExample ex;
    ex.question.question_id = require_field(rec, "question_id", "question", i).get<std::string>();
    ex.question.title = require_field(rec, "title", "question", i).get<std::string>();
    ex.question.body = require_field(rec, "body", "question", i).get<std::string>();
    ex.question.tokens = question_tokens(ex.question.title, ex.question.body);
    if (ex.question.tokens.empty()) {
      throw std::runtime_error("question record " + std::to_string(i) + ": empty question text");
    }
    for (const auto& id : require_field(rec, "candidate_doc_ids", "question", i)) {
      ex.candidate_doc_ids.push_back(id.get<std::string>());
      if (!ds.documents.contains(ex.candidate_doc_ids.back())) {
        dangling.insert(ex.candidate_doc_ids.back());
      }
    }
    const json& ans = require_field(rec, "answer", "question", i);
    if (!ans.is_null()) {
      std::string doc_id = require_field(ans, "doc_id", "answer", i).get<std::string>();
      if (std::find(ex.candidate_doc_ids.begin(), ex.candidate_doc_ids.end(), doc_id) ==
          ex.candidate_doc_ids.end()) {
        throw std::runtime_error("question record " + std::to_string(i) + ": answer doc_id '" +
                                 doc_id + "' not in candidate_doc_ids");
      }
      if (ds.documents.contains(doc_id)) {
        ex.gold = answer_from_chars(ds.documents.at(doc_id),
                                    require_field(ans, "start_char", "answer", i).get<std::size_t>(),
                                    require_field(ans, "end_char", "answer", i).get<std::size_t>(), i);
        ex.answerable = true;
      } else {
        dangling.insert(doc_id);
      }
    }
    ds.examples.push_back(std::move(ex));
  }
  if (!dangling.empty()) {
    std::string msg = "dangling doc_ids:";
    for (const auto& id : dangling) msg += " " + id;
    throw std::runtime_error(msg);
  }
  return ds;
}

Dataset ingest_auxiliary(const json& questions, std::map<std::string, Document> docs,
                         const IngestOptions& options) {
  Dataset ds;
  ds.domain_tag = DomainTag::auxiliary;
  ds.documents = std::move(docs);
  std::vector<std::string> sorted_ids;
  sorted_ids.reserve(ds.documents.size());
  for (const auto& [id, _] : ds.documents) sorted_ids.push_back(id); // already sorted (std::map)
  std::set<std::string> dangling;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const json& rec = questions[i];
    QAExample ex;
    ex.question.question_id = require_field(rec, "question_id", "question", i).get<std::string>();
    ex.question.body = require_field(rec, "text", "question", i).get<std::string>();
    ex.question.tokens = question_tokens("", ex.question.body);
    if (ex.question.tokens.empty()) {
      throw std::runtime_error("question record " + std::to_string(i) + ": empty question text");
    }
    std::string gold_doc = require_field(rec, "doc_id", "question", i).get<std::string>();
    if (!ds.documents.contains(gold_doc)) {
      dangling.insert(gold_doc);
      continue;
    }
    // Pool: the paired document plus its cyclic successors in sorted id order.
    std::size_t pos = static_cast<std::size_t>(
        std::lower_bound(sorted_ids.begin(), sorted_ids.end(), gold_doc) - sorted_ids.begin());
    std::size_t pool = std::min(options.aux_pool_size, sorted_ids.size());
    for (std::size_t k = 0; k < pool; ++k) {
      ex.candidate_doc_ids.push_back(sorted_ids[(pos + k) % sorted_ids.size()]);
    }
    const json& ans = require_field(rec, "answer", "question", i);
    if (!ans.is_null()) {
      ex.gold = answer_from_chars(ds.documents.at(gold_doc),
                                  require_field(ans, "start_char", "answer", i).get<std::size_t>(),
                                  require_field(ans, "end_char", "answer", i).get<std::size_t>(), i);
      ex.answerable = true;
    }
    ds.examples.push_back(std::move(ex));
  }
  if (!dangling.empty()) {
    std::string msg = "dangling doc_ids:";
    for (const auto& id : dangling) msg += " " + id;
    throw std::runtime_error(msg);
  }
  return ds;
}

Dataset ingest_parsed(const json& questions, const json& corpus, DatasetFormat format,
                      const IngestOptions& options) {
  if (!questions.is_array()) {
    throw std::runtime_error("questions file: expected a JSON array");
  }
  auto docs = load_corpus(corpus);
  Dataset ds = format == DatasetFormat::target_qa_json
                   ? ingest_target(questions, std::move(docs), options)
                   : ingest_auxiliary(questions, std::move(docs), options);
  return ds;
}

}  // namespace

Dataset ingest_dataset(const std::string& questions_path, const std::string& corpus_path,
                       DatasetFormat format, const IngestOptions& options) {
  Dataset ds = ingest_parsed(load_json_file(questions_path), load_json_file(corpus_path), format,
                             options);
  ds.name = questions_path;
  return ds;
}

Dataset ingest_dataset_from_strings(const std::string& questions_json, const std::string& corpus_json,
                                    DatasetFormat format, const IngestOptions& options) {
  Dataset ds = ingest_parsed(parse_json(questions_json, "questions"),
                             parse_json(corpus_json, "corpus"), format, options);
  ds.name = "<memory>";
  return ds;
}

std::string lowercase_ascii(std::string s) {
  for (char& c : s) {
    unsigned char u = static_cast<unsigned char>(c);
    if (u < 0x80) c = static_cast<char>(std::tolower(u));
  }
  return s;
}

Vocabulary Vocabulary::build(const std::vector<const Dataset*>& datasets) {
  std::set<std::string> terms;
  for (const Dataset* ds : datasets) {
    for (const auto& [_, doc] : ds->documents) {
      for (const auto& tok : doc.tokens) terms.insert(lowercase_ascii(tok));
    }
    for (const auto& ex : ds->examples) {
      for (const auto& tok : ex.question.tokens) {
        if (tok != "[SEP]") terms.insert(lowercase_ascii(tok));
      }
    }
  }
  return from_terms(std::vector<std::string>(terms.begin(), terms.end()));
}

Vocabulary Vocabulary::from_terms(std::vector<std::string> sorted_terms) {
  Vocabulary v;
  v.terms_ = std::move(sorted_terms);
  for (std::size_t i = 0; i < v.terms_.size(); ++i) {
    v.ids_[v.terms_[i]] = static_cast<TokenId>(kFirstVocabId + i);
  }
  return v;
}

TokenId Vocabulary::to_id(const std::string& raw_token) const {
  if (raw_token == "[PAD]") return kPadId;
  if (raw_token == "[UNK]") return kUnkId;
  if (raw_token == "[CLS]") return kClsId;
  if (raw_token == "[SEP]") return kSepId;
  auto it = ids_.find(lowercase_ascii(raw_token));
  return it == ids_.end() ? kUnkId : it->second;
}

}  // namespace jointqa::corpus
