#include "jointqa/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "json.hpp"

#include "jointqa/serialize.hpp"

namespace jointqa::synthetic {

void SyntheticConfig::validate() const {
  if (questions == 0) throw std::invalid_argument("synthetic: questions must be positive");
  if (pool_size < 2) throw std::invalid_argument("synthetic: pool size must be at least 2");
  if (key_alphabet == 0) throw std::invalid_argument("synthetic: key alphabet is empty");
  if (unique_keys && key_alphabet < questions) {
    throw std::invalid_argument("synthetic: key alphabet smaller than the question count");
  }
  if (answer_vocab == 0) throw std::invalid_argument("synthetic: answer vocabulary is empty");
  if (answer_len_min == 0 || answer_len_max < answer_len_min) {
    throw std::invalid_argument("synthetic: bad answer length range");
  }
  if (key_repeats == 0) throw std::invalid_argument("synthetic: key_repeats must be positive");
  if (doc_tokens_min < answer_len_max + key_repeats + 2 || doc_tokens_max < doc_tokens_min) {
    throw std::invalid_argument("synthetic: document length range cannot hold an answer");
  }
  if (unanswerable_fraction < 0.0 || unanswerable_fraction >= 1.0) {
    throw std::invalid_argument("synthetic: unanswerable fraction must lie in [0, 1)");
  }
  if (questions + extra_filler_docs < pool_size) {
    throw std::invalid_argument("synthetic: corpus smaller than one candidate pool");
  }
}

namespace {

struct DocBuild {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::size_t answer_first = 0;  // token index of the first answer token
  std::size_t answer_len = 0;    // 0 = filler-only document
};

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string text;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) text += ' ';
    text += tokens[i];
  }
  return text;
}

/// Character range of tokens [first, first+len) in the space-joined text.
std::pair<std::size_t, std::size_t> char_range_of(const std::vector<std::string>& tokens,
                                                  std::size_t first, std::size_t len) {
  std::size_t begin = 0;
  for (std::size_t i = 0; i < first; ++i) begin += tokens[i].size() + 1;
  std::size_t end = begin;
  for (std::size_t i = first; i < first + len; ++i) {
    if (i > first) end += 1;
    end += tokens[i].size();
  }
  return {begin, end};
}

}  // namespace

SyntheticData generate(const SyntheticConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);

  std::vector<std::string> filler;
  filler.reserve(config.shared_filler + config.domain_filler);
  for (std::size_t i = 0; i < config.shared_filler; ++i) {
    filler.push_back("com" + std::to_string(i));
  }
  for (std::size_t i = 0; i < config.domain_filler; ++i) {
    filler.push_back(config.domain + std::to_string(i));
  }
  auto rand_filler = [&]() { return filler[rng() % filler.size()]; };

  // Unique mode: each question gets a distinct key from the shared alphabet.
  // Reuse mode: keys are drawn with replacement, so one key can be planted in
  // several documents.
  std::vector<std::size_t> key_ids;
  if (config.unique_keys) {
    key_ids.resize(config.key_alphabet);
    std::iota(key_ids.begin(), key_ids.end(), 0);
    std::shuffle(key_ids.begin(), key_ids.end(), rng);
    key_ids.resize(config.questions);
  } else {
    key_ids.reserve(config.questions);
    for (std::size_t q = 0; q < config.questions; ++q) {
      key_ids.push_back(rng() % config.key_alphabet);
    }
  }

  std::uniform_int_distribution<std::size_t> doc_len(config.doc_tokens_min, config.doc_tokens_max);
  std::uniform_int_distribution<std::size_t> ans_len(config.answer_len_min, config.answer_len_max);
  std::uniform_real_distribution<Scalar> unit(0.0, 1.0);

  std::vector<DocBuild> docs;
  docs.reserve(config.questions + config.extra_filler_docs);
  for (std::size_t q = 0; q < config.questions; ++q) {
    DocBuild doc;
    doc.doc_id = config.domain + "-d" + std::to_string(q);
    const std::size_t total = doc_len(rng);
    const std::size_t alen = ans_len(rng);
    doc.answer_len = alen;
    // key + answer occupy alen+1 consecutive slots inside the filler.
    const std::size_t pattern = alen + 1;
    std::uniform_int_distribution<std::size_t> pos(0, total - pattern);
    const std::size_t key_at = pos(rng);
    doc.answer_first = key_at + 1;
    const std::string key_token = "key" + std::to_string(key_ids[q]);
    for (std::size_t i = 0; i < total; ++i) {
      if (i == key_at) {
        doc.tokens.push_back(key_token);
      } else if (i > key_at && i < key_at + pattern) {
        doc.tokens.push_back("ans" + std::to_string(rng() % config.answer_vocab));
      } else {
        doc.tokens.push_back(rand_filler());
      }
    }
    if (config.key_repeats > 1) {
      std::vector<std::size_t> slots;
      for (std::size_t i = 0; i < total; ++i) {
        if (i < key_at || i >= key_at + pattern) slots.push_back(i);
      }
      std::shuffle(slots.begin(), slots.end(), rng);
      const std::size_t extra = std::min(config.key_repeats - 1, slots.size());
      for (std::size_t i = 0; i < extra; ++i) doc.tokens[slots[i]] = key_token;
    }
    docs.push_back(std::move(doc));
  }
  for (std::size_t f = 0; f < config.extra_filler_docs; ++f) {
    DocBuild doc;
    doc.doc_id = config.domain + "-f" + std::to_string(f);
    const std::size_t total = doc_len(rng);
    for (std::size_t i = 0; i < total; ++i) doc.tokens.push_back(rand_filler());
    docs.push_back(std::move(doc));
  }

  nlohmann::json questions = nlohmann::json::array();
  for (std::size_t q = 0; q < config.questions; ++q) {
    const bool answerable = unit(rng) >= config.unanswerable_fraction;
    const DocBuild& gold = docs[q];

    // Candidate pool: the gold document (when answerable) plus distinct
    // other documents, order shuffled. Under key reuse, other documents
    // planted with this question's key are excluded so every negative is a
    // true negative.
    std::vector<std::size_t> others;
    others.reserve(docs.size() - 1);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (i == q) continue;
      if (!config.unique_keys && i < config.questions && key_ids[i] == key_ids[q]) continue;
      others.push_back(i);
    }
    std::shuffle(others.begin(), others.end(), rng);
    std::vector<std::string> pool;
    if (answerable) pool.push_back(gold.doc_id);
    for (std::size_t i = 0; pool.size() < config.pool_size && i < others.size(); ++i) {
      pool.push_back(docs[others[i]].doc_id);
    }
    if (pool.size() < config.pool_size) {
      throw std::runtime_error("synthetic: not enough distinct candidates for a full pool");
    }
    std::shuffle(pool.begin(), pool.end(), rng);

    nlohmann::json record;
    record["question_id"] = config.domain + "-q" + std::to_string(q);
    record["title"] = "find the answer";
    record["body"] = "for key" + std::to_string(key_ids[q]);
    record["candidate_doc_ids"] = pool;
    if (answerable) {
      const auto [begin, end] = char_range_of(gold.tokens, gold.answer_first, gold.answer_len);
      record["answer"] = {{"doc_id", gold.doc_id}, {"start_char", begin}, {"end_char", end}};
    } else {
      record["answer"] = nullptr;
    }
    questions.push_back(std::move(record));
  }

  nlohmann::json corpus = nlohmann::json::array();
  for (const DocBuild& doc : docs) {
    corpus.push_back({{"doc_id", doc.doc_id}, {"text", join_tokens(doc.tokens)}});
  }

  SyntheticData out;
  out.questions_json = questions.dump(2);
  out.corpus_json = corpus.dump(2);
  return out;
}

void write_dataset(const std::filesystem::path& dir, const std::string& stem,
                   const SyntheticConfig& config) {
  const SyntheticData data = generate(config);
  serialize::atomic_write_file(dir / (stem + ".questions.json"), data.questions_json + "\n");
  serialize::atomic_write_file(dir / (stem + ".corpus.json"), data.corpus_json + "\n");
}

}  // namespace jointqa::synthetic
