#include "jointqa/chunking.hpp"

#include <algorithm>
#include <stdexcept>

namespace jointqa::chunking {

std::vector<Window> window_plan(std::size_t doc_len, std::size_t capacity, std::size_t stride) {
  if (doc_len == 0) {
    throw std::invalid_argument("window_plan: empty document");
  }
  if (capacity == 0 || stride == 0 || stride > capacity) {
    throw std::invalid_argument("window_plan: need 1 <= stride <= capacity");
  }
  std::size_t blocks = 1;
  if (doc_len > capacity) {
    blocks += (doc_len - capacity + stride - 1) / stride;
  }
  std::vector<Window> plan;
  plan.reserve(blocks);
  for (std::size_t i = 1; i <= blocks; ++i) {
    std::size_t start = (i - 1) * stride + 1;
    std::size_t end = std::min(capacity + (i - 1) * stride, doc_len);
    plan.push_back(Window{start, end});
  }
  return plan;
}

std::size_t window_capacity(std::size_t max_seq_len, std::size_t question_len) {
  if (question_len + 4 > max_seq_len) {
    throw std::invalid_argument("question of " + std::to_string(question_len) +
                                " tokens leaves no room for document content at m=" +
                                std::to_string(max_seq_len));
  }
  return max_seq_len - question_len - 3;
}

std::vector<std::uint8_t> Block::answer_mask() const {
  std::vector<std::uint8_t> mask(token_ids.size(), 0);
  mask[0] = 1; // CLS no-answer slot
  for (std::size_t p = doc_region_begin; p < doc_region_begin + doc_region_len; ++p) {
    mask[p] = 1;
  }
  return mask;
}

std::vector<Block> make_blocks(const corpus::Question& question, const corpus::Document& document,
                               const corpus::Vocabulary& vocab, const ChunkingConfig& config,
                               std::optional<std::pair<std::size_t, std::size_t>> gold_doc_span) {
  const std::size_t m = config.max_seq_len;
  const std::size_t n = question.tokens.size();
  const std::size_t doc_len = document.tokens.size();
  if (doc_len == 0) {
    throw std::invalid_argument("make_blocks: document '" + document.doc_id + "' has no tokens");
  }
  const std::size_t capacity = window_capacity(m, n);
  if (config.stride < 1 || config.stride > capacity) {
    throw std::invalid_argument("make_blocks: stride " + std::to_string(config.stride) +
                                " outside [1, " + std::to_string(capacity) + "]");
  }
  if (gold_doc_span) {
    if (gold_doc_span->first > gold_doc_span->second || gold_doc_span->second >= doc_len) {
      throw std::invalid_argument("make_blocks: gold span out of document range");
    }
  }

  std::vector<TokenId> question_ids;
  question_ids.reserve(n);
  for (const auto& tok : question.tokens) question_ids.push_back(vocab.to_id(tok));

  auto plan = window_plan(doc_len, capacity, config.stride);
  std::vector<Block> blocks;
  blocks.reserve(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    Block b;
    b.question_id = question.question_id;
    b.doc_id = document.doc_id;
    b.block_index = i + 1;
    b.question_len = n;
    b.doc_window_first = plan[i].start - 1; // to 0-based
    b.doc_window_last = plan[i].end - 1;
    b.doc_region_begin = n + 2;
    b.doc_region_len = b.doc_window_last - b.doc_window_first + 1;

    b.token_ids.assign(m, kPadId);
    b.segment_mask.assign(m, 0);
    b.attention_mask.assign(m, 0);
    std::size_t p = 0;
    b.token_ids[p++] = kClsId;
    for (TokenId id : question_ids) b.token_ids[p++] = id;
    b.token_ids[p++] = kSepId;
    for (std::size_t d = b.doc_window_first; d <= b.doc_window_last; ++d) {
      b.token_ids[p] = vocab.to_id(document.tokens[d]);
      b.segment_mask[p] = 1;
      ++p;
    }
    b.token_ids[p] = kSepId;
    b.segment_mask[p] = 1;
    ++p;
    for (std::size_t q = 0; q < p; ++q) b.attention_mask[q] = 1;

    if (gold_doc_span) {
      b.label = project_span_to_block(b, *gold_doc_span);
    }
    blocks.push_back(std::move(b));
  }
  return blocks;
}

LocalSpan project_span_to_block(const Block& block, std::pair<std::size_t, std::size_t> doc_span) {
  if (doc_span.first > doc_span.second) {
    throw std::invalid_argument("project_span_to_block: inverted span");
  }
  // Full containment only; partial overlap is a negative block.
  if (doc_span.first < block.doc_window_first || doc_span.second > block.doc_window_last) {
    return LocalSpan{0, 0};
  }
  return LocalSpan{block.doc_region_begin + (doc_span.first - block.doc_window_first),
                   block.doc_region_begin + (doc_span.second - block.doc_window_first)};
}

std::optional<std::pair<std::size_t, std::size_t>> project_span_to_document(const Block& block,
                                                                            LocalSpan local_span) {
  if (local_span.is_no_answer()) {
    return std::nullopt;
  }
  const std::size_t lo = block.doc_region_begin;
  const std::size_t hi = block.doc_region_begin + block.doc_region_len - 1;
  if (local_span.start < lo || local_span.end > hi || local_span.start > local_span.end) {
    throw std::invalid_argument("project_span_to_document: local span outside document region");
  }
  return std::make_pair(block.doc_window_first + (local_span.start - lo),
                        block.doc_window_first + (local_span.end - lo));
}

bool has_positive_block(const std::vector<Block>& blocks) {
  return std::any_of(blocks.begin(), blocks.end(),
                     [](const Block& b) { return !b.label.is_no_answer(); });
}

}  // namespace jointqa::chunking
