#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jointqa/corpus.hpp"
#include "jointqa/types.hpp"

namespace jointqa::chunking {

struct ChunkingConfig {
  std::size_t max_seq_len = 512; // m
  std::size_t stride = 192;      // t
};

/// Inclusive 1-based document token window, the unit of the block plan.
struct Window {
  std::size_t start = 1;
  std::size_t end = 1;
  bool operator==(const Window&) const = default;
};

/// Window plan over a document of L tokens with window capacity W and
/// stride t: window i covers [(i-1)t + 1, W + (i-1)t], clipped to L.
/// Block count is 1 when L <= W, else 1 + ceil((L - W) / t).
std::vector<Window> window_plan(std::size_t doc_len, std::size_t capacity, std::size_t stride);

/// Block-local token span in sequence coordinates; (0,0) is the no-answer
/// sentinel (position 0 is the CLS slot).
struct LocalSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  bool is_no_answer() const { return start == 0 && end == 0; }
  bool operator==(const LocalSpan&) const = default;
};

/// One encoder-ready window over a (question, document) pair:
/// [CLS, question, SEP, document window, SEP, padding...], total length m.
struct Block {
  std::string question_id;
  std::string doc_id;
  std::size_t block_index = 1; // 1-based
  std::vector<TokenId> token_ids;
  std::vector<std::uint8_t> segment_mask;   // 0 = question region, 1 = document region
  std::vector<std::uint8_t> attention_mask; // 1 = real token, 0 = padding
  std::size_t question_len = 0;             // n
  std::size_t doc_window_first = 0;         // 0-based inclusive document token indices
  std::size_t doc_window_last = 0;
  std::size_t doc_region_begin = 0; // sequence position of the first window token
  std::size_t doc_region_len = 0;
  LocalSpan label; // (0,0) sentinel unless the gold span fits this window

  /// Positions eligible as answer start/end: CLS plus the document region.
  std::vector<std::uint8_t> answer_mask() const;
};

/// Window capacity after the three special markers: m - n - 3.
std::size_t window_capacity(std::size_t max_seq_len, std::size_t question_len);

/// Splits the document into overlapping encoder-ready blocks. The gold span,
/// when given, is projected into each block's label ((0,0) when it does not
/// fit entirely inside the window).
std::vector<Block> make_blocks(const corpus::Question& question, const corpus::Document& document,
                               const corpus::Vocabulary& vocab, const ChunkingConfig& config,
                               std::optional<std::pair<std::size_t, std::size_t>> gold_doc_span =
                                   std::nullopt);

/// Projects a 0-based inclusive document token span into block coordinates;
/// spans not fully inside the window map to the (0,0) sentinel.
LocalSpan project_span_to_block(const Block& block, std::pair<std::size_t, std::size_t> doc_span);

/// Inverse map; the sentinel yields nullopt. Throws when a non-sentinel span
/// points into the question region or padding.
std::optional<std::pair<std::size_t, std::size_t>> project_span_to_document(const Block& block,
                                                                            LocalSpan local_span);

/// True when at least one block carries a non-sentinel label.
bool has_positive_block(const std::vector<Block>& blocks);

}  // namespace jointqa::chunking
