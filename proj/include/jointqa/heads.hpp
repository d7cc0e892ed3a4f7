#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jointqa/chunking.hpp"
#include "jointqa/encoder.hpp"
#include "jointqa/types.hpp"

namespace jointqa::heads {

/// Post-softmax start/end probabilities over sequence positions. Masked
/// positions (question region except CLS, separators, padding) carry
/// probability exactly 0; position 0 is the no-answer slot.
struct ReaderScores {
  Vec p_start;
  Vec p_end;
  std::vector<std::uint8_t> answer_mask;
};

struct MatchScore {
  Scalar p_dr = 0.5;
  encoder::Pooling pooling = encoder::Pooling::mean;
};

ReaderScores reader_forward(const Mat& token_repr, const Vec& w_start, const Vec& w_end,
                            const std::vector<std::uint8_t>& answer_mask);

MatchScore matcher_forward(const encoder::EncoderOutput& out, const Vec& w_match,
                           encoder::Pooling pooling);

struct SpanPredictOptions {
  bool constrained = true;          // enforce start <= end and the length cap
  std::size_t max_answer_len = 150; // tokens
};

/// Best (start, end) pair by p_start[s] + p_end[e]; (0,0) is the no-answer
/// candidate. The unconstrained variant takes independent argmaxes and may
/// return an inverted pair.
chunking::LocalSpan predict_span(const ReaderScores& scores, const SpanPredictOptions& options = {});

encoder::Pooling parse_pooling(const std::string& name);
std::string pooling_name(encoder::Pooling pooling);

}  // namespace jointqa::heads
