#include "jointqa/heads.hpp"

#include <limits>
#include <stdexcept>

#include "jointqa/nn_math.hpp"

namespace jointqa::heads {

ReaderScores reader_forward(const Mat& token_repr, const Vec& w_start, const Vec& w_end,
                            const std::vector<std::uint8_t>& answer_mask) {
  const Eigen::Index m = token_repr.rows();
  if (w_start.size() != token_repr.cols() || w_end.size() != token_repr.cols()) {
    throw std::invalid_argument("reader_forward: weight size does not match hidden width");
  }
  if (static_cast<Eigen::Index>(answer_mask.size()) != m) {
    throw std::invalid_argument("reader_forward: answer mask length does not match sequence");
  }
  bool any = false;
  for (std::uint8_t v : answer_mask) any = any || (v != 0);
  if (!any) throw std::invalid_argument("reader_forward: answer mask admits no positions");

  Vec logits_start = token_repr * w_start;
  Vec logits_end = token_repr * w_end;
  ReaderScores out;
  out.p_start = nn::masked_softmax(logits_start, answer_mask);
  out.p_end = nn::masked_softmax(logits_end, answer_mask);
  out.answer_mask = answer_mask;
  return out;
}

MatchScore matcher_forward(const encoder::EncoderOutput& out, const Vec& w_match,
                           encoder::Pooling pooling) {
  const Vec& pooled = (pooling == encoder::Pooling::cls) ? out.pooled_cls : out.pooled_mean;
  if (w_match.size() != pooled.size()) {
    throw std::invalid_argument("matcher_forward: weight size does not match hidden width");
  }
  MatchScore score;
  score.pooling = pooling;
  score.p_dr = nn::sigmoid(pooled.dot(w_match));
  return score;
}

chunking::LocalSpan predict_span(const ReaderScores& scores, const SpanPredictOptions& options) {
  const std::size_t m = scores.answer_mask.size();
  if (scores.p_start.size() != static_cast<Eigen::Index>(m) ||
      scores.p_end.size() != static_cast<Eigen::Index>(m)) {
    throw std::invalid_argument("predict_span: probability vectors do not match mask length");
  }

  std::vector<std::size_t> allowed;
  allowed.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (scores.answer_mask[i] != 0) allowed.push_back(i);
  }
  if (allowed.empty()) throw std::invalid_argument("predict_span: answer mask admits no positions");

  if (!options.constrained) {
    std::size_t best_s = allowed.front();
    std::size_t best_e = allowed.front();
    for (std::size_t i : allowed) {
      if (scores.p_start[static_cast<Eigen::Index>(i)] >
          scores.p_start[static_cast<Eigen::Index>(best_s)]) {
        best_s = i;
      }
      if (scores.p_end[static_cast<Eigen::Index>(i)] >
          scores.p_end[static_cast<Eigen::Index>(best_e)]) {
        best_e = i;
      }
    }
    return {best_s, best_e};
  }

  if (options.max_answer_len == 0) {
    throw std::invalid_argument("predict_span: max_answer_len must be positive");
  }

  // Candidates: the (0,0) no-answer slot plus every in-order document pair
  // within the length cap. For each end position track the best admissible
  // start seen so far, so the scan stays O(m^2) worst case but typically
  // O(m * max_len).
  chunking::LocalSpan best{0, 0};
  Scalar best_score = scores.p_start[0] + scores.p_end[0];
  for (std::size_t ei = 0; ei < allowed.size(); ++ei) {
    const std::size_t e = allowed[ei];
    if (e == 0) continue;
    for (std::size_t si = ei + 1; si-- > 0;) {
      const std::size_t s = allowed[si];
      if (s == 0) break;  // position 0 pairs only with itself
      if (e - s + 1 > options.max_answer_len) break;  // starts only get earlier
      const Scalar cand = scores.p_start[static_cast<Eigen::Index>(s)] +
                          scores.p_end[static_cast<Eigen::Index>(e)];
      if (cand > best_score) {
        best_score = cand;
        best = {s, e};
      }
    }
  }
  return best;
}

encoder::Pooling parse_pooling(const std::string& name) {
  if (name == "cls") return encoder::Pooling::cls;
  if (name == "mean") return encoder::Pooling::mean;
  throw std::invalid_argument("unknown pooling '" + name + "' (expected 'cls' or 'mean')");
}

std::string pooling_name(encoder::Pooling pooling) {
  return pooling == encoder::Pooling::cls ? "cls" : "mean";
}

}  // namespace jointqa::heads
