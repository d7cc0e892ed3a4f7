#include <cmath>
#include <random>

#include "doctest.h"

#include "jointqa/heads.hpp"
#include "jointqa/losses.hpp"

using namespace jointqa;
using namespace jointqa::heads;
using namespace jointqa::losses;

namespace {

// Reader scores over a 8-position sequence: CLS at 0, doc region 3..6.
ReaderScores uniform_scores(const std::vector<std::uint8_t>& mask) {
  const auto n = static_cast<Eigen::Index>(mask.size());
  Mat repr = Mat::Zero(n, 4);
  Vec w = Vec::Zero(4);
  return reader_forward(repr, w, w, mask);
}

const std::vector<std::uint8_t> kMask = {1, 0, 0, 1, 1, 1, 1, 0};

}  // namespace

TEST_CASE("reader probabilities are a masked distribution") {
  std::mt19937_64 rng(1);
  std::normal_distribution<Scalar> dist(0.0, 1.0);
  Mat repr(8, 4);
  for (Eigen::Index r = 0; r < 8; ++r)
    for (Eigen::Index c = 0; c < 4; ++c) repr(r, c) = dist(rng);
  Vec ws(4), we(4);
  for (Eigen::Index c = 0; c < 4; ++c) {
    ws[c] = dist(rng);
    we[c] = dist(rng);
  }
  const ReaderScores scores = reader_forward(repr, ws, we, kMask);
  CHECK(scores.p_start.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(scores.p_end.sum() == doctest::Approx(1.0).epsilon(1e-12));
  for (Eigen::Index p = 0; p < 8; ++p) {
    if (kMask[static_cast<std::size_t>(p)]) {
      CHECK(scores.p_start[p] > 0.0);
    } else {
      CHECK(scores.p_start[p] == 0.0);  // exactly, not merely small
      CHECK(scores.p_end[p] == 0.0);
    }
  }
}

TEST_CASE("uniform logits spread probability over allowed positions") {
  const ReaderScores scores = uniform_scores(kMask);
  for (Eigen::Index p : {0, 3, 4, 5, 6}) {
    CHECK(scores.p_start[p] == doctest::Approx(0.2).epsilon(1e-12));
  }
}

TEST_CASE("constrained span prediction maximizes the pair score") {
  ReaderScores scores;
  scores.answer_mask = kMask;
  scores.p_start = Vec::Zero(8);
  scores.p_end = Vec::Zero(8);
  scores.p_start[0] = 0.10;
  scores.p_end[0] = 0.10;
  scores.p_start[3] = 0.50;
  scores.p_start[5] = 0.40;
  scores.p_end[4] = 0.46;
  scores.p_end[6] = 0.44;

  SpanPredictOptions opt;
  const auto span = predict_span(scores, opt);
  CHECK(span == chunking::LocalSpan{3, 4});  // 0.96 beats (3,6)=0.94 and (5,6)=0.84

  // Moving the mass to the later end flips the choice.
  scores.p_end[4] = 0.30;
  scores.p_end[6] = 0.60;
  CHECK(predict_span(scores, opt) == chunking::LocalSpan{3, 6});
}

TEST_CASE("constrained prediction respects the length cap") {
  ReaderScores scores;
  scores.answer_mask = kMask;
  scores.p_start = Vec::Zero(8);
  scores.p_end = Vec::Zero(8);
  scores.p_start[3] = 0.9;
  scores.p_end[6] = 0.9;
  scores.p_start[5] = 0.05;
  scores.p_end[5] = 0.05;
  scores.p_start[0] = 0.05;
  scores.p_end[0] = 0.05;

  SpanPredictOptions opt;
  opt.max_answer_len = 2;  // spans 3..6 (4 tokens) no longer allowed
  const auto span = predict_span(scores, opt);
  CHECK(span.end - span.start + 1 <= 2);
  CHECK(span == chunking::LocalSpan{5, 6});

  opt.max_answer_len = 150;
  CHECK(predict_span(scores, opt) == chunking::LocalSpan{3, 6});
}

TEST_CASE("no-answer wins when CLS dominates both distributions") {
  ReaderScores scores;
  scores.answer_mask = kMask;
  scores.p_start = Vec::Zero(8);
  scores.p_end = Vec::Zero(8);
  scores.p_start[0] = 0.9;
  scores.p_end[0] = 0.9;
  scores.p_start[3] = 0.1;
  scores.p_end[4] = 0.1;
  CHECK(predict_span(scores, {}).is_no_answer());
}

TEST_CASE("unconstrained prediction may invert the pair") {
  ReaderScores scores;
  scores.answer_mask = kMask;
  scores.p_start = Vec::Zero(8);
  scores.p_end = Vec::Zero(8);
  scores.p_start[6] = 0.9;  // best start after the best end
  scores.p_end[3] = 0.9;
  scores.p_start[3] = 0.1;
  scores.p_end[6] = 0.1;
  SpanPredictOptions opt;
  opt.constrained = false;
  const auto span = predict_span(scores, opt);
  CHECK(span.start == 6);
  CHECK(span.end == 3);
  // The constrained variant cannot produce that.
  const auto legal = predict_span(scores, {});
  CHECK(legal.start <= legal.end);
}

TEST_CASE("matcher squashes the pooled representation") {
  encoder::EncoderOutput out;
  out.pooled_cls = Vec::Ones(4);
  out.pooled_mean = -Vec::Ones(4);
  Vec w(4);
  w << 0.5, 0.5, 0.5, 0.5;
  const MatchScore via_cls = matcher_forward(out, w, encoder::Pooling::cls);
  const MatchScore via_mean = matcher_forward(out, w, encoder::Pooling::mean);
  CHECK(via_cls.p_dr == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-12));
  CHECK(via_mean.p_dr == doctest::Approx(1.0 / (1.0 + std::exp(2.0))).epsilon(1e-12));
  CHECK(via_cls.pooling == encoder::Pooling::cls);
}

TEST_CASE("pooling names round-trip") {
  CHECK(parse_pooling("cls") == encoder::Pooling::cls);
  CHECK(parse_pooling("mean") == encoder::Pooling::mean);
  CHECK(pooling_name(encoder::Pooling::cls) == "cls");
  CHECK(pooling_name(encoder::Pooling::mean) == "mean");
  CHECK_THROWS(parse_pooling("max"));
}

TEST_CASE("span loss is the summed cross-entropy of the pair") {
  const ReaderScores scores = uniform_scores(kMask);  // 5 allowed positions
  const Scalar expected = -2.0 * std::log(0.2);
  CHECK(rc_loss(scores, chunking::LocalSpan{3, 5}) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(rc_loss(scores, chunking::LocalSpan{0, 0}) == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS(rc_loss(scores, chunking::LocalSpan{3, 9}));  // out of range
}

TEST_CASE("span loss survives zero probability via the floor") {
  ReaderScores scores = uniform_scores(kMask);
  // Label sits on a masked position: probability is exactly 0, loss is finite.
  const Scalar loss = rc_loss(scores, chunking::LocalSpan{1, 3});
  CHECK(std::isfinite(loss));
  CHECK(loss >= -std::log(1e-12) - 1e-6);
}

TEST_CASE("class weights are inverse frequencies") {
  const auto [w_pos, w_neg] = dr_class_weights(2, 10);
  CHECK(w_pos == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(w_neg == doctest::Approx(1.2).epsilon(1e-12));

  const auto [hard_pos, hard_neg] = dr_class_weights(1, 49);
  CHECK(hard_pos == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(hard_neg == doctest::Approx(50.0 / 49.0).epsilon(1e-12));

  CHECK_THROWS(dr_class_weights(0, 5));
  CHECK_THROWS(dr_class_weights(5, 0));
}

TEST_CASE("relevance loss weights each class by its inverse frequency") {
  const std::pair<Scalar, Scalar> w{6.0, 1.2};
  CHECK(dr_loss(0.5, true, w) == doctest::Approx(-6.0 * std::log(0.5)).epsilon(1e-12));
  CHECK(dr_loss(0.5, false, w) == doctest::Approx(-1.2 * std::log(0.5)).epsilon(1e-12));
  CHECK(dr_loss(1.0, true, w) == doctest::Approx(0.0));
  CHECK(std::isfinite(dr_loss(0.0, true, w)));  // floored, not -inf
  CHECK_THROWS(dr_loss(1.5, true, w));
  CHECK_THROWS(dr_loss(-0.1, false, w));
}

TEST_CASE("relevance loss decreases as the prediction approaches the label") {
  const std::pair<Scalar, Scalar> w{2.0, 1.0};
  CHECK(dr_loss(0.9, true, w) < dr_loss(0.6, true, w));
  CHECK(dr_loss(0.1, false, w) < dr_loss(0.4, false, w));
}

TEST_CASE("length-mismatch factor at the documented operating point") {
  // Gold spans 10 tokens of length (end - start), predicted 4: |4-10|/10.
  const chunking::LocalSpan gold{5, 15};
  const chunking::LocalSpan pred{5, 9};
  CHECK(adjustment_factor(gold, pred) == doctest::Approx(std::exp(0.6)).epsilon(1e-9));
  CHECK(adjustment_factor(gold, gold) == doctest::Approx(1.0).epsilon(1e-12));
  // No-answer gold: factor neutral.
  CHECK(adjustment_factor(chunking::LocalSpan{0, 0}, pred) == 1.0);
}

TEST_CASE("length-mismatch factor never shrinks the loss and uses the floor") {
  const chunking::LocalSpan gold{4, 4};  // zero length
  const chunking::LocalSpan pred{4, 7};
  // Denominator floors at epsilon: exp(|3-0|/1).
  CHECK(adjustment_factor(gold, pred, 1.0) == doctest::Approx(std::exp(3.0)).epsilon(1e-9));
  CHECK(adjustment_factor(gold, pred, 2.0) == doctest::Approx(std::exp(1.5)).epsilon(1e-9));
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    chunking::LocalSpan g{1 + rng() % 20, 0};
    g.end = g.start + rng() % 10;
    chunking::LocalSpan p{1 + rng() % 20, 0};
    p.end = p.start + rng() % 10;
    CHECK(adjustment_factor(g, p) >= 1.0);
  }
}

TEST_CASE("joint loss composes the two objectives") {
  LossConfig config;  // lambda 4, adjustable off
  const LossBreakdown plain = joint_loss(1.5, 0.5, config, /*w_adjust=*/2.0);
  CHECK(plain.w_adjust == 1.0);  // factor ignored while disabled
  CHECK(plain.total == doctest::Approx(1.5 + 4.0 * 0.5).epsilon(1e-12));

  config.adjustable = true;
  const LossBreakdown adjusted = joint_loss(1.5, 0.5, config, 2.0);
  CHECK(adjusted.w_adjust == 2.0);
  CHECK(adjusted.total == doctest::Approx(2.0 * 1.5 + 4.0 * 0.5).epsilon(1e-12));

  config.lambda = 0.0;
  const LossBreakdown rc_only = joint_loss(1.5, 123.0, config, 1.0);
  CHECK(rc_only.total == doctest::Approx(1.5).epsilon(1e-12));
}
