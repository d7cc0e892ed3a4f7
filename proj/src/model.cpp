#include "jointqa/model.hpp"

#include <cmath>
#include <stdexcept>

#include "jointqa/nn_math.hpp"

namespace jointqa::model {

namespace {

const char* kHeadStart = "head.reader.start";
const char* kHeadEnd = "head.reader.end";
const char* kHeadMatch = "head.match.w";

void draw_heads(encoder::ParameterSet& params, std::size_t d, std::mt19937_64& rng, bool fresh) {
  for (const char* name : {kHeadStart, kHeadEnd, kHeadMatch}) {
    encoder::Tensor& t = fresh ? params.at(name)
                               : params.add(name, static_cast<Eigen::Index>(d), 1);
    encoder::fill_normal(t.value, rng, 0.02);
    t.grad.setZero();
  }
}

}  // namespace

JointModel::JointModel(const ModelConfig& config) : config_(config), encoder_(config.encoder) {
  config_.encoder.validate();
}

void JointModel::init_params(encoder::ParameterSet& params, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  encoder_.add_parameters(params, rng);
  draw_heads(params, config_.encoder.d, rng, /*fresh=*/false);
}

void JointModel::reinit_heads(encoder::ParameterSet& params, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  draw_heads(params, config_.encoder.d, rng, /*fresh=*/true);
}

const std::vector<std::string>& JointModel::head_names() {
  static const std::vector<std::string> names{kHeadStart, kHeadEnd, kHeadMatch};
  return names;
}

BlockScores JointModel::score_block(const encoder::ParameterSet& params,
                                    const chunking::Block& block) const {
  encoder::EncoderOutput out = encoder_.encode(params, block);
  BlockScores scores;
  scores.reader = heads::reader_forward(out.token_repr, params.at(kHeadStart).value.col(0),
                                        params.at(kHeadEnd).value.col(0), block.answer_mask());
  scores.p_dr = heads::matcher_forward(out, params.at(kHeadMatch).value.col(0),
                                       config_.pooling).p_dr;
  scores.span = heads::predict_span(scores.reader, config_.span);
  return scores;
}

ItemLoss JointModel::item_forward(const encoder::ParameterSet& params, const TrainItem& item,
                                  const TaskSet& tasks, const losses::LossConfig& loss_config,
                                  std::pair<Scalar, Scalar> class_weights,
                                  const Scalar* frozen_factor, encoder::ForwardCache* cache,
                                  heads::ReaderScores* reader_out, encoder::EncoderOutput* enc_out,
                                  Scalar* p_dr_out) const {
  if (item.block == nullptr) throw std::invalid_argument("training item has no block");
  encoder::EncoderOutput out = encoder_.encode(params, *item.block, cache);

  ItemLoss loss;
  if (tasks.span) {
    heads::ReaderScores reader =
        heads::reader_forward(out.token_repr, params.at(kHeadStart).value.col(0),
                              params.at(kHeadEnd).value.col(0), item.block->answer_mask());
    loss.l_rc = losses::rc_loss(reader, item.block->label);
    if (loss_config.adjustable) {
      if (frozen_factor != nullptr) {
        loss.w_adjust = *frozen_factor;
      } else {
        const chunking::LocalSpan pred = heads::predict_span(reader, config_.span);
        loss.w_adjust = losses::adjustment_factor(item.block->label, pred, loss_config.epsilon_len);
      }
    }
    if (reader_out != nullptr) *reader_out = std::move(reader);
  }
  if (tasks.relevance) {
    const Scalar p_dr =
        heads::matcher_forward(out, params.at(kHeadMatch).value.col(0), config_.pooling).p_dr;
    loss.l_dr = losses::dr_loss(p_dr, item.relevant, class_weights);
    if (p_dr_out != nullptr) *p_dr_out = p_dr;
  }
  if (enc_out != nullptr) *enc_out = std::move(out);
  return loss;
}

BatchLoss JointModel::batch_loss(const encoder::ParameterSet& params,
                                 const std::vector<TrainItem>& items, const TaskSet& tasks,
                                 const losses::LossConfig& loss_config,
                                 std::pair<Scalar, Scalar> class_weights,
                                 const std::vector<Scalar>& frozen_factors) const {
  if (items.empty()) throw std::invalid_argument("batch_loss: empty batch");
  if (!tasks.span && !tasks.relevance) throw std::invalid_argument("batch_loss: no tasks enabled");
  if (!frozen_factors.empty() && frozen_factors.size() != items.size()) {
    throw std::invalid_argument("batch_loss: frozen factor count does not match batch");
  }

  BatchLoss batch;
  batch.item_factors.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Scalar* frozen = frozen_factors.empty() ? nullptr : &frozen_factors[i];
    const ItemLoss loss = item_forward(params, items[i], tasks, loss_config, class_weights, frozen,
                                       nullptr, nullptr, nullptr, nullptr);
    batch.l_rc += loss.l_rc;
    batch.l_dr += loss.l_dr;
    batch.w_adjust += loss.w_adjust;
    batch.total += loss.w_adjust * loss.l_rc + loss_config.lambda * loss.l_dr;
    batch.item_factors.push_back(loss.w_adjust);
  }
  const Scalar inv = 1.0 / static_cast<Scalar>(items.size());
  batch.l_rc *= inv;
  batch.l_dr *= inv;
  batch.w_adjust *= inv;
  batch.total *= inv;
  return batch;
}

BatchLoss JointModel::batch_backward(encoder::ParameterSet& params,
                                     const std::vector<TrainItem>& items, const TaskSet& tasks,
                                     const losses::LossConfig& loss_config,
                                     std::pair<Scalar, Scalar> class_weights,
                                     const std::vector<Scalar>& frozen_factors) const {
  if (items.empty()) throw std::invalid_argument("batch_backward: empty batch");
  if (!tasks.span && !tasks.relevance) {
    throw std::invalid_argument("batch_backward: no tasks enabled");
  }
  if (!frozen_factors.empty() && frozen_factors.size() != items.size()) {
    throw std::invalid_argument("batch_backward: frozen factor count does not match batch");
  }

  const auto d = static_cast<Eigen::Index>(config_.encoder.d);
  const Scalar inv = 1.0 / static_cast<Scalar>(items.size());

  BatchLoss batch;
  batch.item_factors.reserve(items.size());
  Scalar rc_sum = 0.0, dr_sum = 0.0, w_sum = 0.0, total_sum = 0.0;

  for (std::size_t i = 0; i < items.size(); ++i) {
    const Scalar* frozen = frozen_factors.empty() ? nullptr : &frozen_factors[i];
    encoder::ForwardCache cache;
    heads::ReaderScores reader;
    encoder::EncoderOutput out;
    Scalar p_dr = 0.5;
    const ItemLoss loss = item_forward(params, items[i], tasks, loss_config, class_weights, frozen,
                                       &cache, &reader, &out, &p_dr);
    rc_sum += loss.l_rc;
    dr_sum += loss.l_dr;
    w_sum += loss.w_adjust;
    total_sum += loss.w_adjust * loss.l_rc + loss_config.lambda * loss.l_dr;
    batch.item_factors.push_back(loss.w_adjust);

    const Eigen::Index m = out.token_repr.rows();
    Mat d_tokens = Mat::Zero(m, d);
    Vec d_cls = Vec::Zero(0);
    Vec d_mean = Vec::Zero(0);

    if (tasks.span) {
      // d(loss)/d(logit) for a masked softmax cross-entropy is p - onehot on
      // admitted positions and exactly 0 elsewhere (masked p is exactly 0).
      const chunking::LocalSpan label = items[i].block->label;
      Vec d_logit_s = reader.p_start;
      Vec d_logit_e = reader.p_end;
      d_logit_s[static_cast<Eigen::Index>(label.start)] -= 1.0;
      d_logit_e[static_cast<Eigen::Index>(label.end)] -= 1.0;
      const Scalar scale = loss.w_adjust * inv;
      d_logit_s *= scale;
      d_logit_e *= scale;

      const Vec w_start = params.at(kHeadStart).value.col(0);
      const Vec w_end = params.at(kHeadEnd).value.col(0);
      d_tokens.noalias() += d_logit_s * w_start.transpose();
      d_tokens.noalias() += d_logit_e * w_end.transpose();
      params.at(kHeadStart).grad.noalias() += out.token_repr.transpose() * d_logit_s;
      params.at(kHeadEnd).grad.noalias() += out.token_repr.transpose() * d_logit_e;
    }

    if (tasks.relevance) {
      // d(weighted BCE)/d(pre-sigmoid) = w_class * (p - y).
      const Scalar w_class = items[i].relevant ? class_weights.first : class_weights.second;
      const Scalar y = items[i].relevant ? 1.0 : 0.0;
      const Scalar dz = loss_config.lambda * inv * w_class * (p_dr - y);
      const Vec w_match = params.at(kHeadMatch).value.col(0);
      const Vec& pooled =
          (config_.pooling == encoder::Pooling::cls) ? out.pooled_cls : out.pooled_mean;
      params.at(kHeadMatch).grad.noalias() += dz * pooled;
      if (config_.pooling == encoder::Pooling::cls) {
        d_cls = dz * w_match;
      } else {
        d_mean = dz * w_match;
      }
    }

    encoder_.backward(params, *items[i].block, cache, d_tokens, d_cls, d_mean);
  }

  batch.l_rc = rc_sum * inv;
  batch.l_dr = dr_sum * inv;
  batch.w_adjust = w_sum * inv;
  batch.total = total_sum * inv;
  return batch;
}

}  // namespace jointqa::model
