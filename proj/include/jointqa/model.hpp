#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "jointqa/chunking.hpp"
#include "jointqa/encoder.hpp"
#include "jointqa/heads.hpp"
#include "jointqa/losses.hpp"
#include "jointqa/types.hpp"

namespace jointqa::model {

struct TaskSet {
  bool span = true;       // reading-comprehension head
  bool relevance = true;  // document-relevance head
};

struct ModelConfig {
  encoder::EncoderConfig encoder;
  encoder::Pooling pooling = encoder::Pooling::mean;
  heads::SpanPredictOptions span;
};

/// One training example: an encoded block plus its relevance label.
struct TrainItem {
  const chunking::Block* block = nullptr;
  bool relevant = false;
};

struct ItemLoss {
  Scalar l_rc = 0.0;
  Scalar l_dr = 0.0;
  Scalar w_adjust = 1.0;
};

struct BatchLoss {
  Scalar l_rc = 0.0;   // mean over items (0 when the span task is off)
  Scalar l_dr = 0.0;   // mean over items
  Scalar w_adjust = 1.0;  // mean of per-item factors
  Scalar total = 0.0;
  std::vector<Scalar> item_factors;  // per-item w, for replaying the loss
};

struct BlockScores {
  heads::ReaderScores reader;
  Scalar p_dr = 0.5;
  chunking::LocalSpan span{0, 0};
};

/// Transformer encoder with a span head (start/end pointers) and a relevance
/// head (pooled sigmoid) on top. Owns no parameters; they live in an
/// encoder::ParameterSet so optimizers and checkpoints can treat everything
/// uniformly.
class JointModel {
 public:
  explicit JointModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  /// Create encoder + head tensors in a fixed draw order.
  void init_params(encoder::ParameterSet& params, std::uint64_t seed) const;

  /// Redraw only the head tensors (used after copying a pretrained encoder).
  void reinit_heads(encoder::ParameterSet& params, std::uint64_t seed) const;

  BlockScores score_block(const encoder::ParameterSet& params, const chunking::Block& block) const;

  /// Mean joint loss over a batch, forward only. When `frozen_factors` is
  /// non-empty it supplies the per-item adjustment factors instead of
  /// recomputing them, which makes the objective differentiable for
  /// finite-difference checks.
  BatchLoss batch_loss(const encoder::ParameterSet& params, const std::vector<TrainItem>& items,
                       const TaskSet& tasks, const losses::LossConfig& loss_config,
                       std::pair<Scalar, Scalar> class_weights,
                       const std::vector<Scalar>& frozen_factors = {}) const;

  /// Forward + backward: accumulates gradients of the mean joint loss into
  /// `params` and returns the same breakdown as batch_loss.
  BatchLoss batch_backward(encoder::ParameterSet& params, const std::vector<TrainItem>& items,
                           const TaskSet& tasks, const losses::LossConfig& loss_config,
                           std::pair<Scalar, Scalar> class_weights,
                           const std::vector<Scalar>& frozen_factors = {}) const;

  static const std::vector<std::string>& head_names();

 private:
  ModelConfig config_;
  mutable encoder::TransformerEncoder encoder_;

  ItemLoss item_forward(const encoder::ParameterSet& params, const TrainItem& item,
                        const TaskSet& tasks, const losses::LossConfig& loss_config,
                        std::pair<Scalar, Scalar> class_weights, const Scalar* frozen_factor,
                        encoder::ForwardCache* cache, heads::ReaderScores* reader_out,
                        encoder::EncoderOutput* enc_out, Scalar* p_dr_out) const;
};

}  // namespace jointqa::model
