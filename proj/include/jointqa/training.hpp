#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "jointqa/chunking.hpp"
#include "jointqa/corpus.hpp"
#include "jointqa/encoder.hpp"
#include "jointqa/losses.hpp"
#include "jointqa/model.hpp"
#include "jointqa/types.hpp"

namespace jointqa::training {

struct OptimizerConfig {
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
  Scalar weight_decay = 0.01;  // decoupled; skipped for no_decay tensors
  Scalar clip_norm = 0.0;      // global gradient-norm cap; 0 disables
};

/// Adam with decoupled weight decay and bias correction. Moment buffers are
/// keyed by tensor name and survive shape-compatible parameter reloads.
class AdamW {
 public:
  explicit AdamW(OptimizerConfig config = {});

  /// Applies one update from the accumulated gradients at the given learning
  /// rate, then clears the gradients. Frozen tensors are untouched.
  void step(encoder::ParameterSet& params, Scalar lr);

  std::size_t steps_taken() const { return t_; }

 private:
  OptimizerConfig config_;
  std::size_t t_ = 0;
  std::map<std::string, std::pair<Mat, Mat>> moments_;  // name -> (m, v)
};

/// Linear warmup to base_lr over warmup_steps, then linear decay to 0 at
/// total_steps. Steps are 1-based. total_steps == 0 means no decay.
struct Schedule {
  Scalar base_lr = 1e-3;
  std::size_t warmup_steps = 100;
  std::size_t total_steps = 0;

  Scalar lr_at(std::size_t step) const;
};

/// All blocks for one question across its candidate pool, with relevance
/// labels resolved.
struct QuestionBlocks {
  const corpus::QAExample* example = nullptr;
  std::vector<chunking::Block> blocks;
  std::vector<std::uint8_t> relevant;     // parallel to blocks
  std::vector<std::size_t> positives;     // indices into blocks
  std::vector<std::size_t> negatives;
};

/// Builds encoder-ready blocks for every candidate document of every
/// question. A block is relevance-positive when its document is the gold
/// document; with `positive_requires_span` only blocks whose window contains
/// the gold span count as positive.
std::vector<QuestionBlocks> build_question_blocks(const corpus::Dataset& dataset,
                                                  const corpus::Vocabulary& vocab,
                                                  const chunking::ChunkingConfig& config,
                                                  bool positive_requires_span = false);

/// Mixes every positive block with `negative_ratio` sampled negatives from
/// the same question (all of them when fewer exist), shuffles, and slices
/// into batches. Questions without positives contribute
/// `negative_ratio + 1` sampled negative blocks so no-answer supervision
/// still flows. Deterministic under the seed.
std::vector<std::vector<model::TrainItem>> build_batches(
    const std::vector<QuestionBlocks>& questions, std::size_t negative_ratio,
    std::size_t batch_size, std::uint64_t seed);

struct StageConfig {
  std::string name = "stage";
  model::TaskSet tasks;
  losses::LossConfig loss;
  std::size_t epochs = 1;
  Scalar lr = 1e-3;
  std::size_t warmup_steps = 100;
  int freeze_k = -1;  // top-k trainable layers; -1 = everything trainable
  std::size_t batch_size = 16;
  std::size_t negative_ratio = 3;
  bool positive_requires_span = false;
  OptimizerConfig optimizer;
};

struct StepLog {
  std::size_t step = 0;
  Scalar l_rc = 0.0;
  Scalar l_dr = 0.0;
  Scalar w_adjust = 1.0;
  Scalar total = 0.0;
  Scalar lr = 0.0;
};

struct StageResult {
  std::vector<StepLog> log;
  std::pair<Scalar, Scalar> class_weights{1.0, 1.0};
  std::size_t steps = 0;
};

/// Runs one stage of mini-batch training in place. Class weights for the
/// relevance loss default to inverse class frequency of the sampled block
/// stream. Throws on divergence (non-finite loss), naming the step.
StageResult run_stage(const model::JointModel& model, encoder::ParameterSet& params,
                      const StageConfig& stage, const std::vector<QuestionBlocks>& questions,
                      std::uint64_t seed);

struct CheckpointManifest {
  std::string stage;
  std::size_t step = 0;
  std::string domain_tag;            // "auxiliary" | "target"
  std::vector<std::string> tasks;    // subset of {"rc", "dr"}
  std::string config_json;           // architecture snapshot
  std::string config_hash;           // fnv1a64 hex of config_json
  std::string tensors_hash;          // fnv1a64 hex of tensors.bin
};

/// Directory layout: manifest.json + tensors.bin, both written atomically.
void save_checkpoint(const std::filesystem::path& dir, const encoder::ParameterSet& params,
                     CheckpointManifest manifest);
CheckpointManifest load_checkpoint_manifest(const std::filesystem::path& dir);

/// Loads tensors into an existing parameter set, verifying the stored hashes.
void load_checkpoint(const std::filesystem::path& dir, encoder::ParameterSet& params);

/// Copies every non-head tensor from the checkpoint into `params` (shape
/// mismatches raise errors naming the tensor), then redraws the heads.
void transfer_init(const model::JointModel& model, encoder::ParameterSet& params,
                   const std::filesystem::path& aux_checkpoint_dir, std::uint64_t head_seed);

}  // namespace jointqa::training
