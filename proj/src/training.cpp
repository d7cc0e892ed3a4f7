#include "jointqa/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

#include "jointqa/serialize.hpp"

namespace jointqa::training {

AdamW::AdamW(OptimizerConfig config) : config_(config) {
  if (config_.beta1 < 0 || config_.beta1 >= 1 || config_.beta2 < 0 || config_.beta2 >= 1) {
    throw std::invalid_argument("AdamW: betas must lie in [0, 1)");
  }
  if (config_.eps <= 0) throw std::invalid_argument("AdamW: eps must be positive");
  if (config_.clip_norm < 0) throw std::invalid_argument("AdamW: clip_norm must be >= 0");
}

void AdamW::step(encoder::ParameterSet& params, Scalar lr) {
  ++t_;
  if (config_.clip_norm > 0) {
    Scalar sq = 0;
    for (const encoder::Tensor& tensor : params.tensors()) {
      if (tensor.trainable) sq += tensor.grad.squaredNorm();
    }
    const Scalar norm = std::sqrt(sq);
    if (norm > config_.clip_norm) {
      const Scalar scale = config_.clip_norm / norm;
      for (encoder::Tensor& tensor : params.tensors()) {
        if (tensor.trainable) tensor.grad *= scale;
      }
    }
  }
  const Scalar bc1 = 1.0 - std::pow(config_.beta1, static_cast<Scalar>(t_));
  const Scalar bc2 = 1.0 - std::pow(config_.beta2, static_cast<Scalar>(t_));
  for (encoder::Tensor& tensor : params.tensors()) {
    if (!tensor.trainable) {
      tensor.grad.setZero();
      continue;
    }
    auto [it, inserted] = moments_.try_emplace(
        tensor.name, std::pair<Mat, Mat>{Mat::Zero(tensor.value.rows(), tensor.value.cols()),
                                         Mat::Zero(tensor.value.rows(), tensor.value.cols())});
    Mat& m = it->second.first;
    Mat& v = it->second.second;
    m = config_.beta1 * m + (1.0 - config_.beta1) * tensor.grad;
    v = config_.beta2 * v + (1.0 - config_.beta2) * tensor.grad.cwiseProduct(tensor.grad);
    const Mat m_hat = m / bc1;
    const Mat v_hat = v / bc2;
    tensor.value -= lr * (m_hat.array() / (v_hat.array().sqrt() + config_.eps)).matrix();
    if (!tensor.no_decay && config_.weight_decay != 0.0) {
      tensor.value -= lr * config_.weight_decay * tensor.value;
    }
    tensor.grad.setZero();
  }
}

Scalar Schedule::lr_at(std::size_t step) const {
  if (step == 0) throw std::invalid_argument("schedule steps are 1-based");
  if (warmup_steps > 0 && step <= warmup_steps) {
    return base_lr * static_cast<Scalar>(step) / static_cast<Scalar>(warmup_steps);
  }
  if (total_steps == 0 || total_steps <= warmup_steps) return base_lr;
  if (step >= total_steps) return 0.0;
  return base_lr * static_cast<Scalar>(total_steps - step) /
         static_cast<Scalar>(total_steps - warmup_steps);
}

std::vector<QuestionBlocks> build_question_blocks(const corpus::Dataset& dataset,
                                                  const corpus::Vocabulary& vocab,
                                                  const chunking::ChunkingConfig& config,
                                                  bool positive_requires_span) {
  std::vector<QuestionBlocks> out;
  out.reserve(dataset.examples.size());
  for (const corpus::QAExample& ex : dataset.examples) {
    QuestionBlocks qb;
    qb.example = &ex;
    for (const std::string& doc_id : ex.candidate_doc_ids) {
      const corpus::Document& doc = dataset.document(doc_id);
      std::optional<std::pair<std::size_t, std::size_t>> gold_span;
      const bool is_gold_doc = ex.gold.has_value() && ex.gold->doc_id == doc_id;
      if (is_gold_doc) gold_span = std::make_pair(ex.gold->start, ex.gold->end);
      std::vector<chunking::Block> blocks =
          chunking::make_blocks(ex.question, doc, vocab, config, gold_span);
      for (chunking::Block& block : blocks) {
        const bool positive =
            is_gold_doc && (!positive_requires_span || !block.label.is_no_answer());
        qb.relevant.push_back(positive ? 1 : 0);
        if (positive) {
          qb.positives.push_back(qb.blocks.size());
        } else {
          qb.negatives.push_back(qb.blocks.size());
        }
        qb.blocks.push_back(std::move(block));
      }
    }
    out.push_back(std::move(qb));
  }
  return out;
}

std::vector<std::vector<model::TrainItem>> build_batches(
    const std::vector<QuestionBlocks>& questions, std::size_t negative_ratio,
    std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw std::invalid_argument("build_batches: batch size must be positive");
  std::mt19937_64 rng(seed);
  std::vector<model::TrainItem> items;
  for (const QuestionBlocks& qb : questions) {
    std::vector<std::size_t> shuffled_negatives = qb.negatives;
    std::shuffle(shuffled_negatives.begin(), shuffled_negatives.end(), rng);
    const std::size_t want = qb.positives.empty()
                                 ? negative_ratio + 1
                                 : qb.positives.size() * negative_ratio;
    const std::size_t take = std::min(want, shuffled_negatives.size());
    for (std::size_t idx : qb.positives) items.push_back({&qb.blocks[idx], true});
    for (std::size_t i = 0; i < take; ++i) {
      items.push_back({&qb.blocks[shuffled_negatives[i]], false});
    }
  }
  std::shuffle(items.begin(), items.end(), rng);

  std::vector<std::vector<model::TrainItem>> batches;
  for (std::size_t start = 0; start < items.size(); start += batch_size) {
    const std::size_t stop = std::min(start + batch_size, items.size());
    batches.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(start),
                         items.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

StageResult run_stage(const model::JointModel& model, encoder::ParameterSet& params,
                      const StageConfig& stage, const std::vector<QuestionBlocks>& questions,
                      std::uint64_t seed) {
  if (!stage.tasks.span && !stage.tasks.relevance) {
    throw std::invalid_argument("stage '" + stage.name + "' enables no tasks");
  }
  const std::size_t layers = model.config().encoder.layers;
  if (stage.freeze_k >= 0) {
    encoder::freeze_layers(params, static_cast<std::size_t>(stage.freeze_k), layers);
  } else {
    encoder::freeze_layers(params, layers, layers);
  }

  // Materialize every epoch's batch stream up front: fixes total_steps for
  // the decay schedule and the class frequencies for the relevance loss.
  std::vector<std::vector<std::vector<model::TrainItem>>> epochs;
  epochs.reserve(stage.epochs);
  std::size_t total_steps = 0;
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t e = 0; e < stage.epochs; ++e) {
    std::vector<std::vector<model::TrainItem>> batches =
        build_batches(questions, stage.negative_ratio, stage.batch_size, seed + e);
    total_steps += batches.size();
    for (const auto& batch : batches) {
      for (const model::TrainItem& item : batch) {
        (item.relevant ? n_pos : n_neg) += 1;
      }
    }
    epochs.push_back(std::move(batches));
  }

  StageResult result;
  if (stage.tasks.relevance) {
    if (stage.loss.class_weights.has_value()) {
      result.class_weights = *stage.loss.class_weights;
    } else if (n_pos + n_neg > 0) {  // zero epochs: nothing to weight
      result.class_weights = losses::dr_class_weights(n_pos, n_neg);
    }
  }

  AdamW optimizer(stage.optimizer);
  const Schedule schedule{stage.lr, stage.warmup_steps, total_steps};
  std::size_t step = 0;
  for (const auto& batches : epochs) {
    for (const auto& batch : batches) {
      ++step;
      const Scalar lr = schedule.lr_at(step);
      const model::BatchLoss loss = model.batch_backward(params, batch, stage.tasks, stage.loss,
                                                         result.class_weights);
      if (!std::isfinite(loss.total)) {
        throw std::runtime_error("stage '" + stage.name + "' diverged at step " +
                                 std::to_string(step) + " (non-finite loss)");
      }
      optimizer.step(params, lr);
      result.log.push_back({step, loss.l_rc, loss.l_dr, loss.w_adjust, loss.total, lr});
    }
  }
  result.steps = step;
  return result;
}

namespace {

nlohmann::json manifest_to_json(const CheckpointManifest& m) {
  nlohmann::json j;
  j["stage"] = m.stage;
  j["step"] = m.step;
  j["domain_tag"] = m.domain_tag;
  j["tasks"] = m.tasks;
  j["config"] = nlohmann::json::parse(m.config_json.empty() ? "{}" : m.config_json);
  j["config_hash"] = m.config_hash;
  j["tensors_hash"] = m.tensors_hash;
  return j;
}

CheckpointManifest manifest_from_json(const nlohmann::json& j) {
  CheckpointManifest m;
  m.stage = j.at("stage").get<std::string>();
  m.step = j.at("step").get<std::size_t>();
  m.domain_tag = j.at("domain_tag").get<std::string>();
  m.tasks = j.at("tasks").get<std::vector<std::string>>();
  m.config_json = j.at("config").dump();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.tensors_hash = j.at("tensors_hash").get<std::string>();
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const encoder::ParameterSet& params,
                     CheckpointManifest manifest) {
  std::filesystem::create_directories(dir);
  const std::string tensor_bytes = serialize::encode_tensors(params);
  manifest.tensors_hash = serialize::hex64(serialize::fnv1a64(tensor_bytes));
  if (manifest.config_json.empty()) manifest.config_json = "{}";
  manifest.config_hash = serialize::hex64(serialize::fnv1a64(manifest.config_json));
  serialize::atomic_write_file(dir / "tensors.bin", tensor_bytes);
  serialize::atomic_write_file(dir / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
}

CheckpointManifest load_checkpoint_manifest(const std::filesystem::path& dir) {
  const std::string bytes = serialize::read_file(dir / "manifest.json");
  CheckpointManifest m = manifest_from_json(nlohmann::json::parse(bytes));
  if (serialize::hex64(serialize::fnv1a64(m.config_json)) != m.config_hash) {
    throw std::runtime_error("checkpoint " + dir.string() + ": config hash mismatch");
  }
  return m;
}

void load_checkpoint(const std::filesystem::path& dir, encoder::ParameterSet& params) {
  const CheckpointManifest m = load_checkpoint_manifest(dir);
  const std::string tensor_bytes = serialize::read_file(dir / "tensors.bin");
  if (serialize::hex64(serialize::fnv1a64(tensor_bytes)) != m.tensors_hash) {
    throw std::runtime_error("checkpoint " + dir.string() + ": tensor hash mismatch");
  }
  serialize::decode_tensors(tensor_bytes, params);
}

void transfer_init(const model::JointModel& model, encoder::ParameterSet& params,
                   const std::filesystem::path& aux_checkpoint_dir, std::uint64_t head_seed) {
  const CheckpointManifest m = load_checkpoint_manifest(aux_checkpoint_dir);
  const std::string tensor_bytes = serialize::read_file(aux_checkpoint_dir / "tensors.bin");
  if (serialize::hex64(serialize::fnv1a64(tensor_bytes)) != m.tensors_hash) {
    throw std::runtime_error("checkpoint " + aux_checkpoint_dir.string() +
                             ": tensor hash mismatch");
  }
  for (encoder::Tensor& stored : serialize::decode_tensor_list(tensor_bytes)) {
    if (stored.name.starts_with("head.")) continue;
    if (!params.contains(stored.name)) {
      throw std::runtime_error("transfer: tensor '" + stored.name +
                               "' missing from the target model");
    }
    encoder::Tensor& t = params.at(stored.name);
    if (t.value.rows() != stored.value.rows() || t.value.cols() != stored.value.cols()) {
      throw std::runtime_error(
          "transfer: tensor '" + stored.name + "' shape mismatch: checkpoint has " +
          std::to_string(stored.value.rows()) + "x" + std::to_string(stored.value.cols()) +
          ", target model has " + std::to_string(t.value.rows()) + "x" +
          std::to_string(t.value.cols()));
    }
    t.value = std::move(stored.value);
  }
  model.reinit_heads(params, head_seed);
}

}  // namespace jointqa::training
