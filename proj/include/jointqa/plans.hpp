#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "jointqa/chunking.hpp"
#include "jointqa/metrics.hpp"
#include "jointqa/model.hpp"
#include "jointqa/pipeline.hpp"
#include "jointqa/training.hpp"

namespace jointqa::plans {

struct DatasetSpec {
  std::string questions;  // path
  std::string corpus;     // path
  corpus::DatasetFormat format = corpus::DatasetFormat::target_qa_json;
  corpus::DomainTag domain = corpus::DomainTag::target;
};

enum class StageInit { scratch, previous, checkpoint };

struct PlanStage {
  training::StageConfig stage;
  DatasetSpec data;
  StageInit init = StageInit::scratch;
  std::string init_checkpoint;  // used when init == checkpoint
};

struct ModelSpec {
  std::size_t d = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t max_len = 96;
  std::size_t stride = 48;
  encoder::Pooling pooling = encoder::Pooling::mean;
  std::size_t max_answer_len = 150;
  bool constrained = true;

  model::ModelConfig to_model_config(std::size_t vocab_size, std::uint64_t seed) const;
  chunking::ChunkingConfig to_chunking_config() const;
};

struct EvalSpec {
  DatasetSpec data;
  ranking::StrategyConfig strategy;
  std::vector<std::size_t> ks{1, 5};
  Scalar abstain_threshold = ranking::kNeverAbstain;
};

struct TrainPlan {
  std::string name = "plan";
  std::uint64_t seed = 1;
  bool deterministic = true;
  ModelSpec model;
  std::vector<PlanStage> stages;
  std::optional<EvalSpec> eval;
};

TrainPlan plan_from_json(const std::string& json_text);
std::string plan_to_json(const TrainPlan& plan);

/// Architecture snapshot stored inside checkpoint manifests; enough to
/// rebuild the model a checkpoint was trained with.
struct ArchSnapshot {
  ModelSpec model;
  std::size_t vocab_size = 0;
};
std::string arch_to_json(const ModelSpec& model, std::size_t vocab_size);
ArchSnapshot arch_from_json(const std::string& json_text);

/// Paths a preset plugs into its stages.
struct PresetPaths {
  std::string aux_questions, aux_corpus;
  std::string target_questions, target_corpus;
  std::string eval_questions, eval_corpus;
};

/// Ablation presets: bert_rc, bert_dr, transt_{cls,mean}, transd_{cls,mean},
/// transtd_{cls,mean}, transtd_plus_{cls,mean}. Plans without a relevance
/// head evaluate with the reading-score-only strategy; the rest use the
/// joint score.
TrainPlan make_preset(const std::string& preset, const PresetPaths& paths);
const std::vector<std::string>& preset_names();

struct RunResult {
  std::filesystem::path run_dir;
  std::vector<std::filesystem::path> stage_checkpoints;
  std::optional<metrics::EvalReport> report;
  std::string manifest_json;
};

/// Executes the stages in order (chaining checkpoints), then the optional
/// evaluation; persists plan snapshot, vocabulary, per-stage logs,
/// checkpoints, predictions, report, and the run manifest under `run_dir`.
/// On stage failure the manifest records partial completion before the
/// error propagates.
RunResult run_plan(const TrainPlan& plan, const std::filesystem::path& run_dir);

struct SweepEntry {
  std::string value;
  bool ok = false;
  std::string error;
  std::optional<metrics::EvalReport> report;
};

struct SweepResult {
  std::string parameter;
  std::vector<SweepEntry> entries;
  std::string table;  // one row per value
};

/// parameter ∈ {lambda, stride, freeze_k, alpha}; one run per value under
/// `run_dir/<parameter>_<value>`. Failures are recorded and the sweep
/// continues.
SweepResult run_sweep(const TrainPlan& base, const std::string& parameter,
                      const std::vector<std::string>& values,
                      const std::filesystem::path& run_dir);

}  // namespace jointqa::plans
