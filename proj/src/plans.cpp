#include "jointqa/plans.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "jointqa/heads.hpp"
#include "jointqa/serialize.hpp"

namespace jointqa::plans {

namespace {

using nlohmann::json;

std::string format_name(corpus::DatasetFormat f) {
  return f == corpus::DatasetFormat::target_qa_json ? "target" : "auxiliary";
}

corpus::DatasetFormat parse_format(const std::string& s) {
  if (s == "target") return corpus::DatasetFormat::target_qa_json;
  if (s == "auxiliary") return corpus::DatasetFormat::auxiliary_qa_json;
  throw std::invalid_argument("unknown dataset format '" + s + "'");
}

std::string domain_name(corpus::DomainTag d) {
  return d == corpus::DomainTag::target ? "target" : "auxiliary";
}

corpus::DomainTag parse_domain(const std::string& s) {
  if (s == "target") return corpus::DomainTag::target;
  if (s == "auxiliary") return corpus::DomainTag::auxiliary;
  throw std::invalid_argument("unknown domain tag '" + s + "'");
}

json dataset_to_json(const DatasetSpec& d) {
  return json{{"questions", d.questions},
              {"corpus", d.corpus},
              {"format", format_name(d.format)},
              {"domain", domain_name(d.domain)}};
}

DatasetSpec dataset_from_json(const json& j) {
  DatasetSpec d;
  d.questions = j.at("questions").get<std::string>();
  d.corpus = j.at("corpus").get<std::string>();
  if (j.contains("format")) d.format = parse_format(j["format"].get<std::string>());
  if (j.contains("domain")) d.domain = parse_domain(j["domain"].get<std::string>());
  return d;
}

std::vector<std::string> tasks_to_names(const model::TaskSet& tasks) {
  std::vector<std::string> names;
  if (tasks.span) names.push_back("rc");
  if (tasks.relevance) names.push_back("dr");
  return names;
}

model::TaskSet tasks_from_names(const std::vector<std::string>& names) {
  model::TaskSet tasks{false, false};
  for (const std::string& name : names) {
    if (name == "rc") {
      tasks.span = true;
    } else if (name == "dr") {
      tasks.relevance = true;
    } else {
      throw std::invalid_argument("unknown task '" + name + "' (expected rc or dr)");
    }
  }
  if (!tasks.span && !tasks.relevance) throw std::invalid_argument("stage enables no tasks");
  return tasks;
}

json stage_to_json(const PlanStage& ps) {
  const training::StageConfig& s = ps.stage;
  json j;
  j["name"] = s.name;
  j["data"] = dataset_to_json(ps.data);
  j["tasks"] = tasks_to_names(s.tasks);
  j["lambda"] = s.loss.lambda;
  j["adjustable"] = s.loss.adjustable;
  j["epsilon_len"] = s.loss.epsilon_len;
  j["epochs"] = s.epochs;
  j["lr"] = s.lr;
  j["warmup_steps"] = s.warmup_steps;
  j["freeze_k"] = s.freeze_k;
  j["batch_size"] = s.batch_size;
  j["negative_ratio"] = s.negative_ratio;
  j["positive_requires_span"] = s.positive_requires_span;
  j["clip_norm"] = s.optimizer.clip_norm;
  switch (ps.init) {
    case StageInit::scratch: j["init"] = "scratch"; break;
    case StageInit::previous: j["init"] = "previous"; break;
    case StageInit::checkpoint:
      j["init"] = "checkpoint";
      j["init_checkpoint"] = ps.init_checkpoint;
      break;
  }
  return j;
}

PlanStage stage_from_json(const json& j) {
  PlanStage ps;
  training::StageConfig& s = ps.stage;
  s.name = j.at("name").get<std::string>();
  ps.data = dataset_from_json(j.at("data"));
  s.tasks = tasks_from_names(j.at("tasks").get<std::vector<std::string>>());
  if (j.contains("lambda")) s.loss.lambda = j["lambda"].get<Scalar>();
  if (j.contains("adjustable")) s.loss.adjustable = j["adjustable"].get<bool>();
  if (j.contains("epsilon_len")) s.loss.epsilon_len = j["epsilon_len"].get<Scalar>();
  if (j.contains("epochs")) s.epochs = j["epochs"].get<std::size_t>();
  if (j.contains("lr")) s.lr = j["lr"].get<Scalar>();
  if (j.contains("warmup_steps")) s.warmup_steps = j["warmup_steps"].get<std::size_t>();
  if (j.contains("freeze_k")) s.freeze_k = j["freeze_k"].get<int>();
  if (j.contains("batch_size")) s.batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("negative_ratio")) s.negative_ratio = j["negative_ratio"].get<std::size_t>();
  if (j.contains("positive_requires_span")) {
    s.positive_requires_span = j["positive_requires_span"].get<bool>();
  }
  if (j.contains("clip_norm")) s.optimizer.clip_norm = j["clip_norm"].get<Scalar>();
  if (j.contains("init")) {
    const std::string init = j["init"].get<std::string>();
    if (init == "scratch") {
      ps.init = StageInit::scratch;
    } else if (init == "previous") {
      ps.init = StageInit::previous;
    } else if (init == "checkpoint") {
      ps.init = StageInit::checkpoint;
      ps.init_checkpoint = j.at("init_checkpoint").get<std::string>();
    } else {
      throw std::invalid_argument("unknown stage init '" + init + "'");
    }
  }
  return ps;
}

json model_to_json(const ModelSpec& m) {
  return json{{"d", m.d},
              {"layers", m.layers},
              {"heads", m.heads},
              {"max_len", m.max_len},
              {"stride", m.stride},
              {"pooling", heads::pooling_name(m.pooling)},
              {"max_answer_len", m.max_answer_len},
              {"constrained", m.constrained}};
}

ModelSpec model_from_json(const json& j) {
  ModelSpec m;
  if (j.contains("d")) m.d = j["d"].get<std::size_t>();
  if (j.contains("layers")) m.layers = j["layers"].get<std::size_t>();
  if (j.contains("heads")) m.heads = j["heads"].get<std::size_t>();
  if (j.contains("max_len")) m.max_len = j["max_len"].get<std::size_t>();
  if (j.contains("stride")) m.stride = j["stride"].get<std::size_t>();
  if (j.contains("pooling")) m.pooling = heads::parse_pooling(j["pooling"].get<std::string>());
  if (j.contains("max_answer_len")) m.max_answer_len = j["max_answer_len"].get<std::size_t>();
  if (j.contains("constrained")) m.constrained = j["constrained"].get<bool>();
  return m;
}

json eval_to_json(const EvalSpec& e) {
  json j;
  j["data"] = dataset_to_json(e.data);
  j["strategy"] = ranking::strategy_name(e.strategy.strategy);
  j["alpha"] = e.strategy.alpha;
  j["k"] = e.ks;
  if (e.abstain_threshold == ranking::kNeverAbstain) {
    j["tau"] = nullptr;
  } else {
    j["tau"] = e.abstain_threshold;
  }
  return j;
}

EvalSpec eval_from_json(const json& j) {
  EvalSpec e;
  e.data = dataset_from_json(j.at("data"));
  if (j.contains("strategy")) {
    e.strategy.strategy = ranking::parse_strategy(j["strategy"].get<std::string>());
  }
  if (j.contains("alpha")) e.strategy.alpha = j["alpha"].get<Scalar>();
  if (j.contains("k")) e.ks = j["k"].get<std::vector<std::size_t>>();
  if (j.contains("tau") && !j["tau"].is_null()) e.abstain_threshold = j["tau"].get<Scalar>();
  return e;
}

}  // namespace

model::ModelConfig ModelSpec::to_model_config(std::size_t vocab_size, std::uint64_t seed) const {
  model::ModelConfig config;
  config.encoder.vocab_size = vocab_size;
  config.encoder.d = d;
  config.encoder.layers = layers;
  config.encoder.heads = heads;
  config.encoder.max_len = max_len;
  config.encoder.seed = seed;
  config.pooling = pooling;
  config.span.constrained = constrained;
  config.span.max_answer_len = max_answer_len;
  return config;
}

chunking::ChunkingConfig ModelSpec::to_chunking_config() const {
  return {max_len, stride};
}

TrainPlan plan_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("plan file is not valid JSON: ") + e.what());
  }
  TrainPlan plan;
  if (j.contains("name")) plan.name = j["name"].get<std::string>();
  if (j.contains("seed")) plan.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("deterministic")) plan.deterministic = j["deterministic"].get<bool>();
  if (j.contains("model")) plan.model = model_from_json(j["model"]);
  if (j.contains("stages")) {
    for (const json& js : j["stages"]) plan.stages.push_back(stage_from_json(js));
  }
  if (j.contains("eval") && !j["eval"].is_null()) plan.eval = eval_from_json(j["eval"]);
  for (std::size_t i = 0; i < plan.stages.size(); ++i) {
    if (plan.stages[i].init == StageInit::previous && i == 0) {
      throw std::invalid_argument("first stage cannot use init 'previous'");
    }
  }
  return plan;
}

std::string arch_to_json(const ModelSpec& model, std::size_t vocab_size) {
  return json{{"model", model_to_json(model)}, {"vocab_size", vocab_size}}.dump();
}

ArchSnapshot arch_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  ArchSnapshot arch;
  arch.model = model_from_json(j.at("model"));
  arch.vocab_size = j.at("vocab_size").get<std::size_t>();
  return arch;
}

std::string plan_to_json(const TrainPlan& plan) {
  json j;
  j["name"] = plan.name;
  j["seed"] = plan.seed;
  j["deterministic"] = plan.deterministic;
  j["model"] = model_to_json(plan.model);
  j["stages"] = json::array();
  for (const PlanStage& ps : plan.stages) j["stages"].push_back(stage_to_json(ps));
  if (plan.eval.has_value()) j["eval"] = eval_to_json(*plan.eval);
  return j.dump(2);
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{
      "bert_rc",      "bert_dr",          "transt_cls",       "transt_mean",
      "transd_cls",   "transd_mean",      "transtd_cls",      "transtd_mean",
      "transtd_plus_cls", "transtd_plus_mean"};
  return names;
}

TrainPlan make_preset(const std::string& preset, const PresetPaths& paths) {
  const bool cls = preset.ends_with("_cls");
  const bool mean = preset.ends_with("_mean");
  std::string base = preset;
  if (cls) base = preset.substr(0, preset.size() - 4);
  if (mean) base = preset.substr(0, preset.size() - 5);

  const bool has_aux = (base == "transd" || base == "transtd" || base == "transtd_plus");
  const bool adjustable = (base == "transtd_plus");
  model::TaskSet aux_tasks{true, base != "transd"};     // transd pretrains on the span task only
  model::TaskSet target_tasks{true, true};
  if (base == "bert_rc" || base == "transd") target_tasks.relevance = false;
  if (base == "bert_dr") target_tasks.span = false;
  if (base != "bert_rc" && base != "bert_dr" && !cls && !mean) {
    throw std::invalid_argument("unknown preset '" + preset + "' (see preset_names)");
  }
  if ((base == "bert_rc" || base == "bert_dr") && (cls || mean)) {
    throw std::invalid_argument("unknown preset '" + preset + "' (see preset_names)");
  }
  bool known = false;
  for (const std::string& name : preset_names()) known = known || (name == preset);
  if (!known) throw std::invalid_argument("unknown preset '" + preset + "' (see preset_names)");

  TrainPlan plan;
  plan.name = preset;
  plan.model.pooling = cls ? encoder::Pooling::cls : encoder::Pooling::mean;

  auto stage_defaults = [](training::StageConfig& s) {
    s.lr = 1e-3;
    s.warmup_steps = 20;
    s.batch_size = 16;
    s.negative_ratio = 3;
  };

  if (has_aux) {
    PlanStage aux;
    aux.stage.name = "aux_pretrain";
    aux.stage.tasks = aux_tasks;
    // The adjustable factor is a fine-tuning refinement; pretraining stays plain.
    aux.stage.epochs = 3;
    stage_defaults(aux.stage);
    aux.data.questions = paths.aux_questions;
    aux.data.corpus = paths.aux_corpus;
    aux.data.domain = corpus::DomainTag::auxiliary;
    aux.init = StageInit::scratch;
    plan.stages.push_back(std::move(aux));
  }

  PlanStage target;
  target.stage.name = "target_finetune";
  target.stage.tasks = target_tasks;
  target.stage.loss.adjustable = adjustable;
  target.stage.epochs = 2;
  stage_defaults(target.stage);
  target.data.questions = paths.target_questions;
  target.data.corpus = paths.target_corpus;
  target.data.domain = corpus::DomainTag::target;
  target.init = has_aux ? StageInit::previous : StageInit::scratch;
  plan.stages.push_back(std::move(target));

  EvalSpec eval;
  eval.data.questions = paths.eval_questions;
  eval.data.corpus = paths.eval_corpus;
  eval.data.domain = corpus::DomainTag::target;
  if (!target_tasks.relevance) {
    eval.strategy.strategy = ranking::Strategy::ours_without_doc;  // no trained matcher
  } else if (base == "bert_dr") {
    eval.strategy.strategy = ranking::Strategy::ours_with_doc;
    eval.strategy.alpha = 1.0;  // no trained reader; rank purely by p_DR
  } else {
    eval.strategy.strategy = ranking::Strategy::ours_with_doc;
    eval.strategy.alpha = 0.5;
  }
  plan.eval = std::move(eval);
  return plan;
}

namespace {

struct IngestCache {
  std::map<std::string, corpus::Dataset> by_key;

  const corpus::Dataset& get(const DatasetSpec& spec) {
    const std::string key = spec.questions + "|" + spec.corpus + "|" + format_name(spec.format);
    auto it = by_key.find(key);
    if (it == by_key.end()) {
      corpus::Dataset ds = corpus::ingest_dataset(spec.questions, spec.corpus, spec.format);
      ds.domain_tag = spec.domain;
      it = by_key.emplace(key, std::move(ds)).first;
    }
    return it->second;
  }
};

json report_summary_json(const metrics::EvalReport& report) {
  json j;
  j["ma_f1"] = report.ma_f1;
  for (const auto& [k, v] : report.f1_at) j["f1_at"][std::to_string(k)] = v;
  for (const auto& [k, v] : report.ha_f1_at) j["ha_f1_at"][std::to_string(k)] = v;
  j["mrr"] = report.mrr;
  for (const auto& [k, v] : report.recall_at) j["recall_at"][std::to_string(k)] = v;
  return j;
}

}  // namespace

RunResult run_plan(const TrainPlan& plan, const std::filesystem::path& run_dir) {
  std::filesystem::create_directories(run_dir);
  const std::string plan_json = plan_to_json(plan);
  serialize::atomic_write_file(run_dir / "plan.json", plan_json + "\n");

  json manifest;
  manifest["run_id"] = serialize::hex64(serialize::fnv1a64(plan_json));
  manifest["name"] = plan.name;
  manifest["plan"] = json::parse(plan_json);
  manifest["status"] = "running";
  manifest["stages"] = json::array();
  auto flush_manifest = [&]() {
    serialize::atomic_write_file(run_dir / "manifest.json", manifest.dump(2) + "\n");
  };

  RunResult result;
  result.run_dir = run_dir;
  try {
    IngestCache cache;
    std::vector<const corpus::Dataset*> all_datasets;
    for (const PlanStage& ps : plan.stages) all_datasets.push_back(&cache.get(ps.data));
    if (plan.eval.has_value()) all_datasets.push_back(&cache.get(plan.eval->data));

    json input_hashes = json::object();
    auto record_input = [&](const DatasetSpec& spec) {
      for (const std::string& path : {spec.questions, spec.corpus}) {
        if (!input_hashes.contains(path)) input_hashes[path] = serialize::file_hash_hex(path);
      }
    };
    for (const PlanStage& ps : plan.stages) record_input(ps.data);
    if (plan.eval.has_value()) record_input(plan.eval->data);
    manifest["input_hashes"] = input_hashes;

    const corpus::Vocabulary vocab = corpus::Vocabulary::build(all_datasets);
    serialize::save_vocabulary(run_dir / "vocab.json", vocab);
    manifest["vocab_size"] = vocab.size();

    const model::JointModel model(plan.model.to_model_config(vocab.size(), plan.seed));
    const std::string arch = arch_to_json(plan.model, vocab.size());
    const chunking::ChunkingConfig chunk_config = plan.model.to_chunking_config();

    encoder::ParameterSet params;
    bool params_ready = false;
    std::filesystem::path previous_checkpoint;

    for (std::size_t i = 0; i < plan.stages.size(); ++i) {
      const PlanStage& ps = plan.stages[i];
      const std::string stage_label = "stage_" + std::to_string(i) + "_" + ps.stage.name;
      const std::uint64_t head_seed = plan.seed + 7700 + i;

      switch (ps.init) {
        case StageInit::scratch:
          params = encoder::ParameterSet();
          model.init_params(params, plan.seed);
          break;
        case StageInit::previous:
          if (previous_checkpoint.empty()) {
            throw std::runtime_error("stage '" + ps.stage.name +
                                     "' wants the previous checkpoint but none exists");
          }
          training::transfer_init(model, params, previous_checkpoint, head_seed);
          break;
        case StageInit::checkpoint:
          if (!params_ready) {
            params = encoder::ParameterSet();
            model.init_params(params, plan.seed);
          }
          training::transfer_init(model, params, ps.init_checkpoint, head_seed);
          break;
      }
      params_ready = true;

      const corpus::Dataset& dataset = cache.get(ps.data);
      const std::vector<training::QuestionBlocks> questions = training::build_question_blocks(
          dataset, vocab, chunk_config, ps.stage.positive_requires_span);
      const training::StageResult stage_result =
          training::run_stage(model, params, ps.stage, questions, plan.seed + 1000 * (i + 1));

      serialize::JsonlWriter log(run_dir / (stage_label + ".log.jsonl"));
      for (const training::StepLog& entry : stage_result.log) {
        log.write_line(json{{"step", entry.step},
                            {"l_rc", entry.l_rc},
                            {"l_dr", entry.l_dr},
                            {"w_adjust", entry.w_adjust},
                            {"total", entry.total},
                            {"lr", entry.lr}}
                           .dump());
      }

      training::CheckpointManifest cm;
      cm.stage = ps.stage.name;
      cm.step = stage_result.steps;
      cm.domain_tag = domain_name(ps.data.domain);
      cm.tasks = tasks_to_names(ps.stage.tasks);
      cm.config_json = arch;
      const std::filesystem::path checkpoint_dir = run_dir / stage_label;
      training::save_checkpoint(checkpoint_dir, params, cm);
      previous_checkpoint = checkpoint_dir;
      result.stage_checkpoints.push_back(checkpoint_dir);

      manifest["stages"].push_back(json{
          {"name", ps.stage.name},
          {"checkpoint", checkpoint_dir.filename().string()},
          {"steps", stage_result.steps},
          {"log", (stage_label + ".log.jsonl")},
          {"tensors_hash", serialize::file_hash_hex(checkpoint_dir / "tensors.bin")}});
      flush_manifest();
    }

    if (plan.eval.has_value()) {
      if (!params_ready) {
        params = encoder::ParameterSet();
        model.init_params(params, plan.seed);
      }
      const corpus::Dataset& eval_dataset = cache.get(plan.eval->data);
      const std::vector<training::QuestionBlocks> questions =
          training::build_question_blocks(eval_dataset, vocab, chunk_config);
      pipeline::PredictOptions options;
      options.strategy = plan.eval->strategy;
      options.abstain_threshold = plan.eval->abstain_threshold;
      std::size_t max_k = 1;
      for (std::size_t k : plan.eval->ks) max_k = std::max(max_k, k);
      options.top_k = max_k;

      const std::vector<pipeline::QuestionPrediction> predictions =
          pipeline::predict_dataset(model, params, questions, options);
      pipeline::write_predictions(run_dir / "predictions.jsonl", predictions, eval_dataset);
      pipeline::write_doc_rankings(run_dir / "docranks.json", predictions);
      metrics::EvalReport report =
          pipeline::evaluate_predictions(predictions, eval_dataset, plan.eval->ks);
      serialize::atomic_write_file(run_dir / "report.json",
                                   metrics::report_to_json(report) + "\n");
      manifest["predictions"] = "predictions.jsonl";
      manifest["doc_rankings"] = "docranks.json";
      manifest["report"] = "report.json";
      manifest["report_summary"] = report_summary_json(report);
      result.report = std::move(report);
    }

    manifest["status"] = "complete";
    flush_manifest();
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    flush_manifest();
    throw;
  }

  result.manifest_json = manifest.dump(2);
  return result;
}

SweepResult run_sweep(const TrainPlan& base, const std::string& parameter,
                      const std::vector<std::string>& values,
                      const std::filesystem::path& run_dir) {
  if (values.empty()) throw std::invalid_argument("sweep: no values given");
  if (parameter != "lambda" && parameter != "stride" && parameter != "freeze_k" &&
      parameter != "alpha") {
    throw std::invalid_argument("sweep: unknown parameter '" + parameter +
                                "' (expected lambda, stride, freeze_k, or alpha)");
  }

  SweepResult sweep;
  sweep.parameter = parameter;
  for (const std::string& value : values) {
    SweepEntry entry;
    entry.value = value;
    try {
      TrainPlan plan = base;
      plan.name = base.name + "_" + parameter + "_" + value;
      if (parameter == "lambda") {
        const Scalar v = std::stod(value);
        for (PlanStage& ps : plan.stages) ps.stage.loss.lambda = v;
      } else if (parameter == "stride") {
        plan.model.stride = static_cast<std::size_t>(std::stoul(value));
      } else if (parameter == "freeze_k") {
        if (plan.stages.empty()) throw std::runtime_error("plan has no stages to freeze");
        plan.stages.back().stage.freeze_k = std::stoi(value);
      } else {  // alpha
        if (!plan.eval.has_value()) throw std::runtime_error("plan has no eval section");
        plan.eval->strategy.alpha = std::stod(value);
      }
      const RunResult run = run_plan(plan, run_dir / (parameter + "_" + value));
      entry.ok = true;
      entry.report = run.report;
    } catch (const std::exception& e) {
      entry.ok = false;
      entry.error = e.what();
    }
    sweep.entries.push_back(std::move(entry));
  }

  std::ostringstream table;
  table.setf(std::ios::fixed);
  table.precision(4);
  table << parameter << "\tma_f1\tha_f1@1\tmrr\tr@1\tr@5\n";
  for (const SweepEntry& entry : sweep.entries) {
    table << entry.value << "\t";
    if (entry.ok && entry.report.has_value()) {
      const metrics::EvalReport& r = *entry.report;
      auto at = [](const std::map<std::size_t, Scalar>& m, std::size_t k) {
        auto it = m.find(k);
        return it == m.end() ? 0.0 : it->second;
      };
      table << r.ma_f1 << "\t" << at(r.ha_f1_at, 1) << "\t" << r.mrr << "\t"
            << at(r.recall_at, 1) << "\t" << at(r.recall_at, 5) << "\n";
    } else {
      table << "FAILED: " << entry.error << "\n";
    }
  }
  sweep.table = table.str();
  serialize::atomic_write_file(run_dir / ("sweep_" + parameter + ".txt"), sweep.table);
  return sweep;
}

}  // namespace jointqa::plans
