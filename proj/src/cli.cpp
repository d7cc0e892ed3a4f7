#include "jointqa/cli.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "jointqa/corpus.hpp"
#include "jointqa/heads.hpp"
#include "jointqa/metrics.hpp"
#include "jointqa/pipeline.hpp"
#include "jointqa/plans.hpp"
#include "jointqa/ranking.hpp"
#include "jointqa/retrieval.hpp"
#include "jointqa/serialize.hpp"
#include "jointqa/synthetic.hpp"
#include "jointqa/training.hpp"

namespace jointqa::cli {

namespace {

using nlohmann::json;

corpus::DatasetFormat parse_format_flag(const std::string& s) {
  if (s == "target") return corpus::DatasetFormat::target_qa_json;
  if (s == "auxiliary") return corpus::DatasetFormat::auxiliary_qa_json;
  throw std::invalid_argument("unknown format '" + s + "' (expected target or auxiliary)");
}

// ---- index persistence -----------------------------------------------------

void save_index(const std::filesystem::path& path, const retrieval::InvertedIndex& index) {
  json j;
  j["doc_count"] = index.doc_count;
  j["avg_doc_length"] = index.avg_doc_length;
  j["doc_lengths"] = json::object();
  for (const auto& [doc_id, len] : index.doc_lengths) j["doc_lengths"][doc_id] = len;
  j["postings"] = json::object();
  for (const auto& [term, postings] : index.postings) {
    json arr = json::array();
    for (const retrieval::Posting& p : postings) arr.push_back({p.doc_id, p.term_frequency});
    j["postings"][term] = std::move(arr);
  }
  serialize::atomic_write_file(path, j.dump() + "\n");
}

retrieval::InvertedIndex load_index(const std::filesystem::path& path) {
  const json j = json::parse(serialize::read_file(path));
  retrieval::InvertedIndex index;
  index.doc_count = j.at("doc_count").get<std::size_t>();
  index.avg_doc_length = j.at("avg_doc_length").get<double>();
  for (const auto& [doc_id, len] : j.at("doc_lengths").items()) {
    index.doc_lengths[doc_id] = len.get<std::size_t>();
  }
  for (const auto& [term, arr] : j.at("postings").items()) {
    std::vector<retrieval::Posting>& postings = index.postings[term];
    for (const json& p : arr) {
      postings.push_back({p.at(0).get<std::string>(), p.at(1).get<std::size_t>()});
    }
  }
  return index;
}

std::map<std::string, corpus::Document> load_corpus_documents(const std::string& path) {
  const json j = json::parse(serialize::read_file(path));
  if (!j.is_array()) throw std::runtime_error("corpus file must be a JSON array: " + path);
  std::map<std::string, corpus::Document> documents;
  for (const json& rec : j) {
    corpus::Document doc;
    doc.doc_id = rec.at("doc_id").get<std::string>();
    doc.text = rec.at("text").get<std::string>();
    corpus::tokenize_document(doc);
    documents.emplace(doc.doc_id, std::move(doc));
  }
  return documents;
}

/// Question list for retrieval: tolerates files without candidate pools.
std::vector<corpus::Question> load_bare_questions(const std::string& path,
                                                  corpus::DatasetFormat format) {
  const json j = json::parse(serialize::read_file(path));
  if (!j.is_array()) throw std::runtime_error("question file must be a JSON array: " + path);
  std::vector<corpus::Question> questions;
  for (const json& rec : j) {
    corpus::Question q;
    q.question_id = rec.at("question_id").get<std::string>();
    if (format == corpus::DatasetFormat::target_qa_json) {
      q.title = rec.value("title", std::string{});
      q.body = rec.value("body", std::string{});
    } else {
      q.body = rec.at("text").get<std::string>();
    }
    q.tokens = corpus::question_tokens(q.title, q.body);
    questions.push_back(std::move(q));
  }
  return questions;
}

// ---- checkpoint-backed prediction ------------------------------------------

struct LoadedModel {
  plans::ArchSnapshot arch;
  corpus::Vocabulary vocab;
  model::JointModel model;
  encoder::ParameterSet params;
};

LoadedModel load_model(const std::string& checkpoint_dir, const std::string& vocab_path) {
  const training::CheckpointManifest manifest =
      training::load_checkpoint_manifest(checkpoint_dir);
  plans::ArchSnapshot arch = plans::arch_from_json(manifest.config_json);
  corpus::Vocabulary vocab = serialize::load_vocabulary(vocab_path);
  if (vocab.size() != arch.vocab_size) {
    throw std::runtime_error("vocabulary size " + std::to_string(vocab.size()) +
                             " does not match the checkpoint's " +
                             std::to_string(arch.vocab_size));
  }
  model::JointModel model(arch.model.to_model_config(arch.vocab_size, 1));
  encoder::ParameterSet params;
  model.init_params(params, 1);
  training::load_checkpoint(checkpoint_dir, params);
  return LoadedModel{std::move(arch), std::move(vocab), std::move(model), std::move(params)};
}

// ---- subcommands -----------------------------------------------------------

struct IngestOpts {
  std::string questions, corpus, format = "target";
};

int cmd_ingest(const IngestOpts& opt) {
  const corpus::Dataset ds =
      corpus::ingest_dataset(opt.questions, opt.corpus, parse_format_flag(opt.format));
  const std::size_t answerable = ds.answerable_count();
  std::cout << ds.examples.size() << " questions (" << answerable << " answerable, "
            << (ds.examples.size() - answerable) << " unanswerable), " << ds.documents.size()
            << " documents\n";
  return 0;
}

struct IndexOpts {
  std::string corpus, out;
};

int cmd_index(const IndexOpts& opt) {
  const auto documents = load_corpus_documents(opt.corpus);
  const retrieval::InvertedIndex index = retrieval::build_index(documents);
  save_index(opt.out, index);
  std::cout << "indexed " << index.doc_count << " documents, " << index.postings.size()
            << " terms -> " << opt.out << "\n";
  return 0;
}

struct RetrieveOpts {
  std::string questions, format = "target", index, corpus, out;
  std::size_t k = 50;
  bool title_only = false;
};

int cmd_retrieve(const RetrieveOpts& opt) {
  retrieval::InvertedIndex index;
  if (!opt.index.empty()) {
    index = load_index(opt.index);
  } else if (!opt.corpus.empty()) {
    index = retrieval::build_index(load_corpus_documents(opt.corpus));
  } else {
    throw std::runtime_error("retrieve needs --index or --corpus");
  }
  const auto questions = load_bare_questions(opt.questions, parse_format_flag(opt.format));
  json out = json::object();
  for (const corpus::Question& q : questions) {
    const auto scored =
        retrieval::retrieve(index, retrieval::query_tokens(q, opt.title_only), opt.k);
    json docs = json::array();
    for (const retrieval::ScoredDoc& sd : scored) docs.push_back(sd.doc_id);
    out[q.question_id] = std::move(docs);
  }
  serialize::atomic_write_file(opt.out, out.dump(2) + "\n");
  std::cout << "retrieved top-" << opt.k << " for " << questions.size() << " questions -> "
            << opt.out << "\n";
  return 0;
}

struct TrainOpts {
  std::string plan_file, preset, out = "run";
  plans::PresetPaths paths;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool deterministic = false;
  std::optional<double> lambda, alpha, lr, tau;
  std::optional<std::size_t> stride, epochs, batch_size, warmup;
  std::optional<int> freeze_k;
  std::string pooling, strategy;
  bool adjustable = false;
  std::vector<std::size_t> ks;
};

plans::TrainPlan assemble_plan(const TrainOpts& opt) {
  plans::TrainPlan plan;
  if (!opt.plan_file.empty()) {
    plan = plans::plan_from_json(serialize::read_file(opt.plan_file));
  } else if (!opt.preset.empty()) {
    plan = plans::make_preset(opt.preset, opt.paths);
  } else {
    throw std::runtime_error("train needs --plan or --preset");
  }
  if (opt.seed_set) plan.seed = opt.seed;
  if (opt.deterministic) plan.deterministic = true;
  if (opt.lambda) {
    for (plans::PlanStage& ps : plan.stages) ps.stage.loss.lambda = *opt.lambda;
  }
  if (opt.adjustable) {
    for (plans::PlanStage& ps : plan.stages) ps.stage.loss.adjustable = true;
  }
  if (opt.lr) {
    for (plans::PlanStage& ps : plan.stages) ps.stage.lr = *opt.lr;
  }
  if (opt.epochs) {
    for (plans::PlanStage& ps : plan.stages) ps.stage.epochs = *opt.epochs;
  }
  if (opt.batch_size) {
    for (plans::PlanStage& ps : plan.stages) ps.stage.batch_size = *opt.batch_size;
  }
  if (opt.warmup) {
    for (plans::PlanStage& ps : plan.stages) ps.stage.warmup_steps = *opt.warmup;
  }
  if (opt.freeze_k) {
    if (plan.stages.empty()) throw std::runtime_error("--freeze-k needs at least one stage");
    plan.stages.back().stage.freeze_k = *opt.freeze_k;
  }
  if (opt.stride) plan.model.stride = *opt.stride;
  if (!opt.pooling.empty()) plan.model.pooling = heads::parse_pooling(opt.pooling);
  if (plan.eval.has_value()) {
    if (opt.alpha) plan.eval->strategy.alpha = *opt.alpha;
    if (!opt.strategy.empty()) {
      plan.eval->strategy.strategy = ranking::parse_strategy(opt.strategy);
    }
    if (!opt.ks.empty()) plan.eval->ks = opt.ks;
    if (opt.tau) plan.eval->abstain_threshold = *opt.tau;
  }
  return plan;
}

int cmd_train(const TrainOpts& opt) {
  const plans::TrainPlan plan = assemble_plan(opt);
  const plans::RunResult result = plans::run_plan(plan, opt.out);
  std::cout << "run complete: " << result.run_dir.string() << "\n";
  for (const auto& cp : result.stage_checkpoints) {
    std::cout << "  checkpoint " << cp.filename().string() << "\n";
  }
  if (result.report.has_value()) std::cout << metrics::report_to_table(*result.report);
  return 0;
}

struct PredictOpts {
  std::string checkpoint, vocab, questions, corpus, format = "target";
  std::string strategy = "ours_with_doc";
  double alpha = 0.5;
  std::size_t k = 5;
  std::optional<double> tau;
  std::string out = "predictions.jsonl", docranks;
};

int cmd_predict(const PredictOpts& opt) {
  LoadedModel lm = load_model(opt.checkpoint, opt.vocab);
  corpus::Dataset dataset =
      corpus::ingest_dataset(opt.questions, opt.corpus, parse_format_flag(opt.format));
  const auto questions = training::build_question_blocks(
      dataset, lm.vocab, lm.arch.model.to_chunking_config());
  pipeline::PredictOptions options;
  options.strategy.strategy = ranking::parse_strategy(opt.strategy);
  options.strategy.alpha = opt.alpha;
  options.top_k = opt.k;
  if (opt.tau) options.abstain_threshold = *opt.tau;
  const auto predictions = pipeline::predict_dataset(lm.model, lm.params, questions, options);
  pipeline::write_predictions(opt.out, predictions, dataset);
  if (!opt.docranks.empty()) pipeline::write_doc_rankings(opt.docranks, predictions);
  std::cout << "wrote top-" << opt.k << " predictions for " << predictions.size()
            << " questions -> " << opt.out << "\n";
  return 0;
}

struct EvaluateOpts {
  std::string pred, gold, corpus, format = "target", docs, json_out;
  std::vector<std::size_t> ks{1, 5};
};

int cmd_evaluate(const EvaluateOpts& opt) {
  const corpus::Dataset dataset =
      corpus::ingest_dataset(opt.gold, opt.corpus, parse_format_flag(opt.format));
  const auto rows = metrics::read_predictions_jsonl(opt.pred);
  std::map<std::string, std::vector<std::string>> rankings;
  if (!opt.docs.empty()) rankings = metrics::read_doc_rankings(opt.docs);
  const metrics::EvalReport report = metrics::evaluate(rows, dataset, opt.ks, rankings);
  std::cout << metrics::report_to_table(report);
  if (!opt.json_out.empty()) {
    serialize::atomic_write_file(opt.json_out, metrics::report_to_json(report) + "\n");
  }
  return 0;
}

struct AnalyzeOpts {
  std::string pred, gold, corpus, format = "target", docs;
  std::size_t examples = 5;
};

int cmd_analyze_errors(const AnalyzeOpts& opt) {
  const corpus::Dataset dataset =
      corpus::ingest_dataset(opt.gold, opt.corpus, parse_format_flag(opt.format));
  const auto rows = metrics::read_predictions_jsonl(opt.pred);
  std::map<std::string, std::vector<std::string>> rankings;
  if (!opt.docs.empty()) rankings = metrics::read_doc_rankings(opt.docs);
  const metrics::EvalReport report = metrics::evaluate(rows, dataset, {1}, rankings);

  std::cout << "answerable questions: " << report.answerable_count << "\n";
  for (const auto& [cls, count] : report.error_histogram) {
    std::cout << cls << ": " << count;
    std::size_t shown = 0;
    std::string sample;
    for (const metrics::QuestionResult& qr : report.per_question) {
      if (qr.error_class != cls) continue;
      if (shown++ == opt.examples) break;
      sample += (sample.empty() ? "" : ", ") + qr.question_id;
    }
    if (!sample.empty()) std::cout << "  (e.g. " << sample << ")";
    std::cout << "\n";
  }
  return 0;
}

struct SweepOpts {
  TrainOpts base;
  std::string param;
  std::vector<std::string> values;
};

int cmd_sweep(const SweepOpts& opt) {
  const plans::TrainPlan base = assemble_plan(opt.base);
  const plans::SweepResult sweep =
      plans::run_sweep(base, opt.param, opt.values, opt.base.out);
  std::cout << sweep.table;
  return 0;
}

struct ChunkOpts {
  std::string questions, corpus, format = "target";
  std::size_t max_len = 96, stride = 48;
  std::string question_id;
  bool dump = false;
};

int cmd_chunk(const ChunkOpts& opt) {
  const corpus::Dataset dataset =
      corpus::ingest_dataset(opt.questions, opt.corpus, parse_format_flag(opt.format));
  const corpus::Vocabulary vocab = corpus::Vocabulary::build({&dataset});
  const chunking::ChunkingConfig config{opt.max_len, opt.stride};
  for (const corpus::QAExample& ex : dataset.examples) {
    if (!opt.question_id.empty() && ex.question.question_id != opt.question_id) continue;
    for (const std::string& doc_id : ex.candidate_doc_ids) {
      std::optional<std::pair<std::size_t, std::size_t>> gold;
      if (ex.gold.has_value() && ex.gold->doc_id == doc_id) {
        gold = std::make_pair(ex.gold->start, ex.gold->end);
      }
      const auto blocks =
          chunking::make_blocks(ex.question, dataset.document(doc_id), vocab, config, gold);
      for (const chunking::Block& b : blocks) {
        json j;
        j["question_id"] = b.question_id;
        j["doc_id"] = b.doc_id;
        j["block_index"] = b.block_index;
        j["doc_window"] = {b.doc_window_first, b.doc_window_last};
        j["label"] = {b.label.start, b.label.end};
        std::cout << j.dump() << "\n";
      }
    }
  }
  return 0;
}

struct SynthOpts {
  std::string domain = "alpha", out = ".", stem;
  std::size_t questions = 200, pool = 20;
  std::uint64_t seed = 1;
  double unanswerable = 0.0;
};

int cmd_synth(const SynthOpts& opt) {
  synthetic::SyntheticConfig config;
  config.domain = opt.domain;
  config.questions = opt.questions;
  config.pool_size = opt.pool;
  config.seed = opt.seed;
  config.unanswerable_fraction = opt.unanswerable;
  const std::string stem = opt.stem.empty() ? opt.domain : opt.stem;
  synthetic::write_dataset(opt.out, stem, config);
  std::cout << "wrote " << (std::filesystem::path(opt.out) / (stem + ".questions.json")).string()
            << " and " << (std::filesystem::path(opt.out) / (stem + ".corpus.json")).string()
            << "\n";
  return 0;
}

void add_train_options(CLI::App* sub, TrainOpts& opt) {
  sub->add_option("--plan", opt.plan_file, "train-plan JSON file");
  sub->add_option("--preset", opt.preset, "preset plan name")
      ->check(CLI::IsMember(plans::preset_names()));
  sub->add_option("--aux-questions", opt.paths.aux_questions);
  sub->add_option("--aux-corpus", opt.paths.aux_corpus);
  sub->add_option("--questions", opt.paths.target_questions);
  sub->add_option("--corpus", opt.paths.target_corpus);
  sub->add_option("--eval-questions", opt.paths.eval_questions);
  sub->add_option("--eval-corpus", opt.paths.eval_corpus);
  sub->add_option("--out", opt.out, "run directory");
  sub->add_option("--seed", opt.seed)->each([&opt](const std::string&) { opt.seed_set = true; });
  sub->add_flag("--deterministic", opt.deterministic, "single-threaded reproducible mode");
  sub->add_option_function<double>("--lambda",
                                   [&opt](const double& v) { opt.lambda = v; },
                                   "relevance-loss weight for every stage");
  sub->add_flag("--adjustable", opt.adjustable, "enable the length-adjusted span loss");
  sub->add_option_function<std::size_t>("--stride",
                                        [&opt](const std::size_t& v) { opt.stride = v; });
  sub->add_option("--pooling", opt.pooling)->check(CLI::IsMember({"cls", "mean"}));
  sub->add_option_function<int>("--freeze-k",
                                [&opt](const int& v) { opt.freeze_k = v; },
                                "trainable top layers in the final stage");
  sub->add_option_function<double>("--alpha", [&opt](const double& v) { opt.alpha = v; });
  sub->add_option("--strategy", opt.strategy)
      ->check(CLI::IsMember({"ours_with_doc", "ours_without_doc", "wklm", "mp_bert"}));
  sub->add_option("--k", opt.ks, "evaluation cutoffs")->delimiter(',');
  sub->add_option_function<double>("--tau", [&opt](const double& v) { opt.tau = v; },
                                   "abstention threshold");
  sub->add_option_function<double>("--lr", [&opt](const double& v) { opt.lr = v; });
  sub->add_option_function<std::size_t>("--epochs",
                                        [&opt](const std::size_t& v) { opt.epochs = v; });
  sub->add_option_function<std::size_t>("--batch-size",
                                        [&opt](const std::size_t& v) { opt.batch_size = v; });
  sub->add_option_function<std::size_t>("--warmup",
                                        [&opt](const std::size_t& v) { opt.warmup = v; });
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"joint retrieval + reading-comprehension QA pipeline"};
  app.require_subcommand(1);
  int exit_code = 0;

  IngestOpts ingest_opt;
  auto* ingest = app.add_subcommand("ingest", "validate a dataset and report counts");
  ingest->add_option("--questions", ingest_opt.questions)->required();
  ingest->add_option("--corpus", ingest_opt.corpus)->required();
  ingest->add_option("--format", ingest_opt.format)->check(CLI::IsMember({"target", "auxiliary"}));
  ingest->callback([&]() { exit_code = cmd_ingest(ingest_opt); });

  IndexOpts index_opt;
  auto* index = app.add_subcommand("index", "build a BM25 inverted index");
  index->add_option("--corpus", index_opt.corpus)->required();
  index->add_option("--out", index_opt.out)->required();
  index->callback([&]() { exit_code = cmd_index(index_opt); });

  RetrieveOpts retrieve_opt;
  auto* retrieve = app.add_subcommand("retrieve", "rank candidate documents per question");
  retrieve->add_option("--questions", retrieve_opt.questions)->required();
  retrieve->add_option("--format", retrieve_opt.format)
      ->check(CLI::IsMember({"target", "auxiliary"}));
  retrieve->add_option("--index", retrieve_opt.index);
  retrieve->add_option("--corpus", retrieve_opt.corpus);
  retrieve->add_option("--k", retrieve_opt.k);
  retrieve->add_flag("--title-only", retrieve_opt.title_only);
  retrieve->add_option("--out", retrieve_opt.out)->required();
  retrieve->callback([&]() { exit_code = cmd_retrieve(retrieve_opt); });

  TrainOpts train_opt;
  auto* train = app.add_subcommand("train", "run a multi-stage training plan");
  add_train_options(train, train_opt);
  train->callback([&]() { exit_code = cmd_train(train_opt); });

  PredictOpts predict_opt;
  auto* predict = app.add_subcommand("predict", "rank answers with a trained checkpoint");
  predict->add_option("--checkpoint", predict_opt.checkpoint)->required();
  predict->add_option("--vocab", predict_opt.vocab)->required();
  predict->add_option("--questions", predict_opt.questions)->required();
  predict->add_option("--corpus", predict_opt.corpus)->required();
  predict->add_option("--format", predict_opt.format)
      ->check(CLI::IsMember({"target", "auxiliary"}));
  predict->add_option("--strategy", predict_opt.strategy)
      ->check(CLI::IsMember({"ours_with_doc", "ours_without_doc", "wklm", "mp_bert"}));
  predict->add_option("--alpha", predict_opt.alpha);
  predict->add_option("--k", predict_opt.k);
  predict->add_option_function<double>("--tau",
                                       [&predict_opt](const double& v) { predict_opt.tau = v; });
  predict->add_option("--out", predict_opt.out);
  predict->add_option("--docranks", predict_opt.docranks);
  predict->callback([&]() { exit_code = cmd_predict(predict_opt); });

  EvaluateOpts evaluate_opt;
  auto* evaluate = app.add_subcommand("evaluate", "score predictions against gold answers");
  evaluate->add_option("--pred", evaluate_opt.pred)->required();
  evaluate->add_option("--gold", evaluate_opt.gold)->required();
  evaluate->add_option("--corpus", evaluate_opt.corpus)->required();
  evaluate->add_option("--format", evaluate_opt.format)
      ->check(CLI::IsMember({"target", "auxiliary"}));
  evaluate->add_option("--docs", evaluate_opt.docs, "document-ranking JSON for MRR/R@K");
  evaluate->add_option("--k", evaluate_opt.ks)->delimiter(',');
  evaluate->add_option("--json-out", evaluate_opt.json_out);
  evaluate->callback([&]() { exit_code = cmd_evaluate(evaluate_opt); });

  SweepOpts sweep_opt;
  auto* sweep = app.add_subcommand("sweep", "re-run a plan over a parameter grid");
  add_train_options(sweep, sweep_opt.base);
  sweep->add_option("--param", sweep_opt.param)
      ->required()
      ->check(CLI::IsMember({"lambda", "stride", "freeze_k", "alpha"}));
  sweep->add_option("--values", sweep_opt.values)->required()->delimiter(',');
  sweep->callback([&]() { exit_code = cmd_sweep(sweep_opt); });

  AnalyzeOpts analyze_opt;
  auto* analyze = app.add_subcommand("analyze-errors", "top-1 error breakdown");
  analyze->add_option("--pred", analyze_opt.pred)->required();
  analyze->add_option("--gold", analyze_opt.gold)->required();
  analyze->add_option("--corpus", analyze_opt.corpus)->required();
  analyze->add_option("--format", analyze_opt.format)
      ->check(CLI::IsMember({"target", "auxiliary"}));
  analyze->add_option("--docs", analyze_opt.docs);
  analyze->add_option("--examples", analyze_opt.examples, "sample question ids per class");
  analyze->callback([&]() { exit_code = cmd_analyze_errors(analyze_opt); });

  ChunkOpts chunk_opt;
  auto* chunk = app.add_subcommand("chunk", "dump the block plan for a dataset");
  chunk->add_option("--questions", chunk_opt.questions)->required();
  chunk->add_option("--corpus", chunk_opt.corpus)->required();
  chunk->add_option("--format", chunk_opt.format)->check(CLI::IsMember({"target", "auxiliary"}));
  chunk->add_option("--max-len", chunk_opt.max_len);
  chunk->add_option("--stride", chunk_opt.stride);
  chunk->add_option("--question-id", chunk_opt.question_id, "restrict to one question");
  chunk->add_flag("--dump", chunk_opt.dump, "print one JSON line per block");
  chunk->callback([&]() { exit_code = cmd_chunk(chunk_opt); });

  SynthOpts synth_opt;
  auto* synth = app.add_subcommand("synth", "generate a planted-pattern QA dataset");
  synth->add_option("--domain", synth_opt.domain);
  synth->add_option("--questions", synth_opt.questions);
  synth->add_option("--pool", synth_opt.pool);
  synth->add_option("--seed", synth_opt.seed);
  synth->add_option("--unanswerable", synth_opt.unanswerable, "fraction without an answer");
  synth->add_option("--out", synth_opt.out, "output directory");
  synth->add_option("--stem", synth_opt.stem, "file name stem (defaults to the domain)");
  synth->callback([&]() { exit_code = cmd_synth(synth_opt); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}

}  // namespace jointqa::cli
