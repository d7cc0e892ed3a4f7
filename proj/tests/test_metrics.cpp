#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "doctest.h"

#include "jointqa/corpus.hpp"
#include "jointqa/metrics.hpp"

using namespace jointqa;
using namespace jointqa::metrics;

namespace {

std::optional<corpus::AnswerSpan> span(const std::string& doc, std::size_t s, std::size_t e) {
  return corpus::AnswerSpan{doc, s, e};
}

const std::optional<corpus::AnswerSpan> kAbstain = std::nullopt;

const char* kCorpus = R"([
  {"doc_id": "d1", "text": "install fix pack nine"},
  {"doc_id": "d2", "text": "restart the server after upgrade"},
  {"doc_id": "d3", "text": "error code forty two"},
  {"doc_id": "d4", "text": "check the log files"},
  {"doc_id": "d5", "text": "update the configuration file"}
])";

const char* kQuestions = R"([
  {"question_id": "q1", "title": "install problem", "body": "how to install",
   "candidate_doc_ids": ["d1", "d3"],
   "answer": {"doc_id": "d1", "start_char": 0, "end_char": 16}},
  {"question_id": "q2", "title": "server down", "body": "what now",
   "candidate_doc_ids": ["d2", "d4", "d5"],
   "answer": {"doc_id": "d2", "start_char": 0, "end_char": 18}},
  {"question_id": "q3", "title": "strange error", "body": "meaning",
   "candidate_doc_ids": ["d3"], "answer": null}
])";

PredictedAnswer row(const std::string& qid, std::size_t rank, const std::string& doc,
                    std::size_t s, std::size_t e, bool no_answer = false) {
  PredictedAnswer r;
  r.question_id = qid;
  r.rank = rank;
  r.doc_id = doc;
  r.start_char = s;
  r.end_char = e;
  r.no_answer = no_answer;
  return r;
}

std::filesystem::path temp_file(const std::string& stem) {
  return std::filesystem::temp_directory_path() / ("jointqa_test_" + stem);
}

}  // namespace

TEST_CASE("token-overlap F1 at its fixed points") {
  // 8-token prediction against an 8-token gold sharing 5 tokens.
  CHECK(span_f1(span("d", 0, 7), span("d", 3, 10)) == doctest::Approx(0.625).epsilon(1e-12));
  CHECK(span_f1(span("d", 2, 5), span("d", 2, 5)) == 1.0);
  CHECK(span_f1(kAbstain, kAbstain) == 1.0);
  CHECK(span_f1(kAbstain, span("d", 2, 5)) == 0.0);
  CHECK(span_f1(span("d", 2, 5), kAbstain) == 0.0);
  CHECK(span_f1(span("a", 2, 5), span("b", 2, 5)) == 0.0);  // different documents
  CHECK(span_f1(span("d", 0, 2), span("d", 3, 10)) == 0.0);  // disjoint
  CHECK(span_f1(span("d", 3, 3), span("d", 0, 11)) ==
        doctest::Approx(2.0 * 1.0 * (1.0 / 12.0) / (1.0 + 1.0 / 12.0)).epsilon(1e-12));
}

TEST_CASE("token-overlap F1 is symmetric and bounded") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const std::size_t s1 = rng() % 20, s2 = rng() % 20;
    const auto a = span("d", s1, s1 + rng() % 8);
    const auto b = span("d", s2, s2 + rng() % 8);
    const Scalar ab = span_f1(a, b);
    CHECK(ab == doctest::Approx(span_f1(b, a)).epsilon(1e-12));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
  }
}

TEST_CASE("macro F1 family: top-1 equals F1@1 and F1@K grows with K") {
  const std::vector<std::vector<Scalar>> f1s = {{0.5, 1.0}, {0.0, 0.0, 0.5}, {1.0}};
  const std::vector<bool> answerable = {true, true, false};
  const F1Summary sum = macro_f1(f1s, answerable, {1, 2, 3});
  CHECK(sum.ma_f1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sum.f1_at.at(1) == doctest::Approx(sum.ma_f1).epsilon(1e-12));
  CHECK(sum.f1_at.at(2) == doctest::Approx((1.0 + 0.0 + 1.0) / 3.0).epsilon(1e-12));
  CHECK(sum.f1_at.at(3) == doctest::Approx((1.0 + 0.5 + 1.0) / 3.0).epsilon(1e-12));
  CHECK(sum.f1_at.at(1) <= sum.f1_at.at(2));
  CHECK(sum.f1_at.at(2) <= sum.f1_at.at(3));
  // Answerable-only averages skip question 3.
  CHECK(sum.ha_f1_at.at(1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(sum.ha_f1_at.at(3) == doctest::Approx(0.75).epsilon(1e-12));

  CHECK_THROWS(macro_f1({{0.5}, {}}, {true, true}, {1}));
  CHECK_THROWS(macro_f1({{0.5}}, {true, false}, {1}));
}

TEST_CASE("reciprocal rank and recall at the documented operating point") {
  const auto [mrr, recall] = mrr_recall({1, 2, 4}, {1, 2, 4});
  CHECK(mrr == doctest::Approx(7.0 / 12.0).epsilon(1e-12));
  CHECK(recall.at(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(recall.at(2) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(recall.at(4) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a missing gold document counts as zero, not as absent") {
  const auto [mrr, recall] = mrr_recall({1, 2, 4, 0}, {4});
  CHECK(mrr == doctest::Approx(7.0 / 16.0).epsilon(1e-12));
  CHECK(recall.at(4) == doctest::Approx(0.75).epsilon(1e-12));
  const auto [empty_mrr, empty_recall] = mrr_recall({}, {1});
  CHECK(empty_mrr == 0.0);
  CHECK(empty_recall.at(1) == 0.0);
}

TEST_CASE("error classes partition the outcomes") {
  const corpus::AnswerSpan gold{"d", 10, 20};
  CHECK(classify_error(span("d", 10, 20), gold) == "correct_span");
  CHECK(classify_error(span("d", 12, 18), gold) == "span_too_small");
  CHECK(classify_error(span("d", 8, 22), gold) == "span_too_large");
  // Containment must be strict on both ends.
  CHECK(classify_error(span("d", 10, 18), gold) == "span_mismatch");
  CHECK(classify_error(span("d", 12, 20), gold) == "span_mismatch");
  CHECK(classify_error(span("d", 10, 22), gold) == "span_mismatch");
  CHECK(classify_error(span("d", 8, 20), gold) == "span_mismatch");
  CHECK(classify_error(span("d", 5, 12), gold) == "span_mismatch");
  CHECK(classify_error(span("d", 25, 30), gold) == "span_mismatch");  // disjoint, same doc
  CHECK(classify_error(span("x", 10, 20), gold) == "wrong_doc");
  CHECK(classify_error(kAbstain, gold) == "wrong_doc");

  std::mt19937_64 rng(9);
  for (int i = 0; i < 300; ++i) {
    const std::size_t s = rng() % 30;
    const auto pred = span("d", s, s + rng() % 12);
    const std::string cls = classify_error(pred, gold);
    const bool eq = pred->start == gold.start && pred->end == gold.end;
    const bool inside = pred->start > gold.start && pred->end < gold.end;
    const bool outside = pred->start < gold.start && pred->end > gold.end;
    if (eq) CHECK(cls == "correct_span");
    else if (inside) CHECK(cls == "span_too_small");
    else if (outside) CHECK(cls == "span_too_large");
    else CHECK(cls == "span_mismatch");
  }
}

TEST_CASE("full evaluation over a small dataset") {
  const corpus::Dataset gold = corpus::ingest_dataset_from_strings(
      kQuestions, kCorpus, corpus::DatasetFormat::target_qa_json);
  std::vector<PredictedAnswer> rows;
  rows.push_back(row("q1", 1, "d1", 0, 7));    // "install": 1 of 3 gold tokens
  rows.push_back(row("q1", 2, "d1", 0, 16));   // exact
  rows.push_back(row("q2", 1, "d5", 0, 0, /*no_answer=*/true));
  rows.push_back(row("q2", 2, "d4", 0, 5));
  rows.push_back(row("q2", 3, "d2", 0, 7));    // "restart": 1 of 3
  rows.push_back(row("q3", 1, "d3", 0, 0, /*no_answer=*/true));

  const EvalReport report = evaluate(rows, gold, {1, 3});
  CHECK(report.question_count == 3);
  CHECK(report.answerable_count == 2);
  CHECK(report.ma_f1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(report.f1_at.at(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(report.f1_at.at(3) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(report.ha_f1_at.at(1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(report.ha_f1_at.at(3) == doctest::Approx(0.75).epsilon(1e-12));

  // Doc ranks derived from first appearance: q1 -> [d1], q2 -> [d5,d4,d2].
  CHECK(report.mrr == doctest::Approx((1.0 + 1.0 / 3.0) / 2.0).epsilon(1e-12));
  CHECK(report.recall_at.at(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(report.recall_at.at(3) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(report.error_histogram.at("span_mismatch") == 1);  // q1 shares the gold start
  CHECK(report.error_histogram.at("wrong_doc") == 1);      // q2 abstained
  REQUIRE(report.per_question.size() == 3);
  CHECK(report.per_question[0].doc_rank == 1);
  CHECK(report.per_question[1].doc_rank == 3);
  CHECK(report.per_question[2].error_class.empty());
}

TEST_CASE("explicit document rankings override row order") {
  const corpus::Dataset gold = corpus::ingest_dataset_from_strings(
      kQuestions, kCorpus, corpus::DatasetFormat::target_qa_json);
  std::vector<PredictedAnswer> rows;
  rows.push_back(row("q1", 1, "d1", 0, 16));
  rows.push_back(row("q2", 1, "d2", 0, 18));
  rows.push_back(row("q3", 1, "d3", 0, 0, true));
  const std::map<std::string, std::vector<std::string>> rankings = {
      {"q1", {"d3", "d1"}}, {"q2", {"d4", "d5"}}};
  const EvalReport report = evaluate(rows, gold, {1, 2}, rankings);
  CHECK(report.per_question[0].doc_rank == 2);
  CHECK(report.per_question[1].doc_rank == 0);  // gold absent from the list
  CHECK(report.mrr == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(report.recall_at.at(2) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("unparseable spans score zero but keep the document attribution") {
  const corpus::Dataset gold = corpus::ingest_dataset_from_strings(
      kQuestions, kCorpus, corpus::DatasetFormat::target_qa_json);
  std::vector<PredictedAnswer> rows;
  rows.push_back(row("q1", 1, "d1", 7, 8));   // whitespace only
  rows.push_back(row("q2", 1, "d9", 0, 4));   // unknown document
  rows.push_back(row("q3", 1, "d3", 0, 0, true));
  const EvalReport report = evaluate(rows, gold, {1});
  CHECK(report.ma_f1 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));  // only q3 scores
  CHECK(report.per_question[0].error_class == "span_mismatch");  // right doc, bad span
  CHECK(report.per_question[1].error_class == "wrong_doc");
}

TEST_CASE("every question must have prediction rows") {
  const corpus::Dataset gold = corpus::ingest_dataset_from_strings(
      kQuestions, kCorpus, corpus::DatasetFormat::target_qa_json);
  std::vector<PredictedAnswer> rows;
  rows.push_back(row("q1", 1, "d1", 0, 16));
  rows.push_back(row("q2", 1, "d2", 0, 18));
  try {
    evaluate(rows, gold, {1});
    FAIL("expected a missing-prediction error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("q3") != std::string::npos);
  }
}

TEST_CASE("prediction files round-trip and errors carry line numbers") {
  const auto path = temp_file("preds.jsonl");
  {
    std::ofstream out(path);
    out << R"({"question_id":"q1","rank":1,"doc_id":"d1","start_char":0,"end_char":16,"score":0.9,"no_answer":false})"
        << "\n";
    out << "\n";  // blank lines are skipped
    out << R"({"question_id":"q1","rank":2,"doc_id":"d1","start_char":0,"end_char":7,"score":0.5,"no_answer":false})"
        << "\n";
  }
  const auto rows = read_predictions_jsonl(path.string());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].question_id == "q1");
  CHECK(rows[0].score == doctest::Approx(0.9));
  CHECK(rows[1].end_char == 7);

  {
    std::ofstream out(path);
    out << R"({"question_id":"q1","rank":1,"doc_id":"d1","start_char":0,"end_char":16,"score":1.0,"no_answer":false})"
        << "\n";
    out << R"({"question_id":"q1","rank":2,"doc_id":"d1","start_char":0,"end_char":7,"no_answer":false})"
        << "\n";
  }
  try {
    read_predictions_jsonl(path.string());
    FAIL("expected a missing-field error");
  } catch (const std::exception& e) {
    const std::string what = e.what();
    CHECK(what.find("line 2") != std::string::npos);
    CHECK(what.find("score") != std::string::npos);
  }

  {
    std::ofstream out(path);
    out << "not json\n";
  }
  try {
    read_predictions_jsonl(path.string());
    FAIL("expected a parse error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
  std::filesystem::remove(path);
  CHECK_THROWS(read_predictions_jsonl(path.string()));  // gone now
}

TEST_CASE("report serialization") {
  const corpus::Dataset gold = corpus::ingest_dataset_from_strings(
      kQuestions, kCorpus, corpus::DatasetFormat::target_qa_json);
  std::vector<PredictedAnswer> rows;
  rows.push_back(row("q1", 1, "d1", 0, 16));
  rows.push_back(row("q2", 1, "d2", 0, 18));
  rows.push_back(row("q3", 1, "d3", 0, 0, true));
  const EvalReport report = evaluate(rows, gold, {1, 5});

  const std::string js = report_to_json(report);
  CHECK(js.find("\"ma_f1\"") != std::string::npos);
  CHECK(js.find("\"recall_at\"") != std::string::npos);
  CHECK(js.find("\"per_question\"") != std::string::npos);

  const std::string table = report_to_table(report);
  CHECK(table.find("Ma-F1") != std::string::npos);
  CHECK(table.find("MRR") != std::string::npos);
  CHECK(table.find("R@5") != std::string::npos);
  CHECK(table.find("HA_F1@1") != std::string::npos);
}
