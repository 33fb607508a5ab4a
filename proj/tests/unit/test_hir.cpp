// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <map>

#include "idk/errors.hpp"
#include "idk/hir_builder.hpp"
#include "test_util.hpp"

using namespace idk;

namespace {

ConfidenceRecord record(const std::string& qid, int correct, int k) {
  ConfidenceRecord r{qid, k, correct, static_cast<double>(correct) / k, {}, {}, 0};
  for (int i = 0; i < correct; ++i) r.correct_responses.push_back("tok#" + qid + "#");
  for (int i = correct; i < k; ++i) r.incorrect_responses.push_back("nope");
  return r;
}

}  // namespace

TEST_CASE("threshold to confidence level") {
  CHECK(threshold_to_confidence(1.0) == 0.1);
  CHECK(threshold_to_confidence(0.1) == 1.0);
  CHECK(threshold_to_confidence(1.1) == 0.0);
  CHECK(threshold_to_confidence(0.7) == 0.4);
  CHECK(threshold_to_confidence(0.1 * 3) == 0.8);
  CHECK_THROWS_AS(threshold_to_confidence(0.15), ValidationError);
  CHECK_THROWS_AS(threshold_to_confidence(0.0), ValidationError);
  CHECK_THROWS_AS(threshold_to_confidence(1.2), ValidationError);
  for (int t = 1; t <= 11; ++t) {
    CHECK(on_threshold_grid(t / 10.0));
    CHECK(format_confidence_level(threshold_to_confidence(t / 10.0)).size() == 3);
  }
}

TEST_CASE("threshold grid parsing") {
  CHECK(parse_threshold_grid("0.1:1.1:0.1") == full_threshold_grid());
  CHECK(full_threshold_grid().size() == 11);
  CHECK(parse_threshold_grid("0.2:1.0:0.4") == std::vector<double>{0.2, 0.6, 1.0});
  CHECK(parse_threshold_grid("1.0,0.5") == std::vector<double>{1.0, 0.5});
  CHECK_THROWS_AS(parse_threshold_grid("0.1:1.1"), ValidationError);
  CHECK_THROWS_AS(parse_threshold_grid("0.1:1.1:0.05"), ValidationError);
  CHECK_THROWS_AS(parse_threshold_grid("0.5:0.1:0.1"), ValidationError);
  CHECK_THROWS_AS(parse_threshold_grid("0.1,abc"), ValidationError);
  CHECK_THROWS_AS(parse_threshold_grid("0.33"), ValidationError);
}

TEST_CASE("combined dataset rows and labels") {
  const std::vector<QaItem> corpus{{"full", "Q full?", {"tok#full#"}, ""},
                                   {"none", "Q none?", {"tok#none#"}, ""},
                                   {"half", "Q half?", {"tok#half#"}, ""}};
  const std::vector<ConfidenceRecord> records{record("full", 10, 10), record("none", 0, 10),
                                              record("half", 5, 10)};
  const auto grid = full_threshold_grid();
  const auto rows = build_hir_dataset(records, corpus, grid, {});
  REQUIRE(rows.size() == 11 * corpus.size());

  std::map<std::string, std::vector<KnowledgeLabel>> by_question;
  for (const auto& r : rows) {
    by_question[r.example.question_id].push_back(r.example.label);
    CHECK(r.confidence_level == threshold_to_confidence(r.example.ik_threshold));
    CHECK(r.example.prompt.find("confidence level is " + format_confidence_level(r.confidence_level) +
                                ", please answer") != std::string::npos);
  }
  for (int i = 0; i < 10; ++i) CHECK(by_question["full"][i] == KnowledgeLabel::kIk);
  CHECK(by_question["full"][10] == KnowledgeLabel::kIdk);
  for (auto l : by_question["none"]) CHECK(l == KnowledgeLabel::kIdk);
  for (int i = 0; i < 11; ++i) {
    CHECK(by_question["half"][i] == (i < 5 ? KnowledgeLabel::kIk : KnowledgeLabel::kIdk));
  }

  const auto json_row = to_json(rows.front());
  CHECK(json_row.contains("confidence_level"));
  CHECK(json_row.contains("ik_threshold"));
  CHECK(json_row.at("label") == "IK");
}

TEST_CASE("property: IK thresholds form a prefix of the grid") {
  const auto corpus = idk::testing::synthetic_corpus(1);
  for (int correct = 0; correct <= 10; ++correct) {
    std::vector<ConfidenceRecord> records{record(corpus[0].id, correct, 10)};
    records[0].correct_responses.assign(correct, corpus[0].answers[0]);
    const auto rows = build_hir_dataset(records, corpus, full_threshold_grid(), {});
    REQUIRE(rows.size() == 11);
    bool idk_seen = false;
    int ik_count = 0;
    for (const auto& r : rows) {
      const bool ik = r.example.label == KnowledgeLabel::kIk;
      CHECK(!(idk_seen && ik));
      idk_seen = idk_seen || !ik;
      ik_count += ik;
    }
    CHECK(ik_count == correct);
  }
}

TEST_CASE("off-grid thresholds are rejected") {
  const auto corpus = idk::testing::synthetic_corpus(1);
  std::vector<ConfidenceRecord> records{record(corpus[0].id, 0, 1)};
  const std::vector<double> bad{0.25};
  CHECK_THROWS_AS(build_hir_dataset(records, corpus, bad, {}), ValidationError);
}
