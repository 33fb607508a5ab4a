// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <set>

#include "idk/corpus.hpp"
#include "idk/errors.hpp"
#include "test_util.hpp"

using namespace idk;
using idk::testing::TempDir;
using idk::testing::write_file;

TEST_CASE("generic corpus loads and round-trips") {
  TempDir dir;
  write_file(dir / "c.jsonl",
             R"({"id":"a","question":"Capital of France?","answers":["Paris"],"source":"x"})"
             "\n\n"
             R"({"id":"b","question":"Größte Stadt?","answers":["Berlin","BER"]})"
             "\n");
  const auto items = load_corpus(dir / "c.jsonl", CorpusFormat::kGeneric);
  REQUIRE(items.size() == 2);
  CHECK(items[0] == QaItem{"a", "Capital of France?", {"Paris"}, "x"});
  CHECK(items[1].source.empty());
  CHECK(items[1].question == "Größte Stadt?");

  save_corpus(dir / "out.jsonl", items);
  CHECK(load_corpus(dir / "out.jsonl", CorpusFormat::kGeneric) == items);
}

TEST_CASE("triviaqa adapter merges value and aliases without duplicates") {
  TempDir dir;
  write_file(dir / "t.jsonl",
             R"({"question_id":"tc_1","question":"Q?","answer":{"value":"Paris","aliases":["Paris","Paree"]}})"
             "\n");
  const auto items = load_corpus(dir / "t.jsonl", CorpusFormat::kTriviaQa);
  REQUIRE(items.size() == 1);
  CHECK(items[0].id == "tc_1");
  CHECK(items[0].answers == std::vector<std::string>{"Paris", "Paree"});
  CHECK(items[0].source == "triviaqa");
}

TEST_CASE("nq adapter accepts string or list answers and synthesizes ids") {
  TempDir dir;
  write_file(dir / "n.jsonl",
             R"({"question":"who wrote hamlet","answer":["William Shakespeare","Shakespeare"]})"
             "\n"
             R"({"id":"n2","question":"q2","answer":"x"})"
             "\n");
  const auto items = load_corpus(dir / "n.jsonl", CorpusFormat::kNaturalQuestions);
  REQUIRE(items.size() == 2);
  CHECK(items[0].id == "nq-open-1");
  CHECK(items[0].answers.size() == 2);
  CHECK(items[1].id == "n2");
  CHECK(items[1].answers == std::vector<std::string>{"x"});
}

TEST_CASE("corpus errors carry file and line") {
  TempDir dir;
  SUBCASE("duplicate id") {
    write_file(dir / "d.jsonl",
               R"({"id":"a","question":"q","answers":["x"]})" "\n"
               R"({"id":"a","question":"q","answers":["y"]})" "\n");
    try {
      load_corpus(dir / "d.jsonl", CorpusFormat::kGeneric);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("missing answers") {
    write_file(dir / "m.jsonl", R"({"id":"a","question":"q"})" "\n");
    CHECK_THROWS_AS(load_corpus(dir / "m.jsonl", CorpusFormat::kGeneric), ParseError);
  }
  SUBCASE("blank answer") {
    write_file(dir / "b.jsonl", R"({"id":"a","question":"q","answers":["  "]})" "\n");
    CHECK_THROWS_AS(load_corpus(dir / "b.jsonl", CorpusFormat::kGeneric), ParseError);
  }
  SUBCASE("malformed json") {
    write_file(dir / "j.jsonl", R"({"id":"a","question":"q","answers":["x"]})" "\n{oops\n");
    try {
      load_corpus(dir / "j.jsonl", CorpusFormat::kGeneric);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  CHECK_THROWS_AS(parse_corpus_format("csv"), ValidationError);
}

TEST_CASE("dev split sizes") {
  CHECK(dev_size(87622, 0.1) == 8763);
  CHECK(dev_size(10, 0.1) == 1);
  CHECK(dev_size(10, 0.3) == 3);
  CHECK(dev_size(100, 0.0) == 0);
  CHECK(dev_size(0, 0.5) == 0);
  CHECK(dev_size(3, 0.5) == 2);
  CHECK_THROWS_AS(dev_size(10, 1.0), ValidationError);
  CHECK_THROWS_AS(dev_size(10, -0.1), ValidationError);
}

TEST_CASE("split partitions the input for many sizes and seeds") {
  for (std::size_t n : {0u, 1u, 2u, 7u, 10u, 101u}) {
    const auto items = idk::testing::synthetic_corpus(n);
    for (std::uint64_t seed : {0ull, 1ull, 42ull, 0xdeadbeefull}) {
      for (double f : {0.0, 0.1, 0.5, 0.9}) {
        const auto split = split_corpus(items, {f, seed});
        CHECK(split.dev.size() == dev_size(n, f));
        CHECK(split.train.size() + split.dev.size() == n);
        std::multiset<std::string> ids;
        for (const auto& i : split.train) ids.insert(i.id);
        for (const auto& i : split.dev) ids.insert(i.id);
        std::multiset<std::string> expected;
        for (const auto& i : items) expected.insert(i.id);
        CHECK(ids == expected);
      }
    }
  }
}

TEST_CASE("split is deterministic per seed and keeps input order") {
  const auto items = idk::testing::synthetic_corpus(10);
  const auto a = split_corpus(items, {0.1, 5});
  const auto b = split_corpus(items, {0.1, 5});
  CHECK(a.dev == b.dev);
  CHECK(a.train == b.train);
  auto by_id = [](const QaItem& x, const QaItem& y) { return x.id < y.id; };
  CHECK(std::is_sorted(a.train.begin(), a.train.end(), by_id));

  const auto big = idk::testing::synthetic_corpus(200);
  CHECK(split_corpus(big, {0.5, 1}).dev != split_corpus(big, {0.5, 2}).dev);
}

TEST_CASE("prompt templates") {
  const std::string q = "Capital of France?";
  CHECK(render_prompt(q, PromptTemplate::plain()) == q);
  CHECK(render_prompt(q, PromptTemplate::idk_prompt()) ==
        "Answer the following question, and if you don't know the answer, only reply with "
        "\"I don't know\": " + q);
  CHECK(render_prompt(q, PromptTemplate::hir(0.1)) ==
        "Your current knowledge expression confidence level is 0.1, please answer the user's "
        "question: " + q);
  CHECK(render_prompt(q, PromptTemplate::hir(1.0)).find("level is 1.0,") != std::string::npos);
  CHECK(render_prompt(q, PromptTemplate::hir(1.1 - 1.1)).find("level is 0.0,") != std::string::npos);
  CHECK_THROWS_AS(PromptTemplate::hir(1.01), ValidationError);
  CHECK_THROWS_AS(PromptTemplate::hir(-0.1), ValidationError);

  CHECK(PromptTemplate::parse("hir:0.3").name() == "hir:0.3");
  CHECK(PromptTemplate::parse("idk-prompt").kind() == PromptTemplate::Kind::kIdkPrompt);
  CHECK_THROWS_AS(PromptTemplate::parse("hir:"), ValidationError);
  CHECK_THROWS_AS(PromptTemplate::parse("hir:0.5x"), ValidationError);
  CHECK_THROWS_AS(PromptTemplate::parse("fancy"), ValidationError);
}

TEST_CASE("prompt rendering is injective over distinct questions") {
  const auto items = idk::testing::synthetic_corpus(300);
  for (const auto& tmpl : {PromptTemplate::plain(), PromptTemplate::idk_prompt(), PromptTemplate::hir(0.4)}) {
    std::set<std::string> prompts;
    for (const auto& item : items) prompts.insert(render_prompt(item, tmpl));
    CHECK(prompts.size() == items.size());
  }
}
