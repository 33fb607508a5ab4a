// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "idk/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "idk/errors.hpp"

namespace fs = std::filesystem;

namespace idk {
namespace {

constexpr std::array<std::string_view, 4> kQuadrantNames = {"IK_IK", "IK_IDK", "IDK_IK", "IDK_IDK"};

std::size_t at(Quadrant q) { return static_cast<std::size_t>(q); }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string metrics_csv(std::span<const ReportEntry* const> rows) {
  std::string out =
      "name,ik_threshold,n,ik_ik_rate,ik_idk_rate,idk_ik_rate,idk_idk_rate,truthful_rate,"
      "refusal_f1,answer_f1\n";
  for (const ReportEntry* e : rows) {
    const MetricsReport& m = e->metrics;
    out += csv_field(e->name) + "," + (e->ik_threshold ? fixed(*e->ik_threshold, 1) : "") + "," +
           std::to_string(m.n) + "," + fixed(m.ik_ik_rate, 4) + "," + fixed(m.ik_idk_rate, 4) +
           "," + fixed(m.idk_ik_rate, 4) + "," + fixed(m.idk_idk_rate, 4) + "," +
           fixed(m.truthful_rate, 4) + "," + fixed(m.refusal_f1, 6) + "," +
           fixed(m.answer_f1, 6) + "\n";
  }
  return out;
}

std::string quadrant_chart(std::span<const ReportEntry* const> rows) {
  constexpr int kLabelWidth = 200, kBarWidth = 600, kRowHeight = 28, kTop = 40;
  constexpr std::array<const char*, 4> kColors = {"#2e7d32", "#1565c0", "#f9a825", "#c62828"};
  const int height = kTop + static_cast<int>(rows.size()) * kRowHeight + 20;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kLabelWidth + kBarWidth + 20
      << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t q = 0; q < 4; ++q) {
    svg << "<rect x=\"" << kLabelWidth + q * 150 << "\" y=\"8\" width=\"12\" height=\"12\" fill=\""
        << kColors[q] << "\"/><text x=\"" << kLabelWidth + q * 150 + 16 << "\" y=\"19\">"
        << kQuadrantNames[q] << "</text>\n";
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const MetricsReport& m = rows[r]->metrics;
    const int y = kTop + static_cast<int>(r) * kRowHeight;
    std::string label = rows[r]->name;
    if (rows[r]->ik_threshold) label += " (t=" + fixed(*rows[r]->ik_threshold, 1) + ")";
    svg << "<text x=\"4\" y=\"" << y + 16 << "\">" << xml_escape(label) << "</text>\n";
    const std::array<double, 4> shares = {m.ik_ik_rate, m.ik_idk_rate, m.idk_ik_rate, m.idk_idk_rate};
    double x = kLabelWidth;
    for (std::size_t q = 0; q < 4; ++q) {
      const double w = shares[q] / 100.0 * kBarWidth;
      svg << "<rect x=\"" << fixed(x, 2) << "\" y=\"" << y << "\" width=\"" << fixed(w, 2)
          << "\" height=\"" << kRowHeight - 6 << "\" fill=\"" << kColors[q] << "\"/>\n";
      x += w;
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

std::string_view to_string(Quadrant q) { return kQuadrantNames[at(q)]; }

Quadrant parse_quadrant(std::string_view s) {
  for (std::size_t i = 0; i < kQuadrantNames.size(); ++i) {
    if (kQuadrantNames[i] == s) return static_cast<Quadrant>(i);
  }
  throw ValidationError("unknown quadrant '" + std::string(s) + "'");
}

Quadrant quadrant_of(bool refused, bool correct, KnowledgeLabel gold) {
  if (refused) return gold == KnowledgeLabel::kIdk ? Quadrant::kIkIdk : Quadrant::kIdkIk;
  return correct ? Quadrant::kIkIk : Quadrant::kIdkIdk;
}

json to_json(const QuadrantOutcome& o) {
  return json{{"question_id", o.question_id},
              {"quadrant", to_string(o.quadrant)},
              {"refused", o.refused},
              {"correct", o.correct},
              {"gold_label", to_string(o.gold_label)}};
}

std::vector<QuadrantOutcome> load_quadrants(const fs::path& path) {
  std::vector<QuadrantOutcome> out;
  const std::string file = path.string();
  for_each_jsonl(path, [&](const json& row, std::size_t line) {
    QuadrantOutcome o;
    o.question_id = field::string(row, "question_id", file, line);
    o.refused = field::require(row, "refused", file, line).get<bool>();
    o.correct = field::require(row, "correct", file, line).get<bool>();
    o.gold_label = parse_knowledge_label(field::string(row, "gold_label", file, line));
    o.quadrant = parse_quadrant(field::string(row, "quadrant", file, line));
    if (o.quadrant != quadrant_of(o.refused, o.correct, o.gold_label)) {
      throw ParseError(file, line, "quadrant inconsistent with refused/correct/gold_label");
    }
    out.push_back(std::move(o));
  });
  return out;
}

void write_quadrants(const fs::path& path, std::span<const QuadrantOutcome> outcomes) {
  std::vector<json> rows;
  rows.reserve(outcomes.size());
  for (const auto& o : outcomes) rows.push_back(to_json(o));
  write_jsonl(path, rows);
}

std::vector<ModelResponse> load_responses(const fs::path& path) {
  std::vector<ModelResponse> out;
  std::set<std::string> seen;
  const std::string file = path.string();
  for_each_jsonl(path, [&](const json& row, std::size_t line) {
    ModelResponse r{field::string(row, "question_id", file, line),
                    field::string(row, "response", file, line)};
    if (!seen.insert(r.question_id).second) {
      throw ParseError(file, line, "duplicate response for " + r.question_id);
    }
    out.push_back(std::move(r));
  });
  return out;
}

void write_responses(const fs::path& path, std::span<const ModelResponse> responses) {
  std::vector<json> rows;
  rows.reserve(responses.size());
  for (const auto& r : responses) {
    rows.push_back(json{{"question_id", r.question_id}, {"response", r.response}});
  }
  write_jsonl(path, rows);
}

GoldLabels gold_labels_from(std::span<const IdkExample> examples) {
  GoldLabels gold;
  for (const auto& e : examples) {
    if (!gold.emplace(e.question_id, e.label).second) {
      throw ValidationError("duplicate gold label for " + e.question_id);
    }
  }
  return gold;
}

GoldLabels load_gold_labels(const fs::path& path) {
  GoldLabels gold;
  const std::string file = path.string();
  for_each_jsonl(path, [&](const json& row, std::size_t line) {
    const std::string id = field::string(row, "question_id", file, line);
    KnowledgeLabel label;
    try {
      label = parse_knowledge_label(field::string(row, "label", file, line));
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(file, line, e.what());
    }
    if (!gold.emplace(id, label).second) throw ParseError(file, line, "duplicate gold label for " + id);
  });
  return gold;
}

std::vector<QuadrantOutcome> classify(std::span<const ModelResponse> responses,
                                      const GoldLabels& gold, std::span<const QaItem> corpus,
                                      const Judge& judge) {
  const auto index = index_corpus(corpus);
  std::vector<QuadrantOutcome> out;
  out.reserve(responses.size());
  for (const auto& r : responses) {
    auto g = gold.find(r.question_id);
    if (g == gold.end()) throw ValidationError("no gold label for question " + r.question_id);
    auto item = index.find(r.question_id);
    if (item == index.end()) throw ValidationError("question " + r.question_id + " is not in the corpus");
    QuadrantOutcome o;
    o.question_id = r.question_id;
    o.gold_label = g->second;
    o.refused = judge.is_refusal(r.response);
    o.correct = !o.refused && judge.is_correct(r.response, item->second->answers);
    o.quadrant = quadrant_of(o.refused, o.correct, o.gold_label);
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<QuadrantOutcome> classify(const fs::path& responses_file, const fs::path& gold_file,
                                      std::span<const QaItem> corpus, const Judge& judge) {
  return classify(load_responses(responses_file), load_gold_labels(gold_file), corpus, judge);
}

json to_json(const MetricsReport& m) {
  return json{{"n", m.n},
              {"counts",
               {{"IK_IK", m.counts[0]}, {"IK_IDK", m.counts[1]}, {"IDK_IK", m.counts[2]},
                {"IDK_IDK", m.counts[3]}}},
              {"ik_ik_rate", m.ik_ik_rate},
              {"ik_idk_rate", m.ik_idk_rate},
              {"idk_ik_rate", m.idk_ik_rate},
              {"idk_idk_rate", m.idk_idk_rate},
              {"truthful_rate", m.truthful_rate},
              {"refusal_f1", m.refusal_f1},
              {"answer_f1", m.answer_f1}};
}

MetricsReport metrics_from_json(const json& j) {
  try {
    MetricsReport m;
    m.n = j.at("n").get<std::size_t>();
    const json& c = j.at("counts");
    for (std::size_t q = 0; q < 4; ++q) m.counts[q] = c.at(std::string(kQuadrantNames[q])).get<std::size_t>();
    m.ik_ik_rate = j.at("ik_ik_rate").get<double>();
    m.ik_idk_rate = j.at("ik_idk_rate").get<double>();
    m.idk_ik_rate = j.at("idk_ik_rate").get<double>();
    m.idk_idk_rate = j.at("idk_idk_rate").get<double>();
    m.truthful_rate = j.at("truthful_rate").get<double>();
    m.refusal_f1 = j.at("refusal_f1").get<double>();
    m.answer_f1 = j.at("answer_f1").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad metrics JSON: ") + e.what());
  }
}

double f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(2 * tp) / static_cast<double>(denom);
}

MetricsReport metrics(std::span<const QuadrantOutcome> outcomes) {
  if (outcomes.empty()) throw ValidationError("cannot compute metrics over zero outcomes");
  MetricsReport m;
  m.n = outcomes.size();
  std::size_t refuse_tp = 0, refuse_fp = 0, refuse_fn = 0;
  std::size_t answer_tp = 0, answer_fp = 0, answer_fn = 0;
  for (const auto& o : outcomes) {
    ++m.counts[at(o.quadrant)];
    const bool gold_idk = o.gold_label == KnowledgeLabel::kIdk;
    if (o.refused && gold_idk) ++refuse_tp;
    if (o.refused && !gold_idk) ++refuse_fp;
    if (!o.refused && gold_idk) ++refuse_fn;
    if (!o.refused && !gold_idk) ++answer_tp;
    if (!o.refused && gold_idk) ++answer_fp;
    if (o.refused && !gold_idk) ++answer_fn;
  }
  const double n = static_cast<double>(m.n);
  m.ik_ik_rate = 100.0 * static_cast<double>(m.counts[at(Quadrant::kIkIk)]) / n;
  m.ik_idk_rate = 100.0 * static_cast<double>(m.counts[at(Quadrant::kIkIdk)]) / n;
  m.idk_ik_rate = 100.0 * static_cast<double>(m.counts[at(Quadrant::kIdkIk)]) / n;
  m.idk_idk_rate = 100.0 * static_cast<double>(m.counts[at(Quadrant::kIdkIdk)]) / n;
  m.truthful_rate = m.ik_ik_rate + m.ik_idk_rate;
  m.refusal_f1 = f1_score(refuse_tp, refuse_fp, refuse_fn);
  m.answer_f1 = f1_score(answer_tp, answer_fp, answer_fn);
  return m;
}

std::vector<LabelShare> label_distribution(std::span<const ConfidenceRecord> records,
                                           std::span<const double> thresholds) {
  std::vector<LabelShare> rows;
  rows.reserve(thresholds.size());
  for (double t : thresholds) {
    LabelShare s;
    s.ik_threshold = t;
    s.n = records.size();
    for (const auto& r : records) {
      (label(r, t) == KnowledgeLabel::kIk ? s.ik : s.idk) += 1;
    }
    if (s.n > 0) {
      s.ik_pct = 100.0 * static_cast<double>(s.ik) / static_cast<double>(s.n);
      s.idk_pct = 100.0 * static_cast<double>(s.idk) / static_cast<double>(s.n);
    }
    rows.push_back(s);
  }
  return rows;
}

std::vector<fs::path> report(std::span<const ReportEntry> entries, const ReportSpec& spec) {
  if (entries.empty()) throw ValidationError("report needs at least one metrics entry");
  std::vector<const ReportEntry*> rows;
  for (const auto& e : entries) rows.push_back(&e);
  std::stable_sort(rows.begin(), rows.end(), [](const ReportEntry* a, const ReportEntry* b) {
    if (a->ik_threshold.has_value() != b->ik_threshold.has_value()) return !a->ik_threshold;
    return a->ik_threshold.value_or(0) < b->ik_threshold.value_or(0);
  });

  std::vector<fs::path> written;
  const fs::path metrics_path = spec.out_dir / "metrics.csv";
  write_text_file(metrics_path, metrics_csv(rows));
  written.push_back(metrics_path);

  std::vector<const ReportEntry*> sweep;
  std::copy_if(rows.begin(), rows.end(), std::back_inserter(sweep),
               [](const ReportEntry* e) { return e->ik_threshold.has_value(); });
  if (!sweep.empty()) {
    const fs::path sweep_path = spec.out_dir / "sweep.csv";
    write_text_file(sweep_path, metrics_csv(sweep));
    written.push_back(sweep_path);
  }
  if (spec.chart) {
    const fs::path chart_path = spec.out_dir / "quadrants.svg";
    write_text_file(chart_path, quadrant_chart(rows));
    written.push_back(chart_path);
  }
  return written;
}

void write_label_distribution(const fs::path& path, std::span<const LabelShare> rows) {
  std::string out = "ik_threshold,n,ik,idk,ik_pct,idk_pct\n";
  for (const auto& r : rows) {
    out += fixed(r.ik_threshold, 1) + "," + std::to_string(r.n) + "," + std::to_string(r.ik) + "," +
           std::to_string(r.idk) + "," + fixed(r.ik_pct, 4) + "," + fixed(r.idk_pct, 4) + "\n";
  }
  write_text_file(path, out);
}

std::vector<ModelResponse> perfect_responses(std::span<const IdkExample> gold,
                                             std::span<const QaItem> corpus,
                                             const JudgeConfig& cfg) {
  const auto index = index_corpus(corpus);
  std::vector<ModelResponse> out;
  out.reserve(gold.size());
  for (const auto& g : gold) {
    auto item = index.find(g.question_id);
    if (item == index.end()) throw ValidationError("question " + g.question_id + " is not in the corpus");
    out.push_back({g.question_id, g.label == KnowledgeLabel::kIk ? item->second->answers.front()
                                                                : cfg.refusal_template});
  }
  return out;
}

}  // namespace idk
