#include "itformer/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

#include "itformer/errors.hpp"
#include "json.hpp"

namespace itf {

namespace {

std::map<std::vector<std::string>, std::size_t> ngram_counts(std::span<const std::string> words, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) ++counts[std::vector<std::string>(words.begin() + i, words.begin() + i + n)];
  return counts;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double bleu(std::span<const std::string> candidate, std::span<const std::string> reference) {
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    std::size_t matched = 0, total = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      auto it = ref.find(gram);
      if (it != ref.end()) matched += std::min(count, it->second);
    }
    double precision;
    if (n == 1) {
      if (matched == 0) return 0.0;
      precision = static_cast<double>(matched) / static_cast<double>(total);
    } else {
      precision = static_cast<double>(matched + 1) / static_cast<double>(total + 1);
    }
    log_sum += std::log(precision) / 4.0;
  }
  const double c = static_cast<double>(candidate.size()), r = static_cast<double>(reference.size());
  const double brevity = c < r ? std::exp(1.0 - r / c) : 1.0;
  return 100.0 * brevity * std::exp(log_sum);
}

double bleu(std::string_view candidate, std::string_view reference) {
  const auto c = split_words(candidate), r = split_words(reference);
  return bleu(std::span<const std::string>(c), std::span<const std::string>(r));
}

double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size()), r = lcs / static_cast<double>(reference.size());
  return 100.0 * 2.0 * p * r / (p + r);
}

double rouge_l(std::string_view candidate, std::string_view reference) {
  const auto c = split_words(candidate), r = split_words(reference);
  return rouge_l(std::span<const std::string>(c), std::span<const std::string>(r));
}

ChoiceScores choice_accuracy_f1(const std::vector<std::string>& predictions, const std::vector<std::string>& gold,
                                const std::vector<std::string>& classes) {
  if (predictions.empty() || gold.empty()) throw DimensionError("choice scores need at least one prediction");
  if (predictions.size() != gold.size())
    throw DimensionError("choice scores: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(gold.size()) + " gold labels");
  ChoiceScores out;
  std::map<std::string, std::size_t> tp, fp, fn;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool known = std::find(classes.begin(), classes.end(), predictions[i]) != classes.end();
    if (!known) ++out.invalid;
    if (known && predictions[i] == gold[i]) {
      ++correct;
      ++tp[gold[i]];
    } else {
      ++fn[gold[i]];
      if (known) ++fp[predictions[i]];
    }
  }
  out.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(gold.size());
  double f1_sum = 0.0;
  std::size_t present = 0;
  for (const auto& c : classes) {
    const double t = static_cast<double>(tp[c]), p = static_cast<double>(fp[c]), n = static_cast<double>(fn[c]);
    if (t + p + n == 0.0) continue;
    f1_sum += 2.0 * t / (2.0 * t + p + n);
    ++present;
  }
  out.macro_f1 = present ? 100.0 * f1_sum / static_cast<double>(present) : 0.0;
  return out;
}

std::string extract_choice(std::string_view answer, const std::vector<std::string>& labels) {
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (std::size_t i = 0; i < answer.size(); ++i) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(answer[i])));
    if (i > 0 && is_word(answer[i - 1])) continue;
    if (i + 1 < answer.size() && is_word(answer[i + 1])) continue;
    for (const auto& label : labels)
      if (label.size() == 1 && label[0] == c) return label;
  }
  return std::string(kInvalidChoice);
}

const TaskMetrics* EvalReport::find(Task task) const {
  for (const auto& t : tasks)
    if (t.task == task) return &t;
  return nullptr;
}

std::string EvalReport::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& t : tasks) {
    nlohmann::json e;
    e["records"] = t.records;
    if (t.rouge_l) e["rouge_l"] = *t.rouge_l;
    if (t.bleu) e["bleu"] = *t.bleu;
    if (t.accuracy) e["accuracy"] = *t.accuracy;
    if (t.f1) e["f1"] = *t.f1;
    e["empty_answers"] = t.empty_answers;
    e["invalid_choices"] = t.invalid_choices;
    j[std::string(task_name(t.task))] = e;
  }
  return j.dump(2);
}

std::string EvalReport::table() const {
  auto cell = [](const std::optional<double>& v) {
    char buf[16];
    if (v) std::snprintf(buf, sizeof buf, "%8.2f", *v);
    else std::snprintf(buf, sizeof buf, "%8s", "-");
    return std::string(buf);
  };
  std::string out = "task           records  Rouge-L     BLEU Accuracy       F1\n";
  for (const auto& t : tasks) {
    char head[48];
    std::snprintf(head, sizeof head, "%-14s %7zu ", std::string(task_name(t.task)).c_str(), t.records);
    out += head + cell(t.rouge_l) + " " + cell(t.bleu) + " " + cell(t.accuracy) + " " + cell(t.f1) + "\n";
  }
  return out;
}

EvalReport score_predictions(const std::vector<Prediction>& predictions) {
  EvalReport report;
  for (Task task : kTasks) {
    std::vector<const Prediction*> mine;
    for (const auto& p : predictions)
      if (p.record->task == task) mine.push_back(&p);
    if (mine.empty()) continue;
    TaskMetrics m;
    m.task = task;
    m.records = mine.size();
    for (const auto* p : mine)
      if (split_words(p->text).empty()) ++m.empty_answers;
    if (is_closed(task)) {
      std::vector<std::string> labels;
      for (const auto& c : mine.front()->record->choices) labels.push_back(c.label);
      std::vector<std::string> pred, gold;
      for (const auto* p : mine) {
        pred.push_back(extract_choice(p->text, labels));
        gold.push_back(p->record->answer);
      }
      const auto s = choice_accuracy_f1(pred, gold, labels);
      m.accuracy = s.accuracy;
      m.f1 = s.macro_f1;
      m.invalid_choices = s.invalid;
    } else {
      double r = 0.0, b = 0.0;
      for (const auto* p : mine) {
        r += rouge_l(p->text, p->record->answer);
        b += bleu(p->text, p->record->answer);
      }
      m.rouge_l = r / static_cast<double>(mine.size());
      m.bleu = b / static_cast<double>(mine.size());
    }
    report.tasks.push_back(m);
  }
  return report;
}

}  // namespace itf
