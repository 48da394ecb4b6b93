#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "itformer/dataset.hpp"

namespace itf {

/// Sentence BLEU, n = 1..4, uniform weights, brevity penalty exp(1 − r/c) for c < r.
/// Orders n ≥ 2 use add-one smoothing; unigram precision is left unsmoothed so a candidate
/// sharing no word with the reference scores exactly 0. Empty candidate scores 0.
double bleu(std::span<const std::string> candidate, std::span<const std::string> reference);
double bleu(std::string_view candidate, std::string_view reference);

/// LCS-based F1 (β = 1) scaled to 0–100. Empty inputs score 0.
double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);
double rouge_l(std::string_view candidate, std::string_view reference);

struct ChoiceScores {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::size_t invalid = 0;   // predictions outside `classes`
};

/// Accuracy and macro-F1 over `classes`. A class with no gold and no predicted instance
/// is left out of the macro average. Predictions outside `classes` count as wrong.
ChoiceScores choice_accuracy_f1(const std::vector<std::string>& predictions, const std::vector<std::string>& gold,
                                const std::vector<std::string>& classes);

inline constexpr std::string_view kInvalidChoice = "invalid";

/// First letter from `labels` that stands alone (not inside a word), case-insensitive.
std::string extract_choice(std::string_view answer, const std::vector<std::string>& labels);

struct TaskMetrics {
  Task task = Task::Understanding;
  std::size_t records = 0;
  std::optional<double> rouge_l, bleu, accuracy, f1;
  std::size_t empty_answers = 0;
  std::size_t invalid_choices = 0;
};

struct EvalReport {
  std::vector<TaskMetrics> tasks;

  const TaskMetrics* find(Task task) const;
  std::string to_json() const;
  /// Aligned text table: open tasks report Rouge-L/BLEU, closed tasks Accuracy/F1.
  std::string table() const;
};

struct Prediction {
  const QARecord* record = nullptr;
  std::string text;
};

/// Scores decoded answers against their records, grouped by task.
EvalReport score_predictions(const std::vector<Prediction>& predictions);

}  // namespace itf
