#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "itformer/config.hpp"
#include "itformer/metrics.hpp"
#include "itformer/model.hpp"

namespace itf {

/// Adaptive moment estimation over the trainable entries of a parameter set.
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Updates every trainable parameter that has an entry in `grads`, using grads·scale.
  void step(ParameterSet& params, const GradientMap& grads, double scale = 1.0);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, std::pair<Array, Array>> moments_;
};

double global_norm(const GradientMap& grads);

/// A record turned into ids, ready for the model.
struct Example {
  std::string id;
  Task task = Task::Understanding;
  std::vector<std::string> series;
  std::vector<int> prompt;
  std::vector<int> answer;
};

/// Throws ConfigError("series") when the record's series count does not fit its task.
Example make_example(const QARecord& record, const Vocabulary& vocab, std::size_t lit_len, std::size_t window);

/// Encoder outputs per series file. The encoder is frozen, so each file is encoded once.
class EncodedCache {
 public:
  EncodedCache(const Model& model, std::filesystem::path data_dir) : model_(model), dir_(std::move(data_dir)) {}

  const Array& get(const std::string& series);
  std::vector<const Array*> segments(const Example& example);
  std::size_t size() const { return cache_.size(); }

 private:
  const Model& model_;
  std::filesystem::path dir_;
  std::map<std::string, Array> cache_;
};

struct StepReport {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  bool frozen_ok = false;
  std::size_t correct = 0;   // teacher-forced answer tokens predicted exactly
  std::size_t tokens = 0;
};

/// Teacher-forced loss over a batch: mean cross-entropy of every answer token and closing
/// EOS in the batch. Returns (loss, correct tokens, total tokens).
struct BatchLoss {
  Var loss;
  std::size_t correct = 0;
  std::size_t tokens = 0;
};
BatchLoss batch_loss(Graph& g, const Model& model, EncodedCache& cache, std::span<const Example> batch);

/// Alignment-only fine-tuning: the gradient step touches trainable parameters only and
/// every step re-verifies the frozen checksum.
class Trainer {
 public:
  Trainer(Model& model, EncodedCache& cache, const TrainConfig& config);

  StepReport sft_step(std::span<const Example> batch);
  std::uint64_t frozen_checksum() const { return frozen_checksum_; }
  std::size_t steps() const { return steps_; }

 private:
  Model& model_;
  EncodedCache& cache_;
  TrainConfig config_;
  Adam adam_;
  std::uint64_t frozen_checksum_;
  std::size_t steps_ = 0;
};

/// Teacher-forced answer-token accuracy (0–1) without updating anything.
double teacher_forced_accuracy(const Model& model, EncodedCache& cache, std::span<const Example> examples);

/// Trains the language model alone on the training answers before it is frozen.
/// The prefix rows that later hold fused time tokens carry the answer's own token
/// embeddings here, so the model learns to read its answer from that region.
void pretrain_language_model(Model& model, std::span<const Example> examples, const TrainConfig& config,
                             std::uint64_t seed, std::ostream* log);

struct TrainResult {
  std::vector<StepReport> steps;
  ParamBudget budget;
  std::size_t analytic_trainable = 0;
  std::filesystem::path checkpoint;
};

/// Full run: reads train.jsonl and vocab.txt from `data_dir`, writes model.ckpt,
/// train_log.csv and the resolved config.ini into `out_dir`.
TrainResult train(const RunConfig& config, const std::filesystem::path& data_dir,
                  const std::filesystem::path& out_dir, std::uint64_t seed, std::ostream* log);

/// Greedy-decodes every record and scores the answers.
EvalReport evaluate(const Model& model, EncodedCache& cache, const std::vector<QARecord>& records,
                    const Vocabulary& vocab, const EvalConfig& config, std::size_t window);

inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kLogFile = "train_log.csv";
inline constexpr const char* kConfigFile = "config.ini";

}  // namespace itf
