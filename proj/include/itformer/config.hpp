#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "itformer/dataset.hpp"
#include "itformer/model.hpp"

namespace itf {

struct TrainConfig {
  std::size_t epochs = 2;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip = 1.0;            // global gradient norm; 0 disables
  std::size_t max_steps = 0;    // 0 = no cap
  // Language-model stage run before the model is frozen (0 = skip). The answer's own
  // embeddings are placed in the time-token rows so the LM learns to read that region.
  std::size_t lm_pretrain_epochs = 2;
  double lm_pretrain_lr = 1e-3;
};

struct EvalConfig {
  std::size_t max_answer_len = 48;
  std::size_t limit = 0;        // evaluate at most this many records per task (0 = all)
};

struct BenchConfig {
  std::vector<std::size_t> channels{4, 8, 16, 32, 64};
  std::vector<std::size_t> steps{10, 25, 50, 100, 200};
  std::vector<std::size_t> question_lengths{16, 64, 256, 1024};
  std::size_t n = 25;
  std::size_t d = 64;
  std::size_t heads = 8;
  std::size_t repetitions = 30;
  std::size_t warmup = 3;
};

/// Sections [data] [model] [train] [eval] [bench] of `key = value` lines.
struct RunConfig {
  DatasetConfig data;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  BenchConfig bench;

  /// Cross-section consistency; throws ConfigError naming "section.key".
  void validate() const;
};

/// Parses config text on top of the defaults. Unknown sections or keys are errors.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
/// Sets one entry; `key` is "section.key".
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
/// Every entry with its resolved value, in a form parse_config reads back.
std::string render_config(const RunConfig& config);

}  // namespace itf
