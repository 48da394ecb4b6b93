#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "itformer/core.hpp"
#include "itformer/nn.hpp"
#include "itformer/vocab.hpp"

namespace itf {

struct LmConfig {
  std::size_t vocab_size = 0;
  std::size_t width = 64;
  std::size_t layers = 2;
  std::size_t heads = 8;
  std::size_t hidden = 256;

  std::size_t parameter_count() const;
};

/// Small decoder-only language model with a tied output head. Parameters live under
/// "lm." and are created frozen.
class MiniLm {
 public:
  MiniLm(ParameterSet& params, const LmConfig& config, Rng& rng);

  /// Token embeddings scaled by √d plus sinusoidal positions starting at `first_position`.
  Var embed(Graph& g, std::span<const int> ids, std::size_t first_position = 0) const;
  QueryEmbedding embed_query(Graph& g, std::span<const int> ids) const;

  /// Causal blocks followed by the final layer norm.
  Var hidden(Graph& g, Var sequence) const;
  /// Tied head: rows · Eᵀ.
  Var logits(Graph& g, Var rows) const;

  struct AnswerLogits {
    Var logits;                // (|a|+1)×|V|
    std::vector<int> targets;  // answer ids then EOS
  };
  /// Teacher-forced logits for the answer positions after an (augmented) prompt.
  AnswerLogits answer_logits(Graph& g, Var prompt, std::span<const int> answer) const;
  /// Mean cross-entropy over the answer positions and the closing EOS.
  Var score(Graph& g, Var prompt, std::span<const int> answer) const;

  /// Repeated argmax continuation of `prompt` (L_q×d) until EOS or `max_len` tokens.
  /// PAD, BOS, UNK and the time-series placeholder are never emitted; ties pick the lowest id.
  std::vector<int> decode_greedy(const Array& prompt, std::size_t max_len) const;

  const LmConfig& config() const { return config_; }
  const Parameter& embedding() const { return *embedding_; }
  const nn::LayerNorm& final_norm() const { return final_norm_; }

 private:
  LmConfig config_;
  Parameter* embedding_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNorm final_norm_;
};

}  // namespace itf
