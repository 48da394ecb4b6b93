#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "itformer/autodiff.hpp"
#include "itformer/params.hpp"

// Layers shared by the encoder, the alignment module and the language model.
namespace itf::nn {

/// Counts multiply-adds spent on attention scores (query · key products).
struct FlopCounter {
  std::uint64_t score_macs = 0;
};

/// Scaled dot-product scores q·kᵀ/√d_k, counted into `counter` when given.
Var attention_scores(Var q, Var k, FlopCounter* counter);

/// Sinusoidal table: row t, even column 2i = sin(t·ω_i), odd column 2i+1 = cos(t·ω_i), ω_i = 10000^(−2i/d).
Array sinusoidal_table(std::size_t positions, std::size_t width);

struct Linear {
  Parameter* weight = nullptr;  // in × out
  Parameter* bias = nullptr;    // out, optional

  static Linear create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                       bool with_bias, bool trainable, Rng& rng);
  Var operator()(Graph& g, Var x) const;
};

struct LayerNorm {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;

  static LayerNorm create(ParameterSet& params, const std::string& name, std::size_t width, bool trainable);
  Var operator()(Graph& g, Var x) const;
};

/// Bias-free multi-head attention with output projection.
struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  std::size_t heads = 1;

  static MultiHeadAttention create(ParameterSet& params, const std::string& name, std::size_t width,
                                   std::size_t heads, bool trainable, Rng& rng);

  /// Queries from `query` (m×d), keys and values from `memory` (T×d).
  /// When `attention` is non-null the per-head weight matrices (m×T) are appended to it.
  Var operator()(Graph& g, Var query, Var memory, bool causal, FlopCounter* counter = nullptr,
                 std::vector<Var>* attention = nullptr) const;
};

struct FeedForward {
  Linear up, down;

  static FeedForward create(ParameterSet& params, const std::string& name, std::size_t width, std::size_t hidden,
                            bool trainable, Rng& rng);
  Var operator()(Graph& g, Var x) const;
};

/// Pre-norm transformer block: x + Attn(LN(x)), then x + FFN(LN(x)).
struct TransformerBlock {
  LayerNorm ln_attn, ln_ffn;
  MultiHeadAttention attn;
  FeedForward ffn;

  static TransformerBlock create(ParameterSet& params, const std::string& name, std::size_t width,
                                 std::size_t heads, std::size_t hidden, bool trainable, Rng& rng);
  Var operator()(Graph& g, Var x, bool causal) const;
};

/// Parameter count of one TransformerBlock, used by the analytic budget formulas.
std::size_t transformer_block_parameters(std::size_t width, std::size_t hidden);

}  // namespace itf::nn
