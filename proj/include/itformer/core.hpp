#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "itformer/encoder.hpp"
#include "itformer/nn.hpp"

namespace itf {

struct ItFormerConfig {
  std::size_t width = 64;       // d
  std::size_t lit_len = 25;     // n learnable instruct tokens per layer
  std::size_t layers = 2;
  std::size_t heads = 8;
  std::size_t channels = 32;    // V
  double rotary_base = 10000.0;

  void validate() const;
  /// layers·(n·d + 12d² + 4d) + V·d
  std::size_t parameter_count() const;
};

/// Prompt embedding with the rows reserved for fused time tokens marked.
struct QueryEmbedding {
  Var embeddings;                  // L_q×d
  std::vector<bool> placeholder;   // L_q, one contiguous run of true
};

/// Positions of the placeholder rows; throws unless they form one contiguous run.
std::vector<std::size_t> placeholder_rows(const std::vector<bool>& mask);

/// Weights of one alignment layer. All names start with "psi." and are trainable.
struct ItFormerLayer {
  Parameter* instruct = nullptr;    // n×d
  nn::LayerNorm refine_norm;
  nn::MultiHeadAttention refine_attn;
  nn::Linear channel_q, channel_k, channel_v, channel_out;
  std::size_t channel_heads = 1;
  nn::LayerNorm time_norm;
  nn::MultiHeadAttention time_attn;

  static ItFormerLayer create(ParameterSet& params, const std::string& prefix, const ItFormerConfig& config,
                              Rng& rng);
};

/// Instruct refinement: X = [I; H_q], I* = first n rows of X + MHA(LN(X)).
/// `query` may be empty (no question rows), then only the instruct tokens attend to each other.
Var refine_instruct(Graph& g, const ItFormerLayer& layer, Var instruct, std::optional<Var> query);

struct ChannelFuseResult {
  Var output;                       // L′×d
  std::vector<Var> channel_weights; // per head: n×V softmax over channels
};

/// Channel-level step of the two-stage attention. Keys are the time-averaged channel
/// tokens; each head averages its channel weights over the instruct queries and pools the
/// value-projected tokens over channels, leaving one token per time step.
ChannelFuseResult channel_fuse(Graph& g, const ItFormerLayer& layer, Var refined, Var tokens,
                               nn::FlopCounter* counter = nullptr);

struct TimeAttendResult {
  Var output;                       // n×d
  std::vector<Var> time_weights;    // per head: n×L′
};

/// Time-level step: instruct queries attend over the normalized channel-fused tokens.
TimeAttendResult time_attend(Graph& g, const ItFormerLayer& layer, Var refined, Var channel_fused,
                             nn::FlopCounter* counter = nullptr);

/// Stacked alignment module plus the channel position table of the TPE.
class ItFormer {
 public:
  ItFormer(ParameterSet& params, const ItFormerConfig& config, Rng& rng);

  /// Applies TPE per segment and concatenates. `segments` hold L′ᵢ×V×d encoder outputs.
  TemporalTokens position_tokens(Graph& g, const std::vector<Var>& segments) const;

  /// Runs every layer; layer ℓ starts from its own instruct tokens plus the previous
  /// layer's I* + F. Returns the last layer's fused tokens (n×d).
  /// `query` holds the question rows used for refinement (may be empty).
  Var fuse(Graph& g, const TemporalTokens& tokens, std::optional<Var> query, nn::FlopCounter* counter = nullptr) const;

  const ItFormerConfig& config() const { return config_; }
  const std::vector<ItFormerLayer>& layers() const { return layers_; }
  const TimePositionEncoding& tpe() const { return tpe_; }

 private:
  ItFormerConfig config_;
  TimePositionEncoding tpe_;
  std::vector<ItFormerLayer> layers_;
};

/// Writes the fused rows into the placeholder positions of the prompt embedding.
Var inject_tal(const QueryEmbedding& query, Var fused);

/// Rows of the prompt that are not placeholders, or nothing when every row is one.
std::optional<Var> question_rows(const QueryEmbedding& query);

}  // namespace itf
