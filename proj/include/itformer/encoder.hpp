#pragma once

#include <cstddef>
#include <vector>

#include "itformer/autodiff.hpp"
#include "itformer/nn.hpp"
#include "itformer/params.hpp"

namespace itf {

/// One operational cycle: L steps × V channels of normalized sensor values.
struct TimeSeriesSegment {
  Array values;
  std::size_t segment_index = 0;

  std::size_t length() const { return values.dim(0); }
  std::size_t channels() const { return values.dim(1); }
};

/// Number of windows of `patch` steps taken every `stride` steps. Throws unless the
/// windows tile [0, length) exactly (no silent truncation).
std::size_t window_count(std::size_t length, std::size_t patch, std::size_t stride);

/// L×V segment → L′×V×P windows, window t of channel v = values[tS : tS+P, v].
Array patchify(const TimeSeriesSegment& segment, std::size_t patch, std::size_t stride);

struct EncoderConfig {
  std::size_t width = 64;
  std::size_t patch = 60;
  std::size_t stride = 60;
  std::size_t layers = 4;
  std::size_t heads = 8;
  std::size_t hidden = 256;
};

/// Channel-independent patch transformer: every channel's window sequence is projected
/// to `width` and run through the same pre-norm self-attention stack along time.
/// Parameters live under "enc." and are frozen.
class PatchEncoder {
 public:
  PatchEncoder(ParameterSet& params, const EncoderConfig& config, Rng& rng);

  /// L′×V×P → L′×V×d
  Var encode(Graph& g, const Array& patched) const;
  /// Forward without a gradient record.
  Array encode(const Array& patched) const;

  const EncoderConfig& config() const { return config_; }
  static std::size_t parameter_count(const EncoderConfig& config);

 private:
  EncoderConfig config_;
  nn::Linear projection_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNorm final_norm_;
};

/// Encoded tokens plus the bookkeeping needed for position encoding.
struct TemporalTokens {
  Var tokens;                                 // L′×V×d
  std::vector<std::size_t> segment_lengths;   // L′ᵢ, summing to L′
  std::vector<std::size_t> segment_indices;   // i for each segment
  bool tpe_applied = false;

  std::size_t steps() const { return tokens.dim(0); }
  std::size_t channels() const { return tokens.dim(1); }
  std::size_t width() const { return tokens.dim(2); }
};

/// Wraps one encoded segment (L′ᵢ×V×d) as TemporalTokens.
TemporalTokens segment_tokens(Var encoded, std::size_t segment_index);

/// Three-level time token position encoding:
///   sinusoidal over within-segment steps (fixed), learnable per channel ("psi.p_channel"),
///   then a rotary rotation by the segment index.
class TimePositionEncoding {
 public:
  TimePositionEncoding(ParameterSet& params, std::size_t channels, std::size_t width, double rotary_base, Rng& rng);

  TemporalTokens apply(Graph& g, const TemporalTokens& tokens) const;

  Array time_table(std::size_t steps) const;
  const Parameter& channel_table() const { return *channel_; }
  double rotary_base() const { return rotary_base_; }

 private:
  Parameter* channel_;
  std::size_t channels_;
  std::size_t width_;
  double rotary_base_;
};

/// Concatenates segments along time; every segment must already carry its TPE.
TemporalTokens concat_segments(const std::vector<TemporalTokens>& segments);

}  // namespace itf
