#include "itformer/encoder.hpp"

#include "itformer/errors.hpp"

namespace itf {

std::size_t window_count(std::size_t length, std::size_t patch, std::size_t stride) {
  if (patch == 0 || stride == 0) throw ConfigError("patch_len", "patch length and stride must be positive");
  if (length < patch)
    throw DimensionError("segment of " + std::to_string(length) + " steps is shorter than patch length " +
                         std::to_string(patch));
  if ((length - patch) % stride != 0)
    throw DimensionError("segment length " + std::to_string(length) + " minus patch " + std::to_string(patch) +
                         " is not a multiple of stride " + std::to_string(stride));
  return (length - patch) / stride + 1;
}

Array patchify(const TimeSeriesSegment& segment, std::size_t patch, std::size_t stride) {
  if (segment.values.rank() != 2)
    throw DimensionError("patchify: segment must be L×V, got " + to_string(segment.values.shape()));
  const std::size_t length = segment.length(), channels = segment.channels();
  const std::size_t windows = window_count(length, patch, stride);
  Array out({windows, channels, patch});
  for (std::size_t t = 0; t < windows; ++t)
    for (std::size_t v = 0; v < channels; ++v)
      for (std::size_t p = 0; p < patch; ++p) out.at(t, v, p) = segment.values.at(t * stride + p, v);
  return out;
}

PatchEncoder::PatchEncoder(ParameterSet& params, const EncoderConfig& config, Rng& rng) : config_(config) {
  projection_ = nn::Linear::create(params, "enc.patch_proj", config.patch, config.width, true, false, rng);
  for (std::size_t l = 0; l < config.layers; ++l)
    blocks_.push_back(nn::TransformerBlock::create(params, "enc.block" + std::to_string(l), config.width,
                                                   config.heads, config.hidden, false, rng));
  final_norm_ = nn::LayerNorm::create(params, "enc.final_ln", config.width, false);
}

std::size_t PatchEncoder::parameter_count(const EncoderConfig& c) {
  return c.patch * c.width + c.width + c.layers * nn::transformer_block_parameters(c.width, c.hidden) + 2 * c.width;
}

Var PatchEncoder::encode(Graph& g, const Array& patched) const {
  if (patched.rank() != 3 || patched.dim(2) != config_.patch)
    throw DimensionError("encode: expected L′×V×" + std::to_string(config_.patch) + " windows, got " +
                         to_string(patched.shape()));
  const std::size_t steps = patched.dim(0), channels = patched.dim(1), width = config_.width;

  // Rows grouped by channel: row v·L′ + t holds window t of channel v.
  Var x = ops::reshape(ops::transpose01(g.constant(patched)), {channels * steps, config_.patch});
  x = projection_(g, x);
  const Array table = nn::sinusoidal_table(steps, width);
  Array tiled({channels * steps, width});
  for (std::size_t v = 0; v < channels; ++v)
    std::copy(table.data().begin(), table.data().end(),
              tiled.data().begin() + static_cast<std::ptrdiff_t>(v * steps * width));
  x = ops::add(x, g.constant(std::move(tiled)));

  for (const auto& block : blocks_) {
    // Attention is block-diagonal over channels; normalization and feed-forward are row-wise.
    Var normed = block.ln_attn(g, x);
    std::vector<Var> per_channel;
    per_channel.reserve(channels);
    for (std::size_t v = 0; v < channels; ++v) {
      Var rows = channels == 1 ? normed : ops::slice(normed, 0, v * steps, steps);
      per_channel.push_back(block.attn(g, rows, rows, false));
    }
    x = ops::add(x, channels == 1 ? per_channel.front() : ops::concat(per_channel, 0));
    x = ops::add(x, block.ffn(g, block.ln_ffn(g, x)));
  }
  x = final_norm_(g, x);
  return ops::transpose01(ops::reshape(x, {channels, steps, width}));
}

Array PatchEncoder::encode(const Array& patched) const {
  Graph g(false);
  return encode(g, patched).value();
}

TemporalTokens segment_tokens(Var encoded, std::size_t segment_index) {
  if (encoded.rank() != 3) throw DimensionError("segment tokens must be L′×V×d, got " + to_string(encoded.shape()));
  return TemporalTokens{encoded, {encoded.dim(0)}, {segment_index}, false};
}

TimePositionEncoding::TimePositionEncoding(ParameterSet& params, std::size_t channels, std::size_t width,
                                           double rotary_base, Rng& rng)
    : channels_(channels), width_(width), rotary_base_(rotary_base) {
  if (width % 2 != 0) throw ConfigError("d", "model width must be even for rotary segment encoding");
  if (!(rotary_base > 0.0)) throw ConfigError("rotary_base", "must be positive");
  channel_ = &params.add_uniform("psi.p_channel", {channels, width}, width, true, rng);
}

Array TimePositionEncoding::time_table(std::size_t steps) const { return nn::sinusoidal_table(steps, width_); }

TemporalTokens TimePositionEncoding::apply(Graph& g, const TemporalTokens& tokens) const {
  if (tokens.tpe_applied) throw InvariantError("time token position encoding applied twice");
  if (tokens.channels() != channels_ || tokens.width() != width_)
    throw DimensionError("TPE configured for " + std::to_string(channels_) + " channels × " +
                         std::to_string(width_) + " features, tokens are " + to_string(tokens.tokens.shape()));
  Var channel_row = ops::reshape(g.parameter(*channel_), {channels_ * width_});
  std::vector<Var> parts;
  std::size_t offset = 0;
  for (std::size_t s = 0; s < tokens.segment_lengths.size(); ++s) {
    const std::size_t steps = tokens.segment_lengths[s];
    Var seg = tokens.segment_lengths.size() == 1 ? tokens.tokens : ops::slice(tokens.tokens, 0, offset, steps);
    offset += steps;

    const Array table = time_table(steps);
    Array time_term({steps, channels_ * width_});
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t v = 0; v < channels_; ++v)
        std::copy_n(table.data().begin() + static_cast<std::ptrdiff_t>(t * width_), width_,
                    time_term.data().begin() + static_cast<std::ptrdiff_t>((t * channels_ + v) * width_));

    Var flat = ops::reshape(seg, {steps, channels_ * width_});
    flat = ops::add_row(ops::add(flat, g.constant(std::move(time_term))), channel_row);
    Var rotated = ops::rotary(ops::reshape(flat, {steps * channels_, width_}),
                              static_cast<double>(tokens.segment_indices[s]), rotary_base_);
    parts.push_back(ops::reshape(rotated, {steps, channels_, width_}));
  }
  TemporalTokens out = tokens;
  out.tokens = parts.size() == 1 ? parts.front() : ops::concat(parts, 0);
  out.tpe_applied = true;
  return out;
}

TemporalTokens concat_segments(const std::vector<TemporalTokens>& segments) {
  if (segments.empty()) throw DimensionError("concat_segments: no segments");
  const auto& first = segments.front();
  TemporalTokens out;
  std::vector<Var> parts;
  for (const auto& s : segments) {
    if (!s.tpe_applied) throw InvariantError("concat_segments: segment without position encoding");
    if (s.channels() != first.channels() || s.width() != first.width())
      throw DimensionError("concat_segments: segment " + to_string(s.tokens.shape()) + " does not match " +
                           to_string(first.tokens.shape()));
    parts.push_back(s.tokens);
    out.segment_lengths.insert(out.segment_lengths.end(), s.segment_lengths.begin(), s.segment_lengths.end());
    out.segment_indices.insert(out.segment_indices.end(), s.segment_indices.begin(), s.segment_indices.end());
  }
  out.tokens = parts.size() == 1 ? parts.front() : ops::concat(parts, 0);
  out.tpe_applied = true;
  return out;
}

}  // namespace itf
