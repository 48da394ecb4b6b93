#include "itformer/core.hpp"

#include "itformer/errors.hpp"

namespace itf {

void ItFormerConfig::validate() const {
  if (width == 0) throw ConfigError("d", "must be positive");
  if (lit_len == 0) throw ConfigError("lit_len", "must be positive");
  if (layers < 1) throw ConfigError("layers", "at least one alignment layer is required");
  if (heads == 0 || width % heads != 0)
    throw ConfigError("heads", "width " + std::to_string(width) + " is not divisible by " + std::to_string(heads) +
                                   " heads");
  if (channels == 0) throw ConfigError("channels", "must be positive");
}

std::size_t ItFormerConfig::parameter_count() const {
  return layers * (lit_len * width + 12 * width * width + 4 * width) + channels * width;
}

std::vector<std::size_t> placeholder_rows(const std::vector<bool>& mask) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) {
      if (!rows.empty() && rows.back() + 1 != i)
        throw DimensionError("placeholder rows are not contiguous (gap before row " + std::to_string(i) + ")");
      rows.push_back(i);
    }
  return rows;
}

ItFormerLayer ItFormerLayer::create(ParameterSet& params, const std::string& prefix, const ItFormerConfig& c,
                                    Rng& rng) {
  ItFormerLayer l;
  const std::size_t d = c.width;
  l.instruct = &params.add_uniform(prefix + ".instruct", {c.lit_len, d}, d, true, rng);
  l.refine_norm = nn::LayerNorm::create(params, prefix + ".refine.ln", d, true);
  l.refine_attn = nn::MultiHeadAttention::create(params, prefix + ".refine.attn", d, c.heads, true, rng);
  l.channel_q = nn::Linear::create(params, prefix + ".channel.wq", d, d, false, true, rng);
  l.channel_k = nn::Linear::create(params, prefix + ".channel.wk", d, d, false, true, rng);
  l.channel_v = nn::Linear::create(params, prefix + ".channel.wv", d, d, false, true, rng);
  l.channel_out = nn::Linear::create(params, prefix + ".channel.wo", d, d, false, true, rng);
  l.channel_heads = c.heads;
  l.time_norm = nn::LayerNorm::create(params, prefix + ".time.ln", d, true);
  l.time_attn = nn::MultiHeadAttention::create(params, prefix + ".time.attn", d, c.heads, true, rng);
  return l;
}

Var refine_instruct(Graph& g, const ItFormerLayer& layer, Var instruct, std::optional<Var> query) {
  const std::size_t n = instruct.dim(0);
  if (query && query->dim(1) != instruct.dim(1))
    throw DimensionError("refine: question rows " + to_string(query->shape()) + " vs instruct " +
                         to_string(instruct.shape()));
  Var x = query ? ops::concat({instruct, *query}, 0) : instruct;
  Var normed = layer.refine_norm(g, x);
  // Only the instruct rows are kept, so only they need to act as queries.
  Var queries = query ? ops::slice(normed, 0, 0, n) : normed;
  return ops::add(instruct, layer.refine_attn(g, queries, normed, false));
}

ChannelFuseResult channel_fuse(Graph& g, const ItFormerLayer& layer, Var refined, Var tokens,
                               nn::FlopCounter* counter) {
  if (tokens.rank() != 3 || tokens.dim(2) != refined.dim(1))
    throw DimensionError("channel_fuse: tokens " + to_string(tokens.shape()) + " do not match instruct width " +
                         to_string(refined.shape()));
  const std::size_t steps = tokens.dim(0), channels = tokens.dim(1), d = tokens.dim(2);
  const std::size_t heads = layer.channel_heads, dk = d / heads;

  Var q = layer.channel_q(g, refined);                          // n×d
  Var keys = layer.channel_k(g, ops::mean(tokens, 0));          // V×d, mean over time then project
  Var wv = g.parameter(*layer.channel_v.weight);

  ChannelFuseResult result;
  std::vector<Var> pooled;                                      // per head 1×V
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = heads == 1 ? q : ops::slice(q, 1, h * dk, dk);
    Var kh = heads == 1 ? keys : ops::slice(keys, 1, h * dk, dk);
    Var weights = ops::softmax(nn::attention_scores(qh, kh, counter), 1);
    result.channel_weights.push_back(weights);
    pooled.push_back(ops::reshape(ops::mean(weights, 0), {1, channels}));
  }
  // Pool raw tokens over channels first; the value projection is linear so it can follow.
  Var by_channel = ops::reshape(ops::transpose01(tokens), {channels, steps * d});
  Var mixed = ops::matmul(heads == 1 ? pooled.front() : ops::concat(pooled, 0), by_channel);  // heads×(L′·d)
  std::vector<Var> outputs;
  for (std::size_t h = 0; h < heads; ++h) {
    Var rows = ops::reshape(heads == 1 ? mixed : ops::slice(mixed, 0, h, 1), {steps, d});
    outputs.push_back(ops::matmul(rows, heads == 1 ? wv : ops::slice(wv, 1, h * dk, dk)));
  }
  result.output = layer.channel_out(g, heads == 1 ? outputs.front() : ops::concat(outputs, 1));
  return result;
}

TimeAttendResult time_attend(Graph& g, const ItFormerLayer& layer, Var refined, Var channel_fused,
                             nn::FlopCounter* counter) {
  TimeAttendResult result;
  Var memory = layer.time_norm(g, channel_fused);
  result.output = layer.time_attn(g, refined, memory, false, counter, &result.time_weights);
  return result;
}

ItFormer::ItFormer(ParameterSet& params, const ItFormerConfig& config, Rng& rng)
    : config_((config.validate(), config)),
      tpe_(params, config.channels, config.width, config.rotary_base, rng) {
  for (std::size_t l = 0; l < config.layers; ++l)
    layers_.push_back(ItFormerLayer::create(params, "psi.layer" + std::to_string(l), config, rng));
}

TemporalTokens ItFormer::position_tokens(Graph& g, const std::vector<Var>& segments) const {
  std::vector<TemporalTokens> parts;
  parts.reserve(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) parts.push_back(tpe_.apply(g, segment_tokens(segments[i], i)));
  return concat_segments(parts);
}

Var ItFormer::fuse(Graph& g, const TemporalTokens& tokens, std::optional<Var> query,
                   nn::FlopCounter* counter) const {
  if (!tokens.tpe_applied) throw InvariantError("fuse: time tokens are missing their position encoding");
  Var carry, fused;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    Var base = g.parameter(*layer.instruct);
    if (l > 0) base = ops::add(base, carry);
    Var refined = refine_instruct(g, layer, base, query);
    Var channel = channel_fuse(g, layer, refined, tokens.tokens, counter).output;
    fused = time_attend(g, layer, refined, channel, counter).output;
    carry = ops::add(refined, fused);
  }
  return fused;
}

Var inject_tal(const QueryEmbedding& query, Var fused) {
  const auto rows = placeholder_rows(query.placeholder);
  if (query.placeholder.size() != query.embeddings.dim(0))
    throw DimensionError("inject: mask has " + std::to_string(query.placeholder.size()) + " rows, prompt has " +
                         std::to_string(query.embeddings.dim(0)));
  if (rows.size() != fused.dim(0))
    throw DimensionError("inject: " + std::to_string(rows.size()) + " placeholder rows but " +
                         std::to_string(fused.dim(0)) + " fused tokens");
  return ops::scatter_rows(query.embeddings, fused, rows);
}

std::optional<Var> question_rows(const QueryEmbedding& query) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < query.placeholder.size(); ++i)
    if (!query.placeholder[i]) keep.push_back(i);
  if (keep.empty()) return std::nullopt;
  return ops::gather_rows(query.embeddings, keep);
}

}  // namespace itf
