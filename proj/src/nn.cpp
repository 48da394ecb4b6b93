#include "itformer/nn.hpp"

#include <cmath>

#include "itformer/errors.hpp"

namespace itf::nn {

Var attention_scores(Var q, Var k, FlopCounter* counter) {
  if (counter) counter->score_macs += static_cast<std::uint64_t>(q.dim(0)) * q.dim(1) * k.dim(0);
  return ops::scale(ops::matmul_bt(q, k), 1.0 / std::sqrt(static_cast<double>(q.dim(1))));
}

Array sinusoidal_table(std::size_t positions, std::size_t width) {
  Array table({positions, width});
  for (std::size_t t = 0; t < positions; ++t)
    for (std::size_t i = 0; 2 * i < width; ++i) {
      const double omega = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(width));
      table.at(t, 2 * i) = std::sin(static_cast<double>(t) * omega);
      if (2 * i + 1 < width) table.at(t, 2 * i + 1) = std::cos(static_cast<double>(t) * omega);
    }
  return table;
}

Linear Linear::create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                      bool with_bias, bool trainable, Rng& rng) {
  Linear l;
  l.weight = &params.add_uniform(name + ".weight", {in, out}, in, trainable, rng);
  if (with_bias) l.bias = &params.add_uniform(name + ".bias", {out}, in, trainable, rng);
  return l;
}

Var Linear::operator()(Graph& g, Var x) const {
  Var y = ops::matmul(x, g.parameter(*weight));
  return bias ? ops::add_row(y, g.parameter(*bias)) : y;
}

LayerNorm LayerNorm::create(ParameterSet& params, const std::string& name, std::size_t width, bool trainable) {
  LayerNorm ln;
  ln.gamma = &params.add(name + ".gamma", Array({width}, 1.0), trainable);
  ln.beta = &params.add(name + ".beta", Array({width}, 0.0), trainable);
  return ln;
}

Var LayerNorm::operator()(Graph& g, Var x) const {
  return ops::add_row(ops::mul_row(ops::layer_norm(x), g.parameter(*gamma)), g.parameter(*beta));
}

MultiHeadAttention MultiHeadAttention::create(ParameterSet& params, const std::string& name, std::size_t width,
                                              std::size_t heads, bool trainable, Rng& rng) {
  if (heads == 0 || width % heads != 0)
    throw ConfigError("heads", "width " + std::to_string(width) + " is not divisible by " + std::to_string(heads) +
                                   " heads");
  MultiHeadAttention m;
  m.wq = Linear::create(params, name + ".wq", width, width, false, trainable, rng);
  m.wk = Linear::create(params, name + ".wk", width, width, false, trainable, rng);
  m.wv = Linear::create(params, name + ".wv", width, width, false, trainable, rng);
  m.wo = Linear::create(params, name + ".wo", width, width, false, trainable, rng);
  m.heads = heads;
  return m;
}

Var MultiHeadAttention::operator()(Graph& g, Var query, Var memory, bool causal, FlopCounter* counter,
                                   std::vector<Var>* attention) const {
  const std::size_t width = query.dim(1);
  if (memory.dim(1) != width)
    throw DimensionError("attention: query width " + to_string(query.shape()) + " vs memory " +
                         to_string(memory.shape()));
  const std::size_t dk = width / heads;
  Var q = wq(g, query), k = wk(g, memory), v = wv(g, memory);
  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = heads == 1 ? q : ops::slice(q, 1, h * dk, dk);
    Var kh = heads == 1 ? k : ops::slice(k, 1, h * dk, dk);
    Var vh = heads == 1 ? v : ops::slice(v, 1, h * dk, dk);
    Var scores = attention_scores(qh, kh, counter);
    if (causal) scores = ops::causal_mask(scores);
    Var weights = ops::softmax(scores, 1);
    if (attention) attention->push_back(weights);
    outputs.push_back(ops::matmul(weights, vh));
  }
  Var merged = heads == 1 ? outputs.front() : ops::concat(outputs, 1);
  return wo(g, merged);
}

FeedForward FeedForward::create(ParameterSet& params, const std::string& name, std::size_t width,
                                std::size_t hidden, bool trainable, Rng& rng) {
  return FeedForward{Linear::create(params, name + ".up", width, hidden, true, trainable, rng),
                     Linear::create(params, name + ".down", hidden, width, true, trainable, rng)};
}

Var FeedForward::operator()(Graph& g, Var x) const { return down(g, ops::gelu(up(g, x))); }

TransformerBlock TransformerBlock::create(ParameterSet& params, const std::string& name, std::size_t width,
                                          std::size_t heads, std::size_t hidden, bool trainable, Rng& rng) {
  TransformerBlock b;
  b.ln_attn = LayerNorm::create(params, name + ".ln_attn", width, trainable);
  b.attn = MultiHeadAttention::create(params, name + ".attn", width, heads, trainable, rng);
  b.ln_ffn = LayerNorm::create(params, name + ".ln_ffn", width, trainable);
  b.ffn = FeedForward::create(params, name + ".ffn", width, hidden, trainable, rng);
  return b;
}

Var TransformerBlock::operator()(Graph& g, Var x, bool causal) const {
  Var normed = ln_attn(g, x);
  x = ops::add(x, attn(g, normed, normed, causal));
  return ops::add(x, ffn(g, ln_ffn(g, x)));
}

std::size_t transformer_block_parameters(std::size_t width, std::size_t hidden) {
  // two layer norms, four bias-free projections, two biased feed-forward layers
  return 4 * width + 4 * width * width + (width * hidden + hidden) + (hidden * width + width);
}

}  // namespace itf::nn
