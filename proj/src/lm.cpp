#include "itformer/lm.hpp"

#include <cmath>

#include "itformer/errors.hpp"

namespace itf {

std::size_t LmConfig::parameter_count() const {
  return vocab_size * width + layers * nn::transformer_block_parameters(width, hidden) + 2 * width;
}

MiniLm::MiniLm(ParameterSet& params, const LmConfig& config, Rng& rng) : config_(config) {
  if (config.vocab_size <= Vocabulary::kReserved.size())
    throw ConfigError("vocab", "vocabulary holds only reserved tokens");
  embedding_ = &params.add_uniform("lm.embedding", {config.vocab_size, config.width}, config.width, false, rng);
  for (std::size_t l = 0; l < config.layers; ++l)
    blocks_.push_back(nn::TransformerBlock::create(params, "lm.block" + std::to_string(l), config.width,
                                                   config.heads, config.hidden, false, rng));
  final_norm_ = nn::LayerNorm::create(params, "lm.final_ln", config.width, false);
}

Var MiniLm::embed(Graph& g, std::span<const int> ids, std::size_t first_position) const {
  for (int id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size)
      throw DimensionError("token id " + std::to_string(id) + " outside vocabulary of " +
                           std::to_string(config_.vocab_size));
  const std::size_t width = config_.width;
  Var rows = ops::scale(ops::embedding(g.parameter(*embedding_), ids), std::sqrt(static_cast<double>(width)));
  const Array table = nn::sinusoidal_table(first_position + ids.size(), width);
  Array positions({ids.size(), width});
  std::copy(table.data().begin() + static_cast<std::ptrdiff_t>(first_position * width), table.data().end(),
            positions.data().begin());
  return ops::add(rows, g.constant(std::move(positions)));
}

QueryEmbedding MiniLm::embed_query(Graph& g, std::span<const int> ids) const {
  if (ids.empty()) throw DimensionError("embed_query: empty prompt");
  QueryEmbedding q;
  q.embeddings = embed(g, ids, 0);
  q.placeholder.reserve(ids.size());
  for (int id : ids) q.placeholder.push_back(id == Vocabulary::kTimeSeries);
  return q;
}

Var MiniLm::hidden(Graph& g, Var sequence) const {
  for (const auto& block : blocks_) sequence = block(g, sequence, true);
  return final_norm_(g, sequence);
}

Var MiniLm::logits(Graph& g, Var rows) const { return ops::matmul_bt(rows, g.parameter(*embedding_)); }

MiniLm::AnswerLogits MiniLm::answer_logits(Graph& g, Var prompt, std::span<const int> answer) const {
  if (answer.empty()) throw DimensionError("score: empty answer");
  const std::size_t lq = prompt.dim(0);
  Var sequence = ops::concat({prompt, embed(g, answer, lq)}, 0);
  Var h = hidden(g, sequence);
  // Row lq−1 predicts the first answer token, the last row predicts EOS.
  AnswerLogits out;
  out.logits = logits(g, ops::slice(h, 0, lq - 1, answer.size() + 1));
  out.targets.assign(answer.begin(), answer.end());
  out.targets.push_back(Vocabulary::kEos);
  return out;
}

Var MiniLm::score(Graph& g, Var prompt, std::span<const int> answer) const {
  auto a = answer_logits(g, prompt, answer);
  return ops::cross_entropy(a.logits, a.targets, std::vector<bool>(a.targets.size(), true));
}

std::vector<int> MiniLm::decode_greedy(const Array& prompt, std::size_t max_len) const {
  if (max_len < 1) throw DimensionError("decode_greedy: max_len must be at least 1");
  std::vector<int> out;
  while (out.size() < max_len) {
    Graph g(false);
    Var sequence = g.constant(prompt);
    if (!out.empty()) sequence = ops::concat({sequence, embed(g, out, prompt.dim(0))}, 0);
    Var h = hidden(g, sequence);
    const Array scores = logits(g, ops::slice(h, 0, h.dim(0) - 1, 1)).value();
    int best = -1;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      const int id = static_cast<int>(j);
      if (id == Vocabulary::kPad || id == Vocabulary::kBos || id == Vocabulary::kUnk ||
          id == Vocabulary::kTimeSeries)
        continue;
      if (best < 0 || scores[j] > scores[static_cast<std::size_t>(best)]) best = id;
    }
    if (best == Vocabulary::kEos) break;
    out.push_back(best);
  }
  return out;
}

}  // namespace itf
