#include "itformer/model.hpp"

#include "itformer/errors.hpp"

namespace itf {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* key) {
    if (v == 0) throw ConfigError(key, "must be positive");
  };
  positive(d, "d");
  positive(channels, "channels");
  positive(patch_len, "patch_len");
  positive(stride, "stride");
  positive(lit_len, "lit_len");
  positive(encoder_hidden, "encoder_hidden");
  positive(lm_hidden, "lm_hidden");
  if (layers < 1) throw ConfigError("layers", "at least one alignment layer is required");
  if (d % 2 != 0) throw ConfigError("d", "must be even");
  for (auto [h, key] : {std::pair{heads, "heads"}, std::pair{encoder_heads, "encoder_heads"},
                        std::pair{lm_heads, "lm_heads"}})
    if (h == 0 || d % h != 0)
      throw ConfigError(key, "d = " + std::to_string(d) + " is not divisible by " + std::to_string(h));
  if (!(rotary_base > 0.0)) throw ConfigError("rotary_base", "must be positive");
}

EncoderConfig ModelConfig::encoder() const {
  return EncoderConfig{d, patch_len, stride, encoder_layers, encoder_heads, encoder_hidden};
}

ItFormerConfig ModelConfig::itformer() const {
  return ItFormerConfig{d, lit_len, layers, heads, channels, rotary_base};
}

LmConfig ModelConfig::lm(std::size_t vocab_size) const {
  return LmConfig{vocab_size, d, lm_layers, lm_heads, lm_hidden};
}

ParamBudget report_param_budget(const ParameterSet& params) {
  ParamBudget b;
  b.trainable = params.count(true);
  b.frozen = params.count(false);
  const std::size_t total = b.trainable + b.frozen;
  b.ratio = total ? static_cast<double>(b.trainable) / static_cast<double>(total) : 0.0;
  return b;
}

Model::Model(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed)
    : config_((config.validate(), config)),
      rng_(seed),
      encoder_(params_, config.encoder(), rng_),
      itformer_(params_, config.itformer(), rng_),
      lm_(params_, config.lm(vocab_size), rng_) {}

Array Model::encode_segment(const Array& values) const {
  if (values.rank() != 2 || values.dim(1) != config_.channels)
    throw ConfigError("channels", "series has shape " + to_string(values.shape()) + ", model expects " +
                                      std::to_string(config_.channels) + " channels");
  return encoder_.encode(patchify(TimeSeriesSegment{values, 0}, config_.patch_len, config_.stride));
}

Var Model::augmented_prompt(Graph& g, const std::vector<const Array*>& segments, std::span<const int> prompt,
                            nn::FlopCounter* counter) const {
  if (segments.empty()) throw DimensionError("augmented_prompt: no series");
  std::vector<Var> encoded;
  encoded.reserve(segments.size());
  for (const Array* s : segments) encoded.push_back(g.constant(*s));
  const TemporalTokens tokens = itformer_.position_tokens(g, encoded);
  const QueryEmbedding query = lm_.embed_query(g, prompt);
  Var fused = itformer_.fuse(g, tokens, question_rows(query), counter);
  return inject_tal(query, fused);
}

std::vector<int> Model::answer(const std::vector<const Array*>& segments, std::span<const int> prompt,
                               std::size_t max_len) const {
  Graph g(false);
  const Array rows = augmented_prompt(g, segments, prompt).value();
  return lm_.decode_greedy(rows, max_len);
}

std::string prompt_text(const QARecord& record, std::size_t lit_len) {
  std::string text;
  for (std::size_t i = 0; i < lit_len; ++i) text += "<ts> ";
  text += record.question;
  for (const auto& c : record.choices) text += " " + c.label + ": " + c.text;
  return text;
}

std::vector<int> prompt_ids(const QARecord& record, const Vocabulary& vocab, std::size_t lit_len) {
  std::vector<int> ids{Vocabulary::kBos};
  const auto rest = vocab.encode(prompt_text(record, lit_len));
  ids.insert(ids.end(), rest.begin(), rest.end());
  return ids;
}

}  // namespace itf
