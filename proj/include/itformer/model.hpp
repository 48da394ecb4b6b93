#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "itformer/core.hpp"
#include "itformer/dataset.hpp"
#include "itformer/encoder.hpp"
#include "itformer/lm.hpp"

namespace itf {

struct ModelConfig {
  std::size_t d = 64;
  std::size_t channels = 32;
  std::size_t patch_len = 60;
  std::size_t stride = 60;
  std::size_t encoder_layers = 4;
  std::size_t encoder_heads = 8;
  std::size_t encoder_hidden = 256;
  std::size_t lit_len = 25;
  std::size_t layers = 2;
  std::size_t heads = 8;
  std::size_t lm_layers = 2;
  std::size_t lm_heads = 8;
  std::size_t lm_hidden = 256;
  double rotary_base = 10000.0;

  void validate() const;
  EncoderConfig encoder() const;
  ItFormerConfig itformer() const;
  LmConfig lm(std::size_t vocab_size) const;
};

struct ParamBudget {
  std::size_t trainable = 0;
  std::size_t frozen = 0;
  double ratio = 0.0;   // trainable / (trainable + frozen)
};

ParamBudget report_param_budget(const ParameterSet& params);

/// Frozen encoder, trainable alignment module and frozen language model sharing one
/// parameter set. Parameters are drawn from one generator in that order.
class Model {
 public:
  Model(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed);

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const ModelConfig& config() const { return config_; }
  const PatchEncoder& encoder() const { return encoder_; }
  const ItFormer& itformer() const { return itformer_; }
  const MiniLm& lm() const { return lm_; }

  /// One L×V cycle through the frozen encoder: L′×V×d.
  Array encode_segment(const Array& values) const;

  /// Prompt embedding with the placeholder rows replaced by fused time tokens.
  /// `segments` are encoder outputs in cycle order.
  Var augmented_prompt(Graph& g, const std::vector<const Array*>& segments, std::span<const int> prompt,
                       nn::FlopCounter* counter = nullptr) const;

  /// Greedy answer ids (without EOS).
  std::vector<int> answer(const std::vector<const Array*>& segments, std::span<const int> prompt,
                          std::size_t max_len) const;

 private:
  ModelConfig config_;
  ParameterSet params_;
  Rng rng_;
  PatchEncoder encoder_;
  ItFormer itformer_;
  MiniLm lm_;
};

/// BOS, n placeholders, the question and (for closed tasks) the labeled choices.
std::string prompt_text(const QARecord& record, std::size_t lit_len);
std::vector<int> prompt_ids(const QARecord& record, const Vocabulary& vocab, std::size_t lit_len);

}  // namespace itf
