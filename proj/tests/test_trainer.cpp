#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "itformer/checkpoint.hpp"
#include "itformer/errors.hpp"
#include "itformer/trainer.hpp"
#include "support.hpp"

using namespace itf;

namespace {

const std::filesystem::path& tiny_data() {
  static const std::filesystem::path dir = [] {
    auto d = support::scratch_dir("trainer_data");
    write_dataset(d, support::tiny_config().data, 5);
    return d;
  }();
  return dir;
}

// Default widths over the tiny data (8 channels, 2 windows per cycle).
RunConfig desk_model() {
  RunConfig c = support::tiny_config();
  const std::size_t channels = c.model.channels;
  c.model = ModelConfig{};
  c.model.channels = channels;
  return c;
}

struct Fixture {
  RunConfig config = support::tiny_config();
  Vocabulary vocab = Vocabulary::load(tiny_data() / "vocab.txt");
  Model model{config.model, vocab.size(), 1};
  EncodedCache cache{model, tiny_data()};
  std::vector<Example> examples;

  explicit Fixture(std::size_t count = 32, RunConfig c = support::tiny_config())
      : config(c), model(config.model, vocab.size(), 1) {
    const auto records = read_manifest(tiny_data() / "train.jsonl");
    for (std::size_t i = 0; i < std::min(count, records.size()); ++i)
      examples.push_back(make_example(records[i * (records.size() / count)], vocab, config.model.lit_len,
                                      config.data.window));
  }

  double mean_loss() {
    Graph g(false);
    return batch_loss(g, model, cache, examples).loss.value().item();
  }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("one step changes the alignment module only") {
  Fixture f(8);
  std::map<std::string, Array> before;
  for (const auto& p : f.model.params().all()) before[p.name] = p.value;
  Trainer trainer(f.model, f.cache, f.config.train);
  const auto r = trainer.sft_step(f.examples);
  CHECK(r.frozen_ok);
  CHECK(std::isfinite(r.grad_norm));
  CHECK(r.grad_norm > 0.0);
  std::size_t changed = 0;
  for (const auto& p : f.model.params().all()) {
    if (p.trainable)
      changed += !p.value.identical(before[p.name]);
    else
      CHECK(p.value.identical(before[p.name]));
  }
  CHECK(changed > 0);
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  Fixture f(1);
  GradientMap zeros;
  for (const auto& p : f.model.params().all())
    if (p.trainable) zeros[p.name] = Array(p.value.shape(), 0.0);
  const auto checksum = f.model.params().checksum(true);
  Adam adam(1e-3, 0.9, 0.999, 1e-8);
  adam.step(f.model.params(), zeros);
  CHECK(f.model.params().checksum(true) == checksum);
}

TEST_CASE("a gradient into a frozen parameter is an invariant violation") {
  Fixture f(2);
  f.model.params().at("lm.final_ln.gamma").trainable = true;
  Trainer trainer(f.model, f.cache, f.config.train);
  CHECK_THROWS_AS(trainer.sft_step(f.examples), InvariantError);
}

TEST_CASE("batch loss does not depend on record order") {
  Fixture f(5);
  Graph g(false);
  const double a = batch_loss(g, f.model, f.cache, f.examples).loss.value().item();
  std::vector<Example> reversed(f.examples.rbegin(), f.examples.rend());
  const double b = batch_loss(g, f.model, f.cache, reversed).loss.value().item();
  CHECK(std::abs(a - b) < 1e-12);
}

TEST_CASE("wrong series count is rejected") {
  Fixture f(1);
  QARecord r{"r", {"series/engine_000/cycle_000.itts"}, Task::Reasoning, "q", "a", {}};
  CHECK_THROWS_AS(make_example(r, f.vocab, 4, 3), ConfigError);
}

TEST_CASE("parameter budget") {
  Fixture f(1);
  const auto b = report_param_budget(f.model.params());
  CHECK(b.trainable == f.config.model.itformer().parameter_count());
  CHECK(b.frozen > 0);
  CHECK(b.ratio < 1.0);

  ParameterSet only;
  Rng rng(1);
  ItFormer psi(only, ItFormerConfig{}, rng);
  CHECK(report_param_budget(only).ratio == 1.0);

  Model full(ModelConfig{}, 171, 1);
  const auto d = report_param_budget(full.params());
  CHECK(d.trainable == 104064);
  CHECK(d.frozen == PatchEncoder::parameter_count(ModelConfig{}.encoder()) +
                        ModelConfig{}.lm(171).parameter_count());
  CHECK(d.ratio < 1.0);
}

TEST_CASE("loss halves within 300 steps on 32 records") {
  Fixture f(32, desk_model());
  f.config.train.lm_pretrain_epochs = 50;
  pretrain_language_model(f.model, f.examples, f.config.train, 1, nullptr);
  const double start = f.mean_loss();
  Trainer trainer(f.model, f.cache, f.config.train);
  Rng rng(2);
  for (int step = 0; step < 300; ++step) {
    std::vector<Example> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(f.examples[rng.below(f.examples.size())]);
    REQUIRE(trainer.sft_step(batch).frozen_ok);
  }
  const double end = f.mean_loss();
  MESSAGE("loss " << start << " -> " << end);
  CHECK(end <= 0.5 * start);
}

TEST_CASE("one example: loss falls every step and the answer is reproduced") {
  Fixture f(1, desk_model());
  f.config.train.lm_pretrain_epochs = 25;
  pretrain_language_model(f.model, f.examples, f.config.train, 1, nullptr);
  Trainer trainer(f.model, f.cache, f.config.train);
  double previous = f.mean_loss();
  bool decreasing = true;
  for (int step = 0; step < 50; ++step) {
    trainer.sft_step(f.examples);
    const double now = f.mean_loss();
    decreasing = decreasing && now < previous;
    previous = now;
  }
  CHECK(decreasing);
  for (int step = 0; step < 150; ++step) trainer.sft_step(f.examples);
  const Example& ex = f.examples[0];
  CHECK(f.model.answer(f.cache.segments(ex), ex.prompt, 64) == ex.answer);
}

TEST_CASE("full run artifacts and determinism") {
  RunConfig c = support::tiny_config();
  c.train.max_steps = 6;
  c.train.lm_pretrain_epochs = 1;
  const auto a = support::scratch_dir("train_a"), b = support::scratch_dir("train_b");
  const auto ra = train(c, tiny_data(), a, 9, nullptr);
  const auto rb = train(c, tiny_data(), b, 9, nullptr);
  REQUIRE(ra.steps.size() == 6);
  char la[32], lb[32];
  std::snprintf(la, sizeof la, "%.12f", ra.steps.back().loss);
  std::snprintf(lb, sizeof lb, "%.12f", rb.steps.back().loss);
  CHECK(std::string(la) == std::string(lb));
  CHECK(slurp(a / kCheckpointFile) == slurp(b / kCheckpointFile));
  CHECK(slurp(a / kLogFile) == slurp(b / kLogFile));
  CHECK(slurp(a / kLogFile).rfind("step,epoch,loss,grad_norm,frozen_ok\n", 0) == 0);
  CHECK(parse_config(slurp(a / kConfigFile)).train.max_steps == 6);
  CHECK(ra.analytic_trainable == ra.budget.trainable);

  const auto rc = train(c, tiny_data(), support::scratch_dir("train_c"), 10, nullptr);
  CHECK(rc.steps.back().loss != ra.steps.back().loss);
}

TEST_CASE("zero epochs saves the initialization") {
  RunConfig c = support::tiny_config();
  c.train.epochs = 0;
  const auto dir = support::scratch_dir("train_zero");
  const auto vocab = Vocabulary::load(tiny_data() / "vocab.txt");
  train(c, tiny_data(), dir, 4, nullptr);
  const Model init(c.model, vocab.size(), 4);
  const auto saved = read_checkpoint(dir / kCheckpointFile);
  REQUIRE(saved.size() == init.params().all().size());
  for (const auto& p : saved) CHECK(p.value.identical(init.params().find(p.name)->value));

  // With the language-model stage the alignment weights are still the initial ones.
  c.train.lm_pretrain_epochs = 1;
  train(c, tiny_data(), dir, 4, nullptr);
  for (const auto& p : read_checkpoint(dir / kCheckpointFile))
    if (is_alignment_parameter(p.name)) CHECK(p.value.identical(init.params().find(p.name)->value));
}

TEST_CASE("checkpoint round trip and mismatch") {
  Fixture f(1);
  const auto dir = support::scratch_dir("ckpt");
  save_checkpoint(dir / "m.ckpt", f.model.params());
  Model other(f.config.model, f.vocab.size(), 77);
  load_checkpoint(dir / "m.ckpt", other.params());
  CHECK(other.params().checksum(true) == f.model.params().checksum(true));
  CHECK(other.params().checksum(false) == f.model.params().checksum(false));

  RunConfig wide = f.config;
  wide.model.lit_len = 5;
  Model mismatched(wide.model, f.vocab.size(), 1);
  CHECK_THROWS_AS(load_checkpoint(dir / "m.ckpt", mismatched.params()), ConfigError);
  std::ofstream(dir / "junk.ckpt") << "nope";
  CHECK_THROWS_AS(read_checkpoint(dir / "junk.ckpt"), IoError);
}

}  // TEST_SUITE
