#include <doctest.h>

#include <cmath>
#include <fstream>

#include "itformer/errors.hpp"
#include "itformer/lm.hpp"
#include "itformer/vocab.hpp"
#include "support.hpp"

using namespace itf;

namespace {

Vocabulary words_vocab() {
  return Vocabulary({"a", "b", "the", "fan", "speed", "is", "rising", "health", "fault", ":", "?", "what"});
}

struct SmallLm {
  ParameterSet params;
  Vocabulary vocab = words_vocab();
  Rng rng{3};
  MiniLm lm{params, LmConfig{vocab.size(), 16, 2, 2, 32}, rng};
};

}  // namespace

TEST_SUITE("lm") {

TEST_CASE("tokenizer") {
  const Vocabulary v = words_vocab();
  CHECK(v.encode("a") == std::vector<int>{v.id("a")});
  CHECK(v.decode(v.encode("a")) == "a");
  CHECK(v.encode("").empty());
  CHECK(v.id("zebra") == Vocabulary::kUnk);

  std::string prompt;
  for (int i = 0; i < 25; ++i) prompt += "<ts> ";
  prompt += "what is the fan speed?";
  const auto ids = v.encode(prompt);
  CHECK(std::count(ids.begin(), ids.end(), Vocabulary::kTimeSeries) == 25);
  CHECK(v.decode(ids).substr(0, 5) == "<ts> ");

  CHECK(split_words("The Fan-speed, is RISING.") ==
        std::vector<std::string>{"the", "fan", "-", "speed", ",", "is", "rising", "."});
  CHECK(normalize_text("  A:   Health ") == "a : health");
  const std::vector<int> with_markers{Vocabulary::kBos, v.id("the"), v.id("fan"), Vocabulary::kEos,
                                      Vocabulary::kPad};
  CHECK(v.decode(with_markers) == "the fan");
}

TEST_CASE("vocabulary file round trip") {
  const auto dir = support::scratch_dir("vocab");
  const Vocabulary v = words_vocab();
  v.save(dir / "vocab.txt");
  const Vocabulary w = Vocabulary::load(dir / "vocab.txt");
  REQUIRE(w.size() == v.size());
  for (int i = 0; i < static_cast<int>(v.size()); ++i) CHECK(w.token(i) == v.token(i));

  std::ofstream(dir / "bad.txt") << "<pad>\nhello\n";
  CHECK_THROWS_AS(Vocabulary::load(dir / "bad.txt"), IoError);
  CHECK_THROWS_AS(Vocabulary::load(dir / "missing.txt"), IoError);
}

TEST_CASE("query embedding") {
  SmallLm m;
  const auto ids = m.vocab.encode("<bos> <ts> <ts> <ts> what is the fan speed ?");
  Graph g(false);
  const auto q = m.lm.embed_query(g, ids);
  CHECK(q.embeddings.shape() == Shape{ids.size(), 16});
  CHECK(std::count(q.placeholder.begin(), q.placeholder.end(), true) == 3);
  Graph g2(false);
  CHECK(q.embeddings.value().identical(m.lm.embed_query(g2, ids).embeddings.value()));
  const std::vector<int> out_of_range{static_cast<int>(m.vocab.size())};
  CHECK_THROWS_AS(m.lm.embed(g, out_of_range), DimensionError);
}

TEST_CASE("parameters are frozen and counted") {
  SmallLm m;
  CHECK(m.params.count(true) == 0);
  CHECK(m.params.total() == LmConfig{m.vocab.size(), 16, 2, 2, 32}.parameter_count());
}

TEST_CASE("initial loss is close to the uniform loss") {
  ParameterSet params;
  Rng rng(4);
  const std::size_t vocab = 171;
  MiniLm lm(params, LmConfig{vocab, 64, 2, 8, 256}, rng);
  Rng pick(5);
  double total = 0.0;
  for (int i = 0; i < 10; ++i) {
    std::vector<int> prompt{Vocabulary::kBos}, answer;
    for (int k = 0; k < 20; ++k) prompt.push_back(5 + static_cast<int>(pick.below(vocab - 5)));
    for (int k = 0; k < 6; ++k) answer.push_back(5 + static_cast<int>(pick.below(vocab - 5)));
    Graph g(false);
    total += lm.score(g, lm.embed(g, prompt), answer).value().item();
  }
  const double uniform = std::log(static_cast<double>(vocab));
  CHECK(std::abs(total / 10.0 - uniform) < 0.2 * uniform);
}

TEST_CASE("causal: later tokens do not change earlier rows") {
  SmallLm m;
  const std::vector<int> a{1, 5, 6, 7}, b{1, 5, 6, 7, 8, 9};
  Graph g(false);
  const Array ha = m.lm.hidden(g, m.lm.embed(g, a)).value();
  const Array hb = m.lm.hidden(g, m.lm.embed(g, b)).value();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < 16; ++k) CHECK(ha.at(i, k) == hb.at(i, k));
}

TEST_CASE("answer logits align with the answer and EOS") {
  SmallLm m;
  const std::vector<int> prompt{1, 5, 6}, answer{7, 8};
  Graph g(false);
  const auto a = m.lm.answer_logits(g, m.lm.embed(g, prompt), answer);
  CHECK(a.logits.shape() == Shape{3, m.vocab.size()});
  CHECK(a.targets == std::vector<int>{7, 8, Vocabulary::kEos});
  // Row 0 of the answer logits comes from the last prompt position.
  const Array full = m.lm.logits(g, m.lm.hidden(g, m.lm.embed(g, prompt))).value();
  for (std::size_t j = 0; j < m.vocab.size(); ++j) CHECK(a.logits.value().at(0, j) == full.at(2, j));
  const std::vector<int> empty;
  CHECK_THROWS_AS(m.lm.score(g, m.lm.embed(g, prompt), empty), DimensionError);
}

TEST_CASE("greedy decoding") {
  SmallLm m;
  const std::vector<int> prompt{1, 5, 6, 7};
  Graph g(false);
  const Array p = m.lm.embed(g, prompt).value();
  const auto first = m.lm.decode_greedy(p, 6);
  CHECK(first == m.lm.decode_greedy(p, 6));
  CHECK(first.size() <= 6);
  for (int id : first) {
    CHECK(id != Vocabulary::kPad);
    CHECK(id != Vocabulary::kBos);
    CHECK(id != Vocabulary::kUnk);
    CHECK(id != Vocabulary::kTimeSeries);
  }

  // Constant final layer output e_0: logits are column 0 of the embedding.
  auto& E = m.params.at("lm.embedding").value;
  for (std::size_t j = 0; j < E.dim(0); ++j) E.at(j, 0) = 0.01 * static_cast<double>(j % 7);
  E.at(Vocabulary::kEos, 0) = 100.0;
  E.at(Vocabulary::kPad, 0) = 200.0;   // excluded, must not be emitted
  for (auto& v : m.lm.final_norm().gamma->value.data()) v = 0.0;
  for (auto& v : m.lm.final_norm().beta->value.data()) v = 0.0;
  m.lm.final_norm().beta->value[0] = 1.0;
  CHECK(m.lm.decode_greedy(p, 6).empty());

  E.at(Vocabulary::kEos, 0) = -100.0;
  E.at(7, 0) = 50.0;
  CHECK(m.lm.decode_greedy(p, 4) == std::vector<int>{7, 7, 7, 7});
  E.at(8, 0) = 50.0;   // tie between 7 and 8 resolves to the lower id
  CHECK(m.lm.decode_greedy(p, 2) == std::vector<int>{7, 7});
}

}  // TEST_SUITE
