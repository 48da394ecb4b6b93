#include <doctest.h>

#include <cmath>

#include "itformer/encoder.hpp"
#include "itformer/errors.hpp"
#include "oracle.hpp"

using namespace itf;

namespace {

Array random_array(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Array a(std::move(shape));
  for (auto& v : a.data()) v = rng.normal();
  return a;
}

EncoderConfig small_encoder() { return EncoderConfig{16, 10, 10, 2, 2, 32}; }

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("patchify shapes") {
  CHECK(patchify({random_array({600, 32}, 1), 0}, 60, 60).shape() == Shape{10, 32, 60});
  CHECK(patchify({random_array({60, 5}, 2), 0}, 60, 60).shape() == Shape{1, 5, 60});

  const Array values = random_array({120, 3}, 3);
  const Array p = patchify({values, 0}, 60, 30);
  REQUIRE(p.shape() == Shape{3, 3, 60});
  const auto starts = oracle::window_starts(120, 60, 30);
  REQUIRE(starts.size() == 3);
  for (std::size_t w = 0; w < 3; ++w)
    for (std::size_t v = 0; v < 3; ++v)
      for (std::size_t k = 0; k < 60; ++k) CHECK(p.at(w, v, k) == values.at(starts[w] + k, v));
  // window 1 shares its first half with window 0 and its second half with window 2
  for (std::size_t k = 0; k < 30; ++k) {
    CHECK(p.at(1, 0, k) == p.at(0, 0, k + 30));
    CHECK(p.at(1, 0, k + 30) == p.at(2, 0, k));
  }
}

TEST_CASE("window count matches enumeration") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t L = 1 + rng.below(400), P = 1 + rng.below(120), S = 1 + rng.below(80);
    const auto starts = oracle::window_starts(L, P, S);
    const bool tiles = !starts.empty() && starts.back() + P == L;
    if (tiles)
      CHECK(window_count(L, P, S) == starts.size());
    else
      CHECK_THROWS_AS(window_count(L, P, S), DimensionError);
  }
  CHECK_THROWS_AS(window_count(100, 0, 10), ConfigError);
  CHECK_THROWS_AS(window_count(100, 10, 0), ConfigError);
}

TEST_CASE("encoder output shape at the default configuration") {
  ParameterSet params;
  Rng rng(1);
  PatchEncoder enc(params, EncoderConfig{}, rng);
  const Array out = enc.encode(patchify({random_array({600, 32}, 4), 0}, 60, 60));
  CHECK(out.shape() == Shape{10, 32, 64});
  CHECK(out.all_finite());
  CHECK(params.count(true) == 0);
  CHECK(params.total() == PatchEncoder::parameter_count(EncoderConfig{}));
}

TEST_CASE("zero input with zero biases is finite and deterministic") {
  ParameterSet params;
  Rng rng(2);
  PatchEncoder enc(params, small_encoder(), rng);
  for (auto& p : params.all())
    if (p.name.find("bias") != std::string::npos || p.name.find("beta") != std::string::npos)
      for (auto& v : p.value.data()) v = 0.0;
  const Array patched({3, 4, 10}, 0.0);
  const Array a = enc.encode(patched), b = enc.encode(patched);
  CHECK(a.all_finite());
  CHECK(a.identical(b));
}

TEST_CASE("identical channels encode identically") {
  ParameterSet params;
  Rng rng(3);
  PatchEncoder enc(params, small_encoder(), rng);
  Array values = random_array({40, 5}, 5);
  for (std::size_t t = 0; t < 40; ++t) values.at(t, 3) = values.at(t, 1);
  const Array out = enc.encode(patchify({values, 0}, 10, 10));
  bool same = true, other = true;
  for (std::size_t l = 0; l < 4; ++l)
    for (std::size_t k = 0; k < 16; ++k) {
      same = same && out.at(l, 1, k) == out.at(l, 3, k);
      other = other && out.at(l, 1, k) == out.at(l, 2, k);
    }
  CHECK(same);
  CHECK_FALSE(other);
}

TEST_CASE("time table starts at sin 0 and cos 0") {
  ParameterSet params;
  Rng rng(4);
  TimePositionEncoding tpe(params, 3, 8, 10000.0, rng);
  const Array t = tpe.time_table(4);
  for (std::size_t k = 0; k < 8; ++k) CHECK(t.at(0, k) == (k % 2 == 0 ? 0.0 : 1.0));
  const Array ref = nn::sinusoidal_table(4, 8);
  CHECK(t.identical(ref));
  CHECK(params.at("psi.p_channel").trainable);
  CHECK(params.at("psi.p_channel").value.shape() == Shape{3, 8});
}

TEST_CASE("segment 0 adds time and channel terms only") {
  ParameterSet params;
  Rng rng(5);
  TimePositionEncoding tpe(params, 3, 8, 10000.0, rng);
  const Array x = random_array({4, 3, 8}, 6);
  Graph g(false);
  const auto out = tpe.apply(g, segment_tokens(g.constant(x), 0));
  CHECK(out.tpe_applied);
  const Array time = tpe.time_table(4);
  const Array& ch = tpe.channel_table().value;
  const Array& y = out.tokens.value();
  for (std::size_t l = 0; l < 4; ++l)
    for (std::size_t v = 0; v < 3; ++v)
      for (std::size_t k = 0; k < 8; ++k) CHECK(y.at(l, v, k) == (x.at(l, v, k) + time.at(l, k)) + ch.at(v, k));
}

TEST_CASE("segment rotation matches the rotation oracle and keeps norms") {
  ParameterSet params;
  Rng rng(7);
  TimePositionEncoding tpe(params, 3, 8, 10000.0, rng);
  const Array x = random_array({4, 3, 8}, 8);
  Graph g(false);
  const Array y = tpe.apply(g, segment_tokens(g.constant(x), 7)).tokens.value();
  const Array time = tpe.time_table(4);
  const Array& ch = tpe.channel_table().value;
  double worst = 0.0;
  for (std::size_t l = 0; l < 4; ++l)
    for (std::size_t v = 0; v < 3; ++v) {
      std::vector<double> row(8);
      for (std::size_t k = 0; k < 8; ++k) row[k] = x.at(l, v, k) + time.at(l, k) + ch.at(v, k);
      const auto expected = oracle::rotate(row, 7.0, 10000.0);
      for (std::size_t k = 0; k < 8; ++k) worst = std::max(worst, std::abs(expected[k] - y.at(l, v, k)));
    }
  CHECK(worst < 1e-12);

  for (double position : {0.0, 1.0, 5.0, 123.0}) {
    const Array rows = random_array({6, 16}, 9);
    const Array r = ops::rotary(g.constant(rows), position, 10000.0).value();
    for (std::size_t i = 0; i < 6; ++i) {
      double a = 0.0, b = 0.0;
      for (std::size_t k = 0; k < 16; ++k) {
        a += rows.at(i, k) * rows.at(i, k);
        b += r.at(i, k) * r.at(i, k);
      }
      CHECK(std::abs(std::sqrt(a) - std::sqrt(b)) <= 1e-12);
    }
  }
}

TEST_CASE("position encoding cannot be applied twice") {
  ParameterSet params;
  Rng rng(9);
  TimePositionEncoding tpe(params, 2, 4, 10000.0, rng);
  Graph g(false);
  const auto once = tpe.apply(g, segment_tokens(g.constant(random_array({2, 2, 4}, 10)), 0));
  CHECK_THROWS_AS(tpe.apply(g, once), InvariantError);
  CHECK_THROWS_AS(tpe.apply(g, segment_tokens(g.constant(random_array({2, 3, 4}, 10)), 0)), DimensionError);
}

TEST_CASE("segment concatenation") {
  ParameterSet params;
  Rng rng(10);
  TimePositionEncoding tpe(params, 32, 8, 10000.0, rng);
  Graph g(false);
  std::vector<TemporalTokens> segs;
  for (std::size_t i = 0; i < 10; ++i)
    segs.push_back(tpe.apply(g, segment_tokens(g.constant(random_array({10, 32, 8}, 20 + i)), i)));
  const auto all = concat_segments(segs);
  CHECK(all.tokens.shape() == Shape{100, 32, 8});
  CHECK(all.segment_lengths.size() == 10);

  const auto single = concat_segments({segs[0]});
  CHECK(single.tokens.value().identical(segs[0].tokens.value()));

  const auto ab = concat_segments({segs[0], segs[1]}), ba = concat_segments({segs[1], segs[0]});
  CHECK_FALSE(ops::slice(ab.tokens, 0, 0, 10).value().identical(ops::slice(ba.tokens, 0, 0, 10).value()));

  CHECK_THROWS_AS(concat_segments({segment_tokens(g.constant(random_array({2, 32, 8}, 1)), 0)}), InvariantError);
  CHECK_THROWS_AS(concat_segments({}), DimensionError);
}

TEST_CASE("encoder rejects the wrong window length") {
  ParameterSet params;
  Rng rng(12);
  PatchEncoder enc(params, small_encoder(), rng);
  CHECK_THROWS_AS(enc.encode(Array({2, 3, 7}, 0.0)), DimensionError);
}

}  // TEST_SUITE
