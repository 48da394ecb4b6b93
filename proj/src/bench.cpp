#include "itformer/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <optional>

#include "itformer/errors.hpp"
#include "itformer/kernels.hpp"

namespace itf {

namespace {

Array random_array(Shape shape, Rng& rng) {
  Array a(std::move(shape));
  for (auto& v : a.data()) v = rng.normal();
  return a;
}

struct Inputs {
  Array instruct, question, tokens;   // question is empty when L_q = 0

  std::optional<Var> query(Graph& g) const {
    if (question.empty()) return std::nullopt;
    return g.constant(question);
  }
};

Inputs make_inputs(std::size_t n, std::size_t d, std::size_t V, std::size_t Lp, std::size_t Lq, std::uint64_t seed) {
  Rng rng(seed);
  Inputs in;
  in.instruct = random_array({n, d}, rng);
  if (Lq > 0) in.question = random_array({Lq, d}, rng);
  in.tokens = random_array({Lp, V, d}, rng);
  return in;
}

// One forward of each path; counters see only the steps after refinement.
Var run_ita(Graph& g, const BenchModules& m, const Inputs& in, nn::FlopCounter* counter) {
  Var refined = refine_instruct(g, m.layer, g.constant(in.instruct), in.query(g));
  Var tokens = g.constant(in.tokens);
  Var channel = channel_fuse(g, m.layer, refined, tokens, counter).output;
  return time_attend(g, m.layer, refined, channel, counter).output;
}

Var run_cross(Graph& g, const BenchModules& m, const Inputs& in, nn::FlopCounter* counter) {
  Var refined = refine_instruct(g, m.layer, g.constant(in.instruct), in.query(g));
  return cross_attention_baseline(g, m.cross, refined, g.constant(in.tokens), counter);
}

template <typename F>
double median_ms(F&& body, std::size_t repetitions, std::size_t warmup) {
  for (std::size_t i = 0; i < warmup; ++i) body();
  std::vector<double> times;
  times.reserve(repetitions);
  for (std::size_t i = 0; i < repetitions; ++i) {
    const auto start = std::chrono::steady_clock::now();
    body();
    times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;
  return times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
}

}  // namespace

Var cross_attention_baseline(Graph& g, const nn::MultiHeadAttention& attention, Var refined, Var tokens,
                             nn::FlopCounter* counter) {
  if (tokens.rank() != 3 || tokens.dim(2) != refined.dim(1))
    throw DimensionError("cross attention: tokens " + to_string(tokens.shape()) + " do not match instruct width " +
                         to_string(refined.shape()));
  Var flat = ops::reshape(tokens, {tokens.dim(0) * tokens.dim(1), tokens.dim(2)});
  return attention(g, refined, flat, false, counter);
}

double BenchPoint::analytic_ratio() const {
  return static_cast<double>(V) * static_cast<double>(Lp) / static_cast<double>(V + Lp);
}

BenchModules::BenchModules(std::size_t n, std::size_t d, std::size_t heads, std::size_t channels,
                           std::uint64_t seed) {
  Rng rng(seed);
  ItFormerConfig c{d, n, 1, heads, channels, 10000.0};
  c.validate();
  layer = ItFormerLayer::create(params, "psi.layer0", c, rng);
  cross = nn::MultiHeadAttention::create(params, "bench.cross", d, heads, true, rng);
}

std::pair<std::uint64_t, std::uint64_t> count_score_macs(const BenchModules& m, std::size_t V, std::size_t Lp,
                                                         std::size_t Lq) {
  const std::size_t n = m.layer.instruct->value.dim(0), d = m.layer.instruct->value.dim(1);
  const Inputs in = make_inputs(n, d, V, Lp, Lq, 1);
  Graph g(false);
  nn::FlopCounter ita, cross;
  run_ita(g, m, in, &ita);
  run_cross(g, m, in, &cross);
  return {ita.score_macs, cross.score_macs};
}

std::vector<BenchPoint> run_grid(const BenchConfig& config, std::uint64_t seed, std::ostream* progress) {
  if (config.channels.empty() || config.steps.empty() || config.question_lengths.empty())
    throw ConfigError("bench.channels", "grid lists must be non-empty");
  if (config.repetitions < 30) throw ConfigError("bench.repetitions", "at least 30 repetitions are required");
  const int threads = kernels::num_threads();
  kernels::set_num_threads(1);
  const std::size_t max_v = *std::max_element(config.channels.begin(), config.channels.end());
  BenchModules modules(config.n, config.d, config.heads, max_v, seed);

  std::vector<BenchPoint> points;
  for (std::size_t V : config.channels)
    for (std::size_t Lp : config.steps)
      for (std::size_t Lq : config.question_lengths) {
        BenchPoint p{V, Lp, Lq, config.n, config.d};
        p.repetitions = config.repetitions;
        p.warmup = config.warmup;
        const Inputs in = make_inputs(config.n, config.d, V, Lp, Lq, mix_seed(seed, points.size()));
        std::tie(p.ita_flops, p.cross_flops) = count_score_macs(modules, V, Lp, Lq);
        p.ita_ms = median_ms([&] { Graph g(false); run_ita(g, modules, in, nullptr); }, p.repetitions, p.warmup);
        p.cross_ms = median_ms([&] { Graph g(false); run_cross(g, modules, in, nullptr); }, p.repetitions, p.warmup);
        if (progress)
          *progress << "V=" << V << " L'=" << Lp << " Lq=" << Lq << " ita " << p.ita_ms << " ms, cross "
                    << p.cross_ms << " ms\n";
        points.push_back(p);
      }
  kernels::set_num_threads(threads);
  return points;
}

std::string bench_csv(const std::vector<BenchPoint>& points) {
  std::string out = "V,Lp,Lq,n,d,ita_ms,cross_ms,ita_flops,cross_flops,speedup\n";
  char buf[256];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%zu,%zu,%.6f,%.6f,%llu,%llu,%.4f\n", p.V, p.Lp, p.Lq, p.n, p.d,
                  p.ita_ms, p.cross_ms, static_cast<unsigned long long>(p.ita_flops),
                  static_cast<unsigned long long>(p.cross_flops), p.speedup());
    out += buf;
  }
  return out;
}

std::string bench_plot_script(const std::vector<BenchPoint>& points, const std::string& csv_name) {
  if (points.empty()) return {};
  auto largest = [&](auto field) {
    std::size_t best = 0;
    for (const auto& p : points) best = std::max(best, field(p));
    return best;
  };
  auto smallest = [&](auto field) {
    std::size_t best = SIZE_MAX;
    for (const auto& p : points) best = std::min(best, field(p));
    return best;
  };
  const std::size_t v_fix = largest([](const BenchPoint& p) { return p.V; });
  const std::size_t l_fix = largest([](const BenchPoint& p) { return p.Lp; });
  const std::size_t q_fix = smallest([](const BenchPoint& p) { return p.Lq; });
  char buf[2048];
  std::snprintf(buf, sizeof buf,
                "# gnuplot %s\n"
                "set datafile separator ','\n"
                "set terminal pngcairo size 1500,450\n"
                "set output 'bench.png'\n"
                "set key top left\n"
                "set ylabel 'median time (ms)'\n"
                "set multiplot layout 1,3\n"
                "set title 'channels (L''=%zu, Lq=%zu)'\nset xlabel 'V'\n"
                "plot '%s' every ::1 using ($2==%zu && $3==%zu ? $1 : 1/0):6 with linespoints title 'ITA', \\\n"
                "     '' every ::1 using ($2==%zu && $3==%zu ? $1 : 1/0):7 with linespoints title 'cross-attention'\n"
                "set title 'time steps (V=%zu, Lq=%zu)'\nset xlabel 'L'''\n"
                "plot '%s' every ::1 using ($1==%zu && $3==%zu ? $2 : 1/0):6 with linespoints title 'ITA', \\\n"
                "     '' every ::1 using ($1==%zu && $3==%zu ? $2 : 1/0):7 with linespoints title 'cross-attention'\n"
                "set title 'question length (V=%zu, L''=%zu)'\nset xlabel 'Lq'\nset logscale x 2\n"
                "plot '%s' every ::1 using ($1==%zu && $2==%zu ? $3 : 1/0):6 with linespoints title 'ITA', \\\n"
                "     '' every ::1 using ($1==%zu && $2==%zu ? $3 : 1/0):7 with linespoints title 'cross-attention'\n"
                "unset multiplot\n",
                csv_name.c_str(), l_fix, q_fix, csv_name.c_str(), l_fix, q_fix, l_fix, q_fix, v_fix, q_fix,
                csv_name.c_str(), v_fix, q_fix, v_fix, q_fix, v_fix, l_fix, csv_name.c_str(), v_fix, l_fix, v_fix,
                l_fix);
  return buf;
}

BenchConfig bench_grid(const std::string& name, const BenchConfig& base) {
  BenchConfig c = base;
  if (name == "small") {
    c.channels = {4, 16, 64};
    c.steps = {10, 50, 200};
    c.question_lengths = {16, 256};
  } else if (name != "default") {
    throw ConfigError("grid", "unknown grid \"" + name + "\" (expected small or default)");
  }
  return c;
}

}  // namespace itf
