#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "itformer/config.hpp"
#include "itformer/core.hpp"

namespace itf {

/// Flattens L′×V×d tokens to (L′·V)×d and lets the instruct queries attend to all of them.
Var cross_attention_baseline(Graph& g, const nn::MultiHeadAttention& attention, Var refined, Var tokens,
                             nn::FlopCounter* counter = nullptr);

struct BenchPoint {
  std::size_t V = 0, Lp = 0, Lq = 0, n = 0, d = 0;
  double ita_ms = 0.0;
  double cross_ms = 0.0;
  std::uint64_t ita_flops = 0;     // score multiply-adds counted while running
  std::uint64_t cross_flops = 0;
  std::size_t repetitions = 0;
  std::size_t warmup = 0;

  double speedup() const { return ita_ms > 0.0 ? cross_ms / ita_ms : 0.0; }
  /// (V·L′)/(V+L′): baseline over ITA score cost.
  double analytic_ratio() const;
};

/// Weights shared by both paths at one width.
struct BenchModules {
  ParameterSet params;
  ItFormerLayer layer;
  nn::MultiHeadAttention cross;

  BenchModules(std::size_t n, std::size_t d, std::size_t heads, std::size_t channels, std::uint64_t seed);
};

/// Score multiply-adds of one forward of each path (no timing).
std::pair<std::uint64_t, std::uint64_t> count_score_macs(const BenchModules& modules, std::size_t V, std::size_t Lp,
                                                         std::size_t Lq);

/// Times both paths at every (V, L′, L_q) of the grid, single-threaded, median over
/// `repetitions` runs after `warmup` discarded runs. Both paths start from the same
/// question and instruct tokens and include the refinement step.
std::vector<BenchPoint> run_grid(const BenchConfig& config, std::uint64_t seed, std::ostream* progress = nullptr);

std::string bench_csv(const std::vector<BenchPoint>& points);
/// Gnuplot script drawing time against V, against L′ and against L_q from `csv_name`.
std::string bench_plot_script(const std::vector<BenchPoint>& points, const std::string& csv_name);

/// Named grids accepted by the CLI: "small" and "default".
BenchConfig bench_grid(const std::string& name, const BenchConfig& base);

}  // namespace itf
