// Command-line driver: gen-data, train, eval, bench, inspect.
//
// Exit codes: 0 success, 2 I/O failure, 3 configuration or shape error, 4 internal invariant.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "itformer/bench.hpp"
#include "itformer/checkpoint.hpp"
#include "itformer/config.hpp"
#include "itformer/errors.hpp"
#include "itformer/trainer.hpp"

namespace fs = std::filesystem;
using namespace itf;

namespace {

struct ConfigFlags {
  std::string path;
  std::vector<std::string> settings;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "configuration file ([data] [model] [train] [eval] [bench])");
    cmd->add_option("--set", settings, "override one entry, e.g. --set train.lr=0.001");
  }

  RunConfig resolve(const std::string& fallback = {}) const {
    RunConfig c;
    const std::string file = path.empty() ? fallback : path;
    if (!file.empty()) {
      if (!fs::exists(file)) throw IoError(file + ": configuration file not found");
      c = load_config(file);
    }
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(s, "expected section.key=value");
      apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
    }
    c.validate();
    return c;
  }
};

void log_config(const RunConfig& c) { std::cerr << "# resolved configuration\n" << render_config(c) << "\n"; }

void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw IoError(p.string() + ": not found");
}

int gen_data(const ConfigFlags& flags, const std::string& out_dir, std::uint64_t seed) {
  const RunConfig c = flags.resolve();
  log_config(c);
  const auto summary = write_dataset(out_dir, c.data, seed);
  std::ofstream(fs::path(out_dir) / kConfigFile) << render_config(c);
  std::printf("wrote %zu records (%zu train, %zu test) and %zu series files to %s\n", summary.records,
              summary.train_records, summary.test_records, summary.series_files, out_dir.c_str());
  std::printf("largest closed-task label share deviation between splits: %.4f\n", summary.max_class_deviation);
  return 0;
}

int train_cmd(const ConfigFlags& flags, const std::string& data, const std::string& out, std::uint64_t seed) {
  require_file(fs::path(data) / "train.jsonl");
  require_file(fs::path(data) / "vocab.txt");
  const RunConfig c = flags.resolve();
  log_config(c);
  const auto result = train(c, data, out, seed, &std::cerr);
  std::printf("trainable parameters: %zu (analytic %zu)\nfrozen parameters:    %zu\ntrainable ratio:      %.6f%%\n",
              result.budget.trainable, result.analytic_trainable, result.budget.frozen, 100.0 * result.budget.ratio);
  if (!result.steps.empty())
    std::printf("steps: %zu, final loss: %.12f\n", result.steps.size(), result.steps.back().loss);
  std::printf("checkpoint: %s\n", result.checkpoint.string().c_str());
  return 0;
}

int eval_cmd(const ConfigFlags& flags, const std::string& checkpoint, const std::string& data,
             const std::string& split_name, const std::string& json_out) {
  require_file(checkpoint);
  const fs::path manifest = fs::path(data) / (split_name + ".jsonl");
  require_file(manifest);
  const fs::path sibling = fs::path(checkpoint).parent_path() / kConfigFile;
  const RunConfig c = flags.resolve(fs::exists(sibling) ? sibling.string() : std::string());
  log_config(c);
  const Vocabulary vocab = Vocabulary::load(fs::path(data) / "vocab.txt");
  Model model(c.model, vocab.size(), 0);
  load_checkpoint(checkpoint, model.params());
  EncodedCache cache(model, data);
  const auto report = evaluate(model, cache, read_manifest(manifest), vocab, c.eval, c.data.window);
  std::printf("%s\n%s\n", report.table().c_str(), report.to_json().c_str());
  if (!json_out.empty()) {
    std::ofstream out(json_out);
    if (!(out << report.to_json() << "\n")) throw IoError(json_out + ": cannot write report");
  }
  return 0;
}

int bench_cmd(const ConfigFlags& flags, const std::string& grid, const std::string& out, std::uint64_t seed) {
  const RunConfig c = flags.resolve();
  const BenchConfig b = bench_grid(grid, c.bench);
  const auto points = run_grid(b, seed, &std::cerr);
  const fs::path csv(out);
  {
    std::ofstream f(csv);
    if (!(f << bench_csv(points))) throw IoError(csv.string() + ": cannot write");
  }
  const fs::path plot = csv.parent_path() / (csv.stem().string() + ".gp");
  {
    std::ofstream f(plot);
    if (!(f << bench_plot_script(points, csv.filename().string()))) throw IoError(plot.string() + ": cannot write");
  }
  std::printf("%zu grid points written to %s (plot script %s)\n", points.size(), csv.string().c_str(),
              plot.string().c_str());
  return 0;
}

void print_budget(std::size_t trainable, std::size_t frozen) {
  const double ratio = trainable + frozen ? static_cast<double>(trainable) / static_cast<double>(trainable + frozen) : 0.0;
  std::printf("trainable: %zu\nfrozen:    %zu\nratio:     %.6f%%\n", trainable, frozen, 100.0 * ratio);
}

int inspect_cmd(const ConfigFlags& flags, const std::string& checkpoint, const std::string& data,
                std::size_t vocab_size) {
  std::map<std::string, std::size_t> per_module;
  std::size_t trainable = 0, frozen = 0;
  auto visit = [&](const std::string& name, const Array& value, bool is_trainable) {
    std::printf("  %-40s %-14s %s\n", name.c_str(), to_string(value.shape()).c_str(), is_trainable ? "trainable" : "frozen");
    per_module[name.substr(0, name.find('.'))] += value.size();
    (is_trainable ? trainable : frozen) += value.size();
  };

  std::optional<RunConfig> config;
  if (!checkpoint.empty()) {
    require_file(checkpoint);
    for (const auto& p : read_checkpoint(checkpoint)) visit(p.name, p.value, is_alignment_parameter(p.name));
    const fs::path sibling = fs::path(checkpoint).parent_path() / kConfigFile;
    if (!flags.path.empty() || fs::exists(sibling)) config = flags.resolve(sibling.string());
  } else {
    config = flags.resolve();
    if (!data.empty()) {
      require_file(fs::path(data) / "vocab.txt");
      vocab_size = Vocabulary::load(fs::path(data) / "vocab.txt").size();
    }
    const Model model(config->model, vocab_size, 0);
    for (const auto& p : model.params().all()) visit(p.name, p.value, p.trainable);
  }
  for (const auto& [module, count] : per_module) std::printf("module %-6s %zu parameters\n", module.c_str(), count);
  print_budget(trainable, frozen);
  if (config) {
    const std::size_t analytic = config->model.itformer().parameter_count();
    std::printf("analytic alignment parameters: layers*(n*d + 12*d^2 + 4*d) + V*d = %zu (%s)\n", analytic,
                analytic == trainable ? "matches" : "MISMATCH");
    if (analytic != trainable) return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal-textual question answering with a frozen encoder and language model"};
  app.require_subcommand(1);

  ConfigFlags gen_flags, train_flags, eval_flags, bench_flags, inspect_flags;
  std::string out_dir, data_dir, out, checkpoint, grid = "small", split_name = "test", json_out, bench_out = "bench.csv";
  std::uint64_t seed = 0, bench_seed = 1;
  std::size_t vocab_size = 400;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  gen_flags.attach(gen);
  gen->add_option("--out-dir", out_dir, "output directory")->required();
  gen->add_option("--seed", seed, "generator seed (mandatory)")->required();

  auto* tr = app.add_subcommand("train", "fine-tune the alignment module");
  train_flags.attach(tr);
  tr->add_option("--data", data_dir, "dataset directory written by gen-data")->required();
  tr->add_option("--out", out, "output directory for checkpoint and log")->required();
  tr->add_option("--seed", seed, "initialization and shuffling seed (mandatory)")->required();

  auto* ev = app.add_subcommand("eval", "decode and score a dataset split");
  eval_flags.attach(ev);
  ev->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required();
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--split", split_name, "train or test")->check(CLI::IsMember({"train", "test"}));
  ev->add_option("--json", json_out, "also write the report JSON here");

  auto* be = app.add_subcommand("bench", "time ITA against flattened cross-attention");
  bench_flags.attach(be);
  be->add_option("--grid", grid, "small or default")->check(CLI::IsMember({"small", "default"}));
  be->add_option("--out", bench_out, "CSV output path");
  be->add_option("--seed", bench_seed, "input seed");

  auto* in = app.add_subcommand("inspect", "print parameter budget and shapes");
  inspect_flags.attach(in);
  in->add_option("--checkpoint", checkpoint, "checkpoint to inspect");
  in->add_option("--data", data_dir, "dataset directory (vocabulary size when building from --config)");
  in->add_option("--vocab-size", vocab_size, "vocabulary size when building from --config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;
  }

  try {
    if (*gen) return gen_data(gen_flags, out_dir, seed);
    if (*tr) return train_cmd(train_flags, data_dir, out, seed);
    if (*ev) return eval_cmd(eval_flags, checkpoint, data_dir, split_name, json_out);
    if (*be) return bench_cmd(bench_flags, grid, bench_out, bench_seed);
    if (*in) return inspect_cmd(inspect_flags, checkpoint, data_dir, vocab_size);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error [" << e.key() << "]: " << e.what() << "\n";
    return 3;
  } catch (const DimensionError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 3;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
