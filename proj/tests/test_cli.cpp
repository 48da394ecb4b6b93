#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "itformer/config.hpp"
#include "itformer/trainer.hpp"
#include "support.hpp"

using namespace itf;
using support::run_quiet;

namespace {

const std::string kCli = ITFORMER_CLI;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path tiny_config_file(const std::filesystem::path& dir) {
  const auto path = dir / "tiny.ini";
  std::ofstream(path) << render_config(support::tiny_config());
  return path;
}

std::string capture(const std::string& command) {
  std::string out;
  if (FILE* p = popen((command + " 2>&1").c_str(), "r")) {
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    pclose(p);
  }
  return out;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("exit codes") {
  const auto dir = support::scratch_dir("cli_codes");
  const auto cfg = tiny_config_file(dir);
  CHECK(run_quiet(kCli + " gen-data --out-dir " + (dir / "d").string()) == 3);
  CHECK(capture(kCli + " gen-data --out-dir " + (dir / "d").string()).find("--seed") != std::string::npos);
  CHECK(run_quiet(kCli + " gen-data --config " + cfg.string() + " --set train.colour=3 --seed 1 --out-dir " +
                  (dir / "d").string()) == 3);
  CHECK(run_quiet(kCli + " gen-data --config " + cfg.string() + " --set model.channels=7 --seed 1 --out-dir " +
                  (dir / "d").string()) == 3);
  CHECK(run_quiet(kCli + " gen-data --config " + (dir / "missing.ini").string() + " --seed 1 --out-dir " +
                  (dir / "d").string()) == 2);
  CHECK(run_quiet(kCli + " train --data " + (dir / "nowhere").string() + " --out " + (dir / "o").string() +
                  " --seed 1") == 2);
  CHECK(run_quiet(kCli + " frobnicate") == 3);
  CHECK(run_quiet(kCli + " inspect --config " + cfg.string()) == 0);
  CHECK(capture(kCli + " inspect --config " + cfg.string()).find("matches") != std::string::npos);
}

TEST_CASE("generation is reproducible from config and seed") {
  const auto dir = support::scratch_dir("cli_gen");
  const auto cfg = tiny_config_file(dir);
  for (const char* name : {"a", "b"})
    REQUIRE(run_quiet(kCli + " gen-data --config " + cfg.string() + " --seed 3 --out-dir " + (dir / name).string()) ==
            0);
  CHECK(slurp(dir / "a" / "manifest.jsonl") == slurp(dir / "b" / "manifest.jsonl"));
  CHECK(slurp(dir / "a" / "train.jsonl") == slurp(dir / "b" / "train.jsonl"));
  REQUIRE(run_quiet(kCli + " gen-data --config " + cfg.string() + " --seed 4 --out-dir " + (dir / "c").string()) == 0);
  CHECK(slurp(dir / "a" / "manifest.jsonl") != slurp(dir / "c" / "manifest.jsonl"));
}

TEST_CASE("train, eval and inspect a checkpoint") {
  const auto dir = support::scratch_dir("cli_train");
  const auto cfg = tiny_config_file(dir);
  const std::string data = (dir / "data").string(), out = (dir / "run").string();
  REQUIRE(run_quiet(kCli + " gen-data --config " + cfg.string() + " --seed 5 --out-dir " + data) == 0);
  REQUIRE(run_quiet(kCli + " train --config " + cfg.string() + " --set train.max_steps=3 --data " + data +
                    " --out " + out + " --seed 2") == 0);
  for (const char* f : {kCheckpointFile, kLogFile, kConfigFile}) CHECK(std::filesystem::exists(dir / "run" / f));
  const std::string report = (dir / "report.json").string();
  REQUIRE(run_quiet(kCli + " eval --checkpoint " + out + "/model.ckpt --data " + data + " --json " + report) == 0);
  CHECK(slurp(report).find("\"reasoning\"") != std::string::npos);
  const std::string table = capture(kCli + " eval --checkpoint " + out + "/model.ckpt --data " + data);
  CHECK(table.find("Rouge-L") != std::string::npos);
  CHECK(capture(kCli + " inspect --checkpoint " + out + "/model.ckpt").find("matches") != std::string::npos);
  CHECK(run_quiet(kCli + " eval --checkpoint " + out + "/model.ckpt --data " + data + " --split valid") == 3);
}

TEST_CASE("an untrained alignment module answers closed questions at chance") {
  const auto dir = support::scratch_dir("cli_chance");
  std::ofstream(dir / "c.ini") << "[data]\nengines = 40\ncycles = 6\nwindow = 3\nchannels = 8\nlength = 120\n"
                                  "understanding = 10\nperception = 250\nreasoning = 250\ndecision = 10\n"
                                  "[model]\nchannels = 8\n[train]\nepochs = 0\n";
  const std::string cfg = (dir / "c.ini").string(), data = (dir / "d").string(), out = (dir / "r").string();
  REQUIRE(run_quiet(kCli + " gen-data --config " + cfg + " --seed 3 --out-dir " + data) == 0);
  REQUIRE(run_quiet(kCli + " train --config " + cfg + " --data " + data + " --out " + out + " --seed 1") == 0);
  const std::string report = (dir / "report.json").string();
  REQUIRE(run_quiet(kCli + " eval --checkpoint " + out + "/model.ckpt --data " + data + " --split train --json " +
                    report) == 0);
  const auto j = nlohmann::json::parse(slurp(report));
  CHECK(j.at("perception").at("records").get<int>() >= 200);
  CHECK(std::abs(j.at("perception").at("accuracy").get<double>() - 50.0) <= 10.0);
  CHECK(j.at("reasoning").at("records").get<int>() >= 150);
  CHECK(std::abs(j.at("reasoning").at("accuracy").get<double>() - 20.0) <= 10.0);
}

TEST_CASE("bench small grid writes one row per point") {
  const auto dir = support::scratch_dir("cli_bench");
  const std::string csv = (dir / "bench.csv").string();
  REQUIRE(run_quiet(kCli + " bench --grid small --out " + csv) == 0);
  const std::string text = slurp(csv);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 3 * 3 * 2);
  CHECK(std::filesystem::exists(dir / "bench.gp"));
}

}  // TEST_SUITE
