#include <doctest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "itformer/dataset.hpp"
#include "itformer/errors.hpp"
#include "itformer/series_io.hpp"
#include "support.hpp"

using namespace itf;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

SignalSpec flat_spec() {
  SignalSpec s;
  s.channels = 4;
  s.length = 50;
  s.base = {0.5, -1.0, 2.0, 0.0};
  s.trends.assign(4, Trend::Stable);
  s.noise = 0.0;
  return s;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("stable trend without noise or faults is constant") {
  const auto seg = generate_segment(flat_spec(), 3);
  for (std::size_t t = 0; t < 50; ++t)
    for (std::size_t v = 0; v < 4; ++v) CHECK(seg.values.at(t, v) == flat_spec().base[v]);
}

TEST_CASE("zero severity reproduces the fault-free signal") {
  SignalSpec healthy = flat_spec();
  healthy.noise = 0.2;
  healthy.trends = {Trend::RapidIncrease, Trend::Decrease, Trend::ModerateIncrease, Trend::Stable};
  SignalSpec faulty = healthy;
  faulty.faults = {Component::Fan};
  faulty.severity = 0.0;
  CHECK(generate_segment(healthy, 9).values.identical(generate_segment(faulty, 9).values));
  faulty.severity = 0.5;
  CHECK_FALSE(generate_segment(healthy, 9).values.identical(generate_segment(faulty, 9).values));
}

TEST_CASE("trend slope shows in the signal") {
  SignalSpec s = flat_spec();
  s.trends = {Trend::RapidIncrease, Trend::ModerateIncrease, Trend::Stable, Trend::Decrease};
  const auto seg = generate_segment(s, 1);
  for (std::size_t v = 0; v < 4; ++v)
    CHECK(seg.values.at(49, v) - seg.values.at(0, v) == doctest::Approx(trend_slope(s.trends[v])));
}

TEST_CASE("severity grades") {
  const std::array<double, 4> b{0.2, 0.4, 0.6, 0.8};
  CHECK(severity_grade(0.0, b) == 0);
  CHECK(severity_grade(0.19, b) == 0);
  CHECK(severity_grade(0.2, b) == 1);
  CHECK(severity_grade(0.5, b) == 2);
  CHECK(severity_grade(0.79, b) == 3);
  CHECK(severity_grade(0.95, b) == 4);   // letter e
}

TEST_CASE("channel layout") {
  CHECK(channel_name(2) == "fan speed");
  CHECK(component_channels(Component::HPC, 32) == std::vector<std::size_t>{8, 9, 10, 11});
  CHECK(component_channels(Component::LPT, 18) == std::vector<std::size_t>{16, 17});
  CHECK(channel_component(5) == Component::LPC);
  CHECK_FALSE(channel_component(25).has_value());
  CHECK(parse_task("reasoning") == Task::Reasoning);
  CHECK_THROWS_AS(parse_task("guessing"), IoError);
}

TEST_CASE("default configuration produces 2000 records over four tasks") {
  const DatasetConfig c;
  CHECK(c.channels == 32);
  CHECK(c.length == 600);
  const auto engines = generate_engines(c, 7);
  const auto records = generate_qa(c, engines, 7);
  CHECK(records.size() == 2000);
  std::map<Task, std::size_t> per_task;
  for (const auto& r : records) {
    per_task[r.task] += 1;
    CHECK(r.series.size() == series_per_record(r.task, c.window));
  }
  for (Task t : kTasks) CHECK(per_task[t] == 500);

  // Fault-free engines always answer "a" to perception questions.
  std::map<std::size_t, const EngineHistory*> by_id;
  for (const auto& e : engines) by_id[e.id] = &e;
  std::size_t healthy = 0;
  for (const auto& r : records)
    if (r.task == Task::Perception && by_id.at(engine_of(r.series[0]))->faults.empty()) {
      CHECK(r.answer == "a");
      ++healthy;
    }
  CHECK(healthy > 0);

  std::set<std::string> grades;
  for (const auto& r : records)
    if (r.task == Task::Reasoning) grades.insert(r.answer);
  CHECK(grades.size() >= 4);
}

TEST_CASE("engine-disjoint split with balanced labels") {
  const DatasetConfig c;
  const auto records = generate_qa(c, generate_engines(c, 7), 7);
  const auto s = split(records, 0.8, 7);
  CHECK(s.train.size() + s.test.size() == records.size());
  std::set<std::size_t> train_ids(s.train_engines.begin(), s.train_engines.end());
  for (auto e : s.test_engines) CHECK(train_ids.count(e) == 0);
  for (const auto& r : s.test)
    for (const auto& p : r.series) CHECK(train_ids.count(engine_of(p)) == 0);
  CHECK(s.max_class_deviation <= 0.05);

  // Recount the label shares independently.
  auto shares = [](const std::vector<QARecord>& rs) {
    std::map<std::pair<Task, std::string>, double> count;
    std::map<Task, double> total;
    for (const auto& r : rs)
      if (is_closed(r.task)) {
        count[{r.task, r.answer}] += 1.0;
        total[r.task] += 1.0;
      }
    for (auto& [k, v] : count) v /= total[k.first];
    return count;
  };
  const auto global = shares(records), train = shares(s.train), test = shares(s.test);
  double worst = 0.0;
  for (const auto& [k, g] : global) {
    worst = std::max(worst, std::abs((train.count(k) ? train.at(k) : 0.0) - g));
    worst = std::max(worst, std::abs((test.count(k) ? test.at(k) : 0.0) - g));
  }
  CHECK(worst <= 0.05);
  CHECK(worst == doctest::Approx(s.max_class_deviation));
}

TEST_CASE("ten engines split eight to two") {
  RunConfig rc = support::tiny_config();
  const auto engines = generate_engines(rc.data, 3);
  const auto s = split(generate_qa(rc.data, engines, 3), 0.8, 3);
  CHECK(s.train_engines.size() == 8);
  CHECK(s.test_engines.size() == 2);
}

TEST_CASE("json lines round trip") {
  const auto records = generate_qa(support::tiny_config().data, generate_engines(support::tiny_config().data, 4), 4);
  for (const auto& r : records) {
    const QARecord back = parse_json_line(to_json_line(r));
    CHECK(back.id == r.id);
    CHECK(back.series == r.series);
    CHECK(back.task == r.task);
    CHECK(back.question == r.question);
    CHECK(back.answer == r.answer);
    REQUIRE(back.choices.size() == r.choices.size());
    for (std::size_t i = 0; i < r.choices.size(); ++i) CHECK(back.choices[i].text == r.choices[i].text);
  }
  CHECK_THROWS_AS(parse_json_line("{\"id\": 3}"), IoError);
  CHECK_THROWS_AS(parse_json_line("not json"), IoError);
}

TEST_CASE("written dataset is deterministic and regenerates from its engine file") {
  const RunConfig rc = support::tiny_config();
  const auto a = support::scratch_dir("data_a"), b = support::scratch_dir("data_b");
  const auto summary = write_dataset(a, rc.data, 11);
  write_dataset(b, rc.data, 11);
  CHECK(summary.records == 160);
  CHECK(summary.series_files == rc.data.engines * rc.data.cycles);
  for (const char* f : {"manifest.jsonl", "train.jsonl", "test.jsonl", "engines.json", "vocab.txt"})
    CHECK(slurp(a / f) == slurp(b / f));
  CHECK(slurp(a / series_path(3, 2)) == slurp(b / series_path(3, 2)));

  const auto engines = read_engines(a / "engines.json");
  REQUIRE(engines.size() == rc.data.engines);
  for (const auto& e : engines)
    for (std::size_t c = 0; c < rc.data.cycles; c += 2) {
      const Array stored = read_series(a / series_path(e.id, c));
      const Array fresh = generate_segment(e.cycles[c], e.seeds[c]).values;
      REQUIRE(stored.shape() == fresh.shape());
      bool same = true;
      for (std::size_t i = 0; i < fresh.size(); ++i)
        same = same && stored[i] == static_cast<double>(static_cast<float>(fresh[i]));
      CHECK(same);
    }
  const auto vocab = Vocabulary::load(a / "vocab.txt");
  for (const auto& r : read_manifest(a / "manifest.jsonl"))
    for (int id : vocab.encode(r.question + " " + r.answer)) CHECK(id != Vocabulary::kUnk);

  CHECK_THROWS_AS(read_series(a / "missing.itts"), IoError);
  CHECK_THROWS_AS(engine_of("series/cycle_001.itts"), IoError);
}

}  // TEST_SUITE
