#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "itformer/encoder.hpp"
#include "itformer/vocab.hpp"

namespace itf {

enum class Task { Understanding, Perception, Reasoning, Decision };
enum class Trend { RapidIncrease, ModerateIncrease, Stable, Decrease };
enum class Component { Fan, LPC, HPC, HPT, LPT };

inline constexpr std::array<Task, 4> kTasks{Task::Understanding, Task::Perception, Task::Reasoning, Task::Decision};
inline constexpr std::array<Component, 5> kComponents{Component::Fan, Component::LPC, Component::HPC, Component::HPT,
                                                      Component::LPT};

std::string_view task_name(Task task);
Task parse_task(std::string_view name);
bool is_closed(Task task);
/// Series files a record of this task refers to (1 or the reasoning window).
std::size_t series_per_record(Task task, std::size_t window);

std::string_view trend_name(Trend trend);
Trend parse_trend(std::string_view name);
double trend_slope(Trend trend);
std::string_view component_name(Component c);
Component parse_component(std::string_view name);

/// Sensor name of channel v. The first 20 channels belong to the five components
/// (four each, in kComponents order); the rest are operating conditions.
std::string channel_name(std::size_t v);
/// Channels whose signal carries the component's fault signature (clipped to `channels`).
std::vector<std::size_t> component_channels(Component c, std::size_t channels);
/// Component owning channel v, if any.
std::optional<Component> channel_component(std::size_t v);

/// Everything needed to regenerate one cycle of one engine.
struct SignalSpec {
  std::size_t channels = 32;
  std::size_t length = 600;
  std::vector<double> base;    // per channel
  std::vector<Trend> trends;   // per channel
  double noise = 0.1;
  std::vector<Component> faults;
  double severity = 0.0;
  std::size_t cycle = 0;
};

/// channel v at step t = base + slope·(t/(L−1) − ½) + 3s·[v faulty] + noise·(1 + 2s·[v faulty])·ε.
/// ε is drawn for every cell whether or not a fault is present, so s = 0 reproduces the
/// fault-free signal bit for bit.
TimeSeriesSegment generate_segment(const SignalSpec& spec, std::uint64_t seed);

struct DatasetConfig {
  std::size_t engines = 40;
  std::size_t cycles = 20;
  std::size_t window = 10;          // cycles per reasoning/decision record
  std::size_t channels = 32;
  std::size_t length = 600;
  double noise = 0.1;
  double fault_probability = 0.75;
  std::array<std::size_t, 4> counts{500, 500, 500, 500};  // per task, kTasks order
  std::array<double, 4> grade_bounds{0.2, 0.4, 0.6, 0.8};
  double train_fraction = 0.8;
};

/// Reasoning grade 0..4 (letters a..e) of a mean severity.
std::size_t severity_grade(double severity, const std::array<double, 4>& bounds);

struct Choice {
  std::string label;
  std::string text;
};

struct QARecord {
  std::string id;
  std::vector<std::string> series;   // paths relative to the dataset directory
  Task task = Task::Understanding;
  std::string question;
  std::string answer;
  std::vector<Choice> choices;
};

struct EngineHistory {
  std::size_t id = 0;
  std::vector<Component> faults;
  std::vector<SignalSpec> cycles;
  std::vector<std::uint64_t> seeds;
};

/// Engine histories for the configured fleet, deterministic in `seed`.
std::vector<EngineHistory> generate_engines(const DatasetConfig& config, std::uint64_t seed);
/// QA records over the given engines, deterministic in `seed`.
std::vector<QARecord> generate_qa(const DatasetConfig& config, const std::vector<EngineHistory>& engines,
                                  std::uint64_t seed);
/// Relative path of the series file for (engine, cycle).
std::string series_path(std::size_t engine, std::size_t cycle);
/// Engine id encoded in a series path; throws when the path does not name one.
std::size_t engine_of(const std::string& path);

struct Split {
  std::vector<QARecord> train, test;
  std::vector<std::size_t> train_engines, test_engines;
  double max_class_deviation = 0.0;   // worst |share in split − global share| over closed-task letters
};

/// Engine-disjoint split. Tries a bounded, seeded sequence of engine shuffles and keeps
/// the one whose closed-task label shares deviate least from the global shares.
Split split(const std::vector<QARecord>& records, double train_fraction, std::uint64_t seed);

/// Every word of the generator's closed world plus the given records.
Vocabulary build_vocabulary(const std::vector<QARecord>& records);

// Persistence.
std::string to_json_line(const QARecord& record);
QARecord parse_json_line(const std::string& line);
void write_manifest(const std::filesystem::path& path, const std::vector<QARecord>& records);
std::vector<QARecord> read_manifest(const std::filesystem::path& path);
void write_engines(const std::filesystem::path& path, const std::vector<EngineHistory>& engines);
std::vector<EngineHistory> read_engines(const std::filesystem::path& path);

struct DatasetSummary {
  std::size_t records = 0;
  std::size_t series_files = 0;
  std::size_t train_records = 0;
  std::size_t test_records = 0;
  double max_class_deviation = 0.0;
};

/// Writes series/, manifest.jsonl, train.jsonl, test.jsonl, vocab.txt and engines.json under `dir`.
DatasetSummary write_dataset(const std::filesystem::path& dir, const DatasetConfig& config, std::uint64_t seed);

}  // namespace itf
