#include "itformer/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>

#include "binary_io.hpp"
#include "json.hpp"
#include "itformer/errors.hpp"
#include "itformer/series_io.hpp"

namespace itf {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 4> kTaskNames{"understanding", "perception", "reasoning", "decision"};
constexpr std::array<std::string_view, 4> kTrendNames{"rapid-increase", "moderate-increase", "stable", "decrease"};
constexpr std::array<std::string_view, 5> kComponentNames{"fan", "lpc", "hpc", "hpt", "lpt"};
constexpr std::array<std::string_view, 4> kComponentSensors{"outlet temperature", "outlet pressure", "flow",
                                                            "efficiency"};
constexpr std::array<std::string_view, 12> kOperatingSensors{
    "altitude",        "mach number",     "throttle resolver angle", "fan inlet temperature",
    "fuel flow",       "bypass ratio",    "bleed enthalpy",          "fan inlet pressure",
    "core speed",      "demanded fan speed", "burner fuel air ratio", "bypass duct pressure"};
constexpr std::array<std::string_view, 5> kGradeNames{"good condition", "moderate condition", "poor condition",
                                                      "very poor condition", "extremely poor condition"};
constexpr std::size_t kComponentChannelCount = 4;

template <std::size_t N>
std::size_t lookup(const std::array<std::string_view, N>& names, std::string_view name, const char* what) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == name) return i;
  throw IoError(std::string("unknown ") + what + " \"" + std::string(name) + "\"");
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[rng.below(items.size())];
}

std::string fill(std::string text, std::string_view key, std::string_view value) {
  for (std::size_t pos; (pos = text.find(key)) != std::string::npos;) text.replace(pos, key.size(), value);
  return text;
}

// Phrase for a trend inside an answer sentence.
std::string_view trend_phrase(Trend t) {
  switch (t) {
    case Trend::RapidIncrease: return "rapid increase";
    case Trend::ModerateIncrease: return "moderate increase";
    case Trend::Stable: return "stable level";
    case Trend::Decrease: return "gradual decrease";
  }
  return "";
}

std::string component_list(const std::vector<Component>& faults) {
  std::string out;
  for (std::size_t i = 0; i < faults.size(); ++i) {
    if (i > 0) out += " and ";
    out += "the " + std::string(component_name(faults[i]));
  }
  return out;
}

const std::vector<std::string> kUnderstandingQuestions{
    "what is the trend of the {ch} signal in this cycle ?",
    "describe how the {ch} changes during this cycle .",
    "how does the {ch} evolve over the cycle ?",
    "summarize the behavior of the {ch} in this cycle .",
};
const std::vector<std::string> kUnderstandingAnswers{
    "the {ch} shows a {trend} over the cycle , {clause} .",
    "over this cycle the {ch} exhibits a {trend} , {clause} .",
    "a {trend} is observed in the {ch} , {clause} .",
    "the {ch} follows a {trend} pattern , {clause} .",
};
const std::vector<std::string> kFaultClauses{
    "with readings consistent with {comp} degradation",
    "and the offset points to {comp} degradation",
    "with added scatter that suggests {comp} wear",
    "which indicates the {comp} is degrading",
};
const std::vector<std::string> kNormalClauses{
    "with readings within the normal range",
    "and no abnormal offset is present",
    "with scatter at the expected level",
    "which indicates normal operation",
};
const std::vector<std::string> kPerceptionEngine{
    "based on this cycle , is the engine in a health or fault state ?",
    "does this cycle show the engine as healthy or faulty ?",
    "judge the state of the engine from this cycle .",
    "is there a fault in the engine during this cycle ?",
};
const std::vector<std::string> kPerceptionComponent{
    "based on this cycle , is the {comp} in a health or fault state ?",
    "does this cycle show the {comp} as healthy or faulty ?",
    "judge the state of the {comp} from this cycle .",
    "is there a fault in the {comp} during this cycle ?",
};
const std::vector<std::string> kReasoningQuestions{
    "given these 10 consecutive cycles , what is the condition grade of the engine ?",
    "rate the overall condition of the engine over these cycles .",
    "from the 10 cycles shown , how degraded is the engine ?",
    "which condition grade fits the engine across these cycles ?",
};
const std::vector<std::string> kDecisionQuestions{
    "given these 10 consecutive cycles , what maintenance action do you recommend ?",
    "what should the maintenance team do based on these cycles ?",
    "recommend a maintenance decision for the engine over these cycles .",
    "which action is appropriate after reviewing these 10 cycles ?",
};
// Decision answers by urgency (0 = none … 3 = immediate); {comps} names the faulty components.
const std::array<std::vector<std::string>, 4> kDecisionFaulty{{
    {"no action is needed yet ; keep monitoring {comps} .",
     "continue operation and keep monitoring {comps} .",
     "degradation of {comps} is minor ; keep monitoring .",
     "keep the engine in service and monitor {comps} ."},
    {"schedule a routine inspection of {comps} at the next planned stop .",
     "inspect {comps} at the next planned stop .",
     "plan a routine inspection of {comps} soon .",
     "add {comps} to the next routine inspection ."},
    {"plan maintenance on {comps} within the next few cycles .",
     "maintenance on {comps} should be planned within a few cycles .",
     "arrange repair of {comps} within the next few cycles .",
     "prepare maintenance of {comps} within a few cycles ."},
    {"remove the engine from service and repair {comps} immediately .",
     "ground the engine and repair {comps} immediately .",
     "stop operation now and repair {comps} .",
     "immediate repair of {comps} is required before further operation ."},
}};
const std::vector<std::string> kDecisionHealthy{
    "no maintenance is required ; continue routine monitoring .",
    "the engine is healthy ; continue normal operation .",
    "no action is needed ; keep routine monitoring .",
    "continue operation ; no maintenance is required .",
};

std::size_t urgency(std::size_t grade) { return grade >= 3 ? 3 : grade; }

double window_severity(const EngineHistory& e, std::size_t start, std::size_t window) {
  double sum = 0.0;
  for (std::size_t c = start; c < start + window; ++c) sum += e.cycles[c].severity;
  return sum / static_cast<double>(window);
}

bool component_faulty(const EngineHistory& e, std::size_t cycle, Component c) {
  return e.cycles[cycle].severity > 0.0 && std::find(e.faults.begin(), e.faults.end(), c) != e.faults.end();
}

std::vector<std::string> window_paths(std::size_t engine, std::size_t start, std::size_t window) {
  std::vector<std::string> out;
  for (std::size_t c = start; c < start + window; ++c) out.push_back(series_path(engine, c));
  return out;
}

std::vector<Choice> perception_choices() { return {{"a", "health"}, {"b", "fault"}}; }

std::vector<Choice> reasoning_choices() {
  std::vector<Choice> out;
  for (std::size_t g = 0; g < kGradeNames.size(); ++g)
    out.push_back({std::string(1, static_cast<char>('a' + g)), std::string(kGradeNames[g])});
  return out;
}

std::string record_id(Task task, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%05zu", std::string(task_name(task)).c_str(), index);
  return buf;
}

}  // namespace

std::string_view task_name(Task task) { return kTaskNames[static_cast<std::size_t>(task)]; }
Task parse_task(std::string_view name) { return static_cast<Task>(lookup(kTaskNames, name, "task")); }
bool is_closed(Task task) { return task == Task::Perception || task == Task::Reasoning; }
std::size_t series_per_record(Task task, std::size_t window) {
  return task == Task::Reasoning || task == Task::Decision ? window : 1;
}

std::string_view trend_name(Trend t) { return kTrendNames[static_cast<std::size_t>(t)]; }
Trend parse_trend(std::string_view name) { return static_cast<Trend>(lookup(kTrendNames, name, "trend")); }
double trend_slope(Trend t) {
  switch (t) {
    case Trend::RapidIncrease: return 3.0;
    case Trend::ModerateIncrease: return 1.0;
    case Trend::Stable: return 0.0;
    case Trend::Decrease: return -1.5;
  }
  return 0.0;
}
std::string_view component_name(Component c) { return kComponentNames[static_cast<std::size_t>(c)]; }
Component parse_component(std::string_view name) {
  return static_cast<Component>(lookup(kComponentNames, name, "component"));
}

std::string channel_name(std::size_t v) {
  const std::size_t component_block = kComponents.size() * kComponentChannelCount;
  if (v < component_block) {
    const auto c = kComponents[v / kComponentChannelCount];
    if (c == Component::Fan && v % kComponentChannelCount == 2) return "fan speed";
    return std::string(component_name(c)) + " " + std::string(kComponentSensors[v % kComponentChannelCount]);
  }
  if (v - component_block < kOperatingSensors.size()) return std::string(kOperatingSensors[v - component_block]);
  return "sensor " + std::to_string(v);
}

std::vector<std::size_t> component_channels(Component c, std::size_t channels) {
  std::vector<std::size_t> out;
  const std::size_t first = static_cast<std::size_t>(c) * kComponentChannelCount;
  for (std::size_t v = first; v < first + kComponentChannelCount && v < channels; ++v) out.push_back(v);
  return out;
}

std::optional<Component> channel_component(std::size_t v) {
  if (v >= kComponents.size() * kComponentChannelCount) return std::nullopt;
  return kComponents[v / kComponentChannelCount];
}

TimeSeriesSegment generate_segment(const SignalSpec& spec, std::uint64_t seed) {
  if (spec.channels == 0 || spec.length == 0) throw ConfigError("channels", "segment needs positive V and L");
  if (spec.base.size() != spec.channels || spec.trends.size() != spec.channels)
    throw DimensionError("signal spec: base/trend lists must have one entry per channel");
  std::vector<bool> faulty(spec.channels, false);
  for (auto c : spec.faults)
    for (auto v : component_channels(c, spec.channels)) faulty[v] = true;

  Rng rng(seed);
  TimeSeriesSegment seg{Array({spec.length, spec.channels}), spec.cycle};
  const double span = spec.length > 1 ? static_cast<double>(spec.length - 1) : 1.0;
  for (std::size_t t = 0; t < spec.length; ++t) {
    const double phase = static_cast<double>(t) / span - 0.5;
    for (std::size_t v = 0; v < spec.channels; ++v) {
      const double eps = rng.normal();
      const double s = faulty[v] ? spec.severity : 0.0;
      seg.values.at(t, v) = spec.base[v] + trend_slope(spec.trends[v]) * phase + 3.0 * s +
                            spec.noise * (1.0 + 2.0 * s) * eps;
    }
  }
  return seg;
}

std::size_t severity_grade(double severity, const std::array<double, 4>& bounds) {
  std::size_t g = 0;
  while (g < bounds.size() && severity >= bounds[g]) ++g;
  return g;
}

std::string series_path(std::size_t engine, std::size_t cycle) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "series/engine_%03zu/cycle_%03zu.itts", engine, cycle);
  return buf;
}

std::size_t engine_of(const std::string& path) {
  static const std::regex pattern(R"(engine_(\d+))");
  std::smatch m;
  if (!std::regex_search(path, m, pattern)) throw IoError("series path names no engine: " + path);
  return static_cast<std::size_t>(std::stoul(m[1].str()));
}

std::vector<EngineHistory> generate_engines(const DatasetConfig& config, std::uint64_t seed) {
  if (config.cycles < config.window || config.window == 0)
    throw ConfigError("cycles", "need at least `window` cycles per engine");
  std::vector<EngineHistory> engines;
  for (std::size_t e = 0; e < config.engines; ++e) {
    Rng rng(mix_seed(seed, 0x1000 + e));
    EngineHistory h;
    h.id = e;
    double s0 = 0.0, rate = 0.0;
    if (rng.bernoulli(config.fault_probability)) {
      std::vector<Component> pool(kComponents.begin(), kComponents.end());
      const std::size_t count = rng.bernoulli(0.5) ? 2 : 1;
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t i = rng.below(pool.size());
        h.faults.push_back(pool[i]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
      }
      std::sort(h.faults.begin(), h.faults.end());
      s0 = rng.uniform(0.05, 0.9);
      rate = rng.uniform(0.0, 0.03);
    }
    std::vector<double> base(config.channels);
    for (std::size_t v = 0; v < config.channels; ++v)
      base[v] = std::sin(0.9 * static_cast<double>(v) + 0.4) + 0.05 * rng.normal();
    for (std::size_t c = 0; c < config.cycles; ++c) {
      SignalSpec spec;
      spec.channels = config.channels;
      spec.length = config.length;
      spec.base = base;
      for (std::size_t v = 0; v < config.channels; ++v) spec.trends.push_back(static_cast<Trend>(rng.below(4)));
      spec.noise = config.noise;
      spec.faults = h.faults;
      spec.severity = h.faults.empty() ? 0.0 : std::min(1.0, s0 + rate * static_cast<double>(c));
      spec.cycle = c;
      h.cycles.push_back(std::move(spec));
      h.seeds.push_back(mix_seed(seed, (static_cast<std::uint64_t>(e) << 20) | c));
    }
    engines.push_back(std::move(h));
  }
  return engines;
}

std::vector<QARecord> generate_qa(const DatasetConfig& config, const std::vector<EngineHistory>& engines,
                                  std::uint64_t seed) {
  if (engines.empty()) throw ConfigError("engines", "at least one engine is required");
  Rng rng(mix_seed(seed, 0x2000));
  const std::size_t cycles = engines.front().cycles.size();
  const std::size_t window = config.window;
  const std::size_t channels = engines.front().cycles.front().channels;
  std::vector<QARecord> records;

  for (std::size_t i = 0; i < config.counts[0]; ++i) {
    const auto& e = pick(rng, engines);
    const std::size_t c = rng.below(cycles), v = rng.below(channels);
    const std::string ch = channel_name(v);
    const auto comp = channel_component(v);
    const bool faulty = comp && component_faulty(e, c, *comp);
    std::string clause = faulty ? fill(pick(rng, kFaultClauses), "{comp}", component_name(*comp))
                                : pick(rng, kNormalClauses);
    std::string answer = fill(pick(rng, kUnderstandingAnswers), "{ch}", ch);
    answer = fill(fill(answer, "{trend}", trend_phrase(e.cycles[c].trends[v])), "{clause}", clause);
    records.push_back({record_id(Task::Understanding, i), {series_path(e.id, c)}, Task::Understanding,
                       fill(pick(rng, kUnderstandingQuestions), "{ch}", ch), answer, {}});
  }

  for (std::size_t i = 0; i < config.counts[1]; ++i) {
    // Labels alternate so the two classes stay balanced; question kind is random.
    const bool want_fault = i % 2 == 1;
    std::vector<std::pair<std::size_t, std::optional<Component>>> pool;  // (engine index, component or whole)
    const bool ask_component = rng.bernoulli(0.5);
    for (int attempt = 0; attempt < 2 && pool.empty(); ++attempt) {
      const bool component_q = attempt == 0 ? ask_component : !ask_component;
      for (std::size_t k = 0; k < engines.size(); ++k) {
        const auto& e = engines[k];
        if (!component_q) {
          if (e.faults.empty() != want_fault) pool.push_back({k, std::nullopt});
        } else {
          for (auto c : kComponents) {
            const bool has = std::find(e.faults.begin(), e.faults.end(), c) != e.faults.end();
            if (has == want_fault) pool.push_back({k, c});
          }
        }
      }
    }
    if (pool.empty()) throw ConfigError("engines", "fleet cannot produce both perception labels");
    const auto [k, comp] = pick(rng, pool);
    const auto& e = engines[k];
    const std::size_t c = rng.below(cycles);
    const bool fault = comp ? component_faulty(e, c, *comp) : !e.faults.empty() && e.cycles[c].severity > 0.0;
    std::string question = comp ? fill(pick(rng, kPerceptionComponent), "{comp}", component_name(*comp))
                                : pick(rng, kPerceptionEngine);
    records.push_back({record_id(Task::Perception, i), {series_path(e.id, c)}, Task::Perception, question,
                       fault ? "b" : "a", perception_choices()});
  }

  // All (engine, window start) pairs grouped by grade.
  std::array<std::vector<std::pair<std::size_t, std::size_t>>, 5> by_grade;
  for (std::size_t k = 0; k < engines.size(); ++k)
    for (std::size_t s = 0; s + window <= cycles; ++s)
      by_grade[severity_grade(window_severity(engines[k], s, window), config.grade_bounds)].push_back({k, s});

  for (std::size_t i = 0; i < config.counts[2]; ++i) {
    std::size_t grade = i % 5;
    // Fall back to the nearest populated grade when the fleet has none of this one.
    for (std::size_t step = 1; by_grade[grade].empty() && step < 5; ++step) {
      if (grade >= step && !by_grade[grade - step].empty()) grade -= step;
      else if (grade + step < 5 && !by_grade[grade + step].empty()) grade += step;
    }
    const auto [k, s] = pick(rng, by_grade[grade]);
    records.push_back({record_id(Task::Reasoning, i), window_paths(engines[k].id, s, window), Task::Reasoning,
                       pick(rng, kReasoningQuestions), std::string(1, static_cast<char>('a' + grade)),
                       reasoning_choices()});
  }

  for (std::size_t i = 0; i < config.counts[3]; ++i) {
    const auto& e = pick(rng, engines);
    const std::size_t s = rng.below(cycles - window + 1);
    const std::size_t u = urgency(severity_grade(window_severity(e, s, window), config.grade_bounds));
    std::string answer = e.faults.empty() ? pick(rng, kDecisionHealthy)
                                          : fill(pick(rng, kDecisionFaulty[u]), "{comps}", component_list(e.faults));
    records.push_back({record_id(Task::Decision, i), window_paths(e.id, s, window), Task::Decision,
                       pick(rng, kDecisionQuestions), answer, {}});
  }
  return records;
}

Split split(const std::vector<QARecord>& records, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction", "must lie strictly between 0 and 1");
  std::set<std::size_t> ids;
  std::vector<std::size_t> engine_ids;
  for (const auto& r : records) {
    if (r.series.empty()) throw IoError("record " + r.id + " has no series");
    engine_ids.push_back(engine_of(r.series.front()));
    ids.insert(engine_ids.back());
  }
  if (ids.size() < 2) throw ConfigError("engines", "need at least two engines to split");
  const std::vector<std::size_t> engines(ids.begin(), ids.end());
  const std::size_t n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(engines.size()))), 1,
      engines.size() - 1);

  // Label counts per (task, answer) for closed tasks.
  using Counts = std::map<std::pair<Task, std::string>, double>;
  auto shares = [&](const std::vector<bool>& member, bool side) {
    Counts counts;
    std::map<Task, double> totals;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (is_closed(records[i].task) && member[i] == side) {
        counts[{records[i].task, records[i].answer}] += 1.0;
        totals[records[i].task] += 1.0;
      }
    for (auto& [key, value] : counts) value /= totals[key.first];
    return std::make_pair(counts, totals);
  };
  const auto [global, global_totals] = shares(std::vector<bool>(records.size(), true), true);

  Split best;
  best.max_class_deviation = 2.0;
  constexpr std::size_t kCandidates = 4096;
  for (std::size_t k = 0; k < kCandidates; ++k) {
    std::vector<std::size_t> order = engines;
    Rng rng(mix_seed(seed, 0x3000 + k));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::set<std::size_t> train_set(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<bool> member(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) member[i] = train_set.count(engine_ids[i]) > 0;

    double worst = 0.0;
    for (bool side : {true, false}) {
      const auto [local, totals] = shares(member, side);
      for (const auto& [key, share] : global) {
        if (!totals.count(key.first)) {
          worst = std::max(worst, 1.0);  // a closed task missing from one side entirely
          continue;
        }
        auto it = local.find(key);
        worst = std::max(worst, std::abs((it == local.end() ? 0.0 : it->second) - share));
      }
    }
    if (worst < best.max_class_deviation) {
      best = Split{};
      best.max_class_deviation = worst;
      for (std::size_t i = 0; i < records.size(); ++i) (member[i] ? best.train : best.test).push_back(records[i]);
      best.train_engines.assign(train_set.begin(), train_set.end());
      for (auto e : engines)
        if (!train_set.count(e)) best.test_engines.push_back(e);
    }
  }
  return best;
}

Vocabulary build_vocabulary(const std::vector<QARecord>& records) {
  std::set<std::string> words;
  auto add = [&](std::string_view text) {
    for (auto& w : split_words(text))
      if (std::find(Vocabulary::kReserved.begin(), Vocabulary::kReserved.end(), w) == Vocabulary::kReserved.end())
        words.insert(w);
  };
  for (std::size_t v = 0; v < 32; ++v) add(channel_name(v));
  for (auto c : kComponentNames) add(c);
  for (auto g : kGradeNames) add(g);
  for (const auto& r : records) {
    add(r.question);
    add(r.answer);
    for (const auto& c : r.choices) add(c.label + ": " + c.text);
  }
  return Vocabulary(std::vector<std::string>(words.begin(), words.end()));
}

std::string to_json_line(const QARecord& r) {
  json j;
  j["id"] = r.id;
  j["series"] = r.series;
  j["task"] = task_name(r.task);
  j["question"] = r.question;
  j["answer"] = r.answer;
  if (r.choices.empty()) {
    j["choices"] = nullptr;
  } else {
    j["choices"] = json::array();
    for (const auto& c : r.choices) j["choices"].push_back({{"label", c.label}, {"text", c.text}});
  }
  return j.dump();
}

QARecord parse_json_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    QARecord r;
    r.id = j.at("id").get<std::string>();
    r.series = j.at("series").get<std::vector<std::string>>();
    r.task = parse_task(j.at("task").get<std::string>());
    r.question = j.at("question").get<std::string>();
    r.answer = j.at("answer").get<std::string>();
    if (j.contains("choices") && !j["choices"].is_null())
      for (const auto& c : j["choices"]) r.choices.push_back({c.at("label").get<std::string>(), c.at("text").get<std::string>()});
    return r;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest line: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const std::vector<QARecord>& records) {
  std::string text;
  for (const auto& r : records) text += to_json_line(r) + "\n";
  detail::write_file_atomic(path, text);
}

std::vector<QARecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open manifest");
  std::vector<QARecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(parse_json_line(line));
    } catch (const IoError& e) {
      throw IoError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

void write_engines(const std::filesystem::path& path, const std::vector<EngineHistory>& engines) {
  json root = json::array();
  for (const auto& e : engines) {
    json je;
    je["id"] = e.id;
    je["faults"] = json::array();
    for (auto c : e.faults) je["faults"].push_back(component_name(c));
    je["cycles"] = json::array();
    for (std::size_t c = 0; c < e.cycles.size(); ++c) {
      const auto& s = e.cycles[c];
      json jc;
      jc["cycle"] = s.cycle;
      jc["seed"] = e.seeds[c];
      jc["channels"] = s.channels;
      jc["length"] = s.length;
      jc["noise"] = s.noise;
      jc["severity"] = s.severity;
      jc["base"] = s.base;
      jc["trends"] = json::array();
      for (auto t : s.trends) jc["trends"].push_back(trend_name(t));
      je["cycles"].push_back(std::move(jc));
    }
    root.push_back(std::move(je));
  }
  detail::write_file_atomic(path, root.dump(1) + "\n");
}

std::vector<EngineHistory> read_engines(const std::filesystem::path& path) {
  try {
    const json root = json::parse(detail::read_file(path));
    std::vector<EngineHistory> out;
    for (const auto& je : root) {
      EngineHistory e;
      e.id = je.at("id").get<std::size_t>();
      for (const auto& f : je.at("faults")) e.faults.push_back(parse_component(f.get<std::string>()));
      for (const auto& jc : je.at("cycles")) {
        SignalSpec s;
        s.cycle = jc.at("cycle").get<std::size_t>();
        s.channels = jc.at("channels").get<std::size_t>();
        s.length = jc.at("length").get<std::size_t>();
        s.noise = jc.at("noise").get<double>();
        s.severity = jc.at("severity").get<double>();
        s.base = jc.at("base").get<std::vector<double>>();
        for (const auto& t : jc.at("trends")) s.trends.push_back(parse_trend(t.get<std::string>()));
        s.faults = e.faults;
        e.seeds.push_back(jc.at("seed").get<std::uint64_t>());
        e.cycles.push_back(std::move(s));
      }
      out.push_back(std::move(e));
    }
    return out;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

DatasetSummary write_dataset(const std::filesystem::path& dir, const DatasetConfig& config, std::uint64_t seed) {
  const auto engines = generate_engines(config, seed);
  DatasetSummary summary;
  for (const auto& e : engines)
    for (std::size_t c = 0; c < e.cycles.size(); ++c) {
      write_series(dir / series_path(e.id, c), generate_segment(e.cycles[c], e.seeds[c]).values);
      ++summary.series_files;
    }
  const auto records = generate_qa(config, engines, seed);
  const auto parts = split(records, config.train_fraction, seed);
  write_manifest(dir / "manifest.jsonl", records);
  write_manifest(dir / "train.jsonl", parts.train);
  write_manifest(dir / "test.jsonl", parts.test);
  write_engines(dir / "engines.json", engines);
  build_vocabulary(records).save(dir / "vocab.txt");
  summary.records = records.size();
  summary.train_records = parts.train.size();
  summary.test_records = parts.test.size();
  summary.max_class_deviation = parts.max_class_deviation;
  return summary;
}

}  // namespace itf
