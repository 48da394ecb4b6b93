#include "itformer/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "binary_io.hpp"
#include "itformer/errors.hpp"

namespace itf {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t parse_size(std::string_view key, std::string_view text) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size())
    throw ConfigError(std::string(key), "expected a non-negative integer, got \"" + std::string(text) + "\"");
  return v;
}

double parse_double(std::string_view key, std::string_view text) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size())
    throw ConfigError(std::string(key), "expected a number, got \"" + std::string(text) + "\"");
  return v;
}

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = text.find(',');
    out.push_back(trim(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

std::string show(std::size_t v) { return std::to_string(v); }
std::string show(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}
template <typename T>
std::string show_list(const T& values) {
  std::string out;
  for (const auto& v : values) out += (out.empty() ? "" : ",") + show(v);
  return out;
}

struct Field {
  std::string key;  // section.name
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Member>
Field size_field(std::string key, Member member) {
  return Field{key,
               [key, member](RunConfig& c, std::string_view v) { member(c) = parse_size(key, v); },
               [member](const RunConfig& c) { return show(member(const_cast<RunConfig&>(c))); }};
}

template <typename Member>
Field double_field(std::string key, Member member) {
  return Field{key,
               [key, member](RunConfig& c, std::string_view v) { member(c) = parse_double(key, v); },
               [member](const RunConfig& c) { return show(member(const_cast<RunConfig&>(c))); }};
}

template <typename Member>
Field size_list_field(std::string key, Member member) {
  return Field{key,
               [key, member](RunConfig& c, std::string_view v) {
                 auto& target = member(c);
                 target.clear();
                 for (auto item : split_list(v)) target.push_back(parse_size(key, item));
               },
               [member](const RunConfig& c) { return show_list(member(const_cast<RunConfig&>(c))); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
#define SIZE(section, name, expr) f.push_back(size_field(#section "." #name, [](RunConfig& c) -> auto& { return expr; }))
#define REAL(section, name, expr) f.push_back(double_field(#section "." #name, [](RunConfig& c) -> auto& { return expr; }))
    SIZE(data, engines, c.data.engines);
    SIZE(data, cycles, c.data.cycles);
    SIZE(data, window, c.data.window);
    SIZE(data, channels, c.data.channels);
    SIZE(data, length, c.data.length);
    REAL(data, noise, c.data.noise);
    REAL(data, fault_probability, c.data.fault_probability);
    SIZE(data, understanding, c.data.counts[0]);
    SIZE(data, perception, c.data.counts[1]);
    SIZE(data, reasoning, c.data.counts[2]);
    SIZE(data, decision, c.data.counts[3]);
    f.push_back(Field{"data.grade_bounds",
                      [](RunConfig& c, std::string_view v) {
                        const auto items = split_list(v);
                        if (items.size() != 4) throw ConfigError("data.grade_bounds", "expected four boundaries");
                        for (std::size_t i = 0; i < 4; ++i)
                          c.data.grade_bounds[i] = parse_double("data.grade_bounds", items[i]);
                      },
                      [](const RunConfig& c) { return show_list(c.data.grade_bounds); }});
    REAL(data, train_fraction, c.data.train_fraction);

    SIZE(model, d, c.model.d);
    SIZE(model, channels, c.model.channels);
    SIZE(model, patch_len, c.model.patch_len);
    SIZE(model, stride, c.model.stride);
    SIZE(model, encoder_layers, c.model.encoder_layers);
    SIZE(model, encoder_heads, c.model.encoder_heads);
    SIZE(model, encoder_hidden, c.model.encoder_hidden);
    SIZE(model, lit_len, c.model.lit_len);
    SIZE(model, layers, c.model.layers);
    SIZE(model, heads, c.model.heads);
    SIZE(model, lm_layers, c.model.lm_layers);
    SIZE(model, lm_heads, c.model.lm_heads);
    SIZE(model, lm_hidden, c.model.lm_hidden);
    REAL(model, rotary_base, c.model.rotary_base);

    SIZE(train, epochs, c.train.epochs);
    SIZE(train, batch_size, c.train.batch_size);
    REAL(train, lr, c.train.lr);
    REAL(train, beta1, c.train.beta1);
    REAL(train, beta2, c.train.beta2);
    REAL(train, eps, c.train.eps);
    REAL(train, clip, c.train.clip);
    SIZE(train, max_steps, c.train.max_steps);
    SIZE(train, lm_pretrain_epochs, c.train.lm_pretrain_epochs);
    REAL(train, lm_pretrain_lr, c.train.lm_pretrain_lr);

    SIZE(eval, max_answer_len, c.eval.max_answer_len);
    SIZE(eval, limit, c.eval.limit);

    f.push_back(size_list_field("bench.channels", [](RunConfig& c) -> auto& { return c.bench.channels; }));
    f.push_back(size_list_field("bench.steps", [](RunConfig& c) -> auto& { return c.bench.steps; }));
    f.push_back(size_list_field("bench.question_lengths", [](RunConfig& c) -> auto& { return c.bench.question_lengths; }));
    SIZE(bench, n, c.bench.n);
    SIZE(bench, d, c.bench.d);
    SIZE(bench, heads, c.bench.heads);
    SIZE(bench, repetitions, c.bench.repetitions);
    SIZE(bench, warmup, c.bench.warmup);
#undef SIZE
#undef REAL
    return f;
  }();
  return table;
}

}  // namespace

void RunConfig::validate() const {
  try {
    model.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("model." + e.key(), e.what());
  }
  if (model.channels != data.channels)
    throw ConfigError("model.channels", "model expects " + std::to_string(model.channels) + " channels, data has " +
                                            std::to_string(data.channels));
  if (data.length < model.patch_len || (data.length - model.patch_len) % model.stride != 0)
    throw ConfigError("model.patch_len", "windows of " + std::to_string(model.patch_len) + " every " +
                                             std::to_string(model.stride) + " do not tile " +
                                             std::to_string(data.length) + " steps");
  if (data.window == 0 || data.cycles < data.window) throw ConfigError("data.window", "must be in [1, cycles]");
  if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0))
    throw ConfigError("data.train_fraction", "must lie strictly between 0 and 1");
  if (train.batch_size == 0) throw ConfigError("train.batch_size", "must be positive");
  if (!(train.lr > 0.0)) throw ConfigError("train.lr", "must be positive");
  if (eval.max_answer_len == 0) throw ConfigError("eval.max_answer_len", "must be positive");
  if (bench.repetitions < 30) throw ConfigError("bench.repetitions", "at least 30 repetitions are required");
  if (bench.channels.empty() || bench.steps.empty() || bench.question_lengths.empty())
    throw ConfigError("bench.channels", "grid lists must be non-empty");
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  for (const auto& f : fields())
    if (f.key == key) {
      f.set(config, trim(value));
      return;
    }
  throw ConfigError(std::string(key), "unknown configuration key");
}

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  std::string section;
  std::size_t number = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++number;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", "line " + std::to_string(number) + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "data" && section != "model" && section != "train" && section != "eval" && section != "bench")
        throw ConfigError(section, "unknown configuration section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("", "line " + std::to_string(number) + ": expected key = value");
    if (section.empty()) throw ConfigError(std::string(trim(line.substr(0, eq))), "entry outside any section");
    apply_setting(config, section + "." + std::string(trim(line.substr(0, eq))), line.substr(eq + 1));
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(detail::read_file(path)); }

std::string render_config(const RunConfig& config) {
  std::string out, section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string s = f.key.substr(0, dot);
    if (s != section) {
      out += (section.empty() ? "" : "\n") + std::string("[") + s + "]\n";
      section = s;
    }
    out += f.key.substr(dot + 1) + " = " + f.get(config) + "\n";
  }
  return out;
}

}  // namespace itf
