#include "itformer/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "itformer/checkpoint.hpp"
#include "itformer/errors.hpp"
#include "itformer/series_io.hpp"

namespace itf {

namespace {

constexpr const char* kLmPrefix = "lm.";

std::size_t count_correct(const Array& logits, std::span<const int> targets) {
  const std::size_t cols = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const double* row = logits.data().data() + r * cols;
    const auto best = static_cast<int>(std::max_element(row, row + cols) - row);
    correct += best == targets[r];
  }
  return correct;
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

void set_lm_trainable(ParameterSet& params, bool trainable) {
  for (auto& p : params.all())
    if (p.name.rfind(kLmPrefix, 0) == 0) p.trainable = trainable;
}

}  // namespace

void Adam::step(ParameterSet& params, const GradientMap& grads, double scale) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& p : params.all()) {
    if (!p.trainable) continue;
    auto it = grads.find(p.name);
    if (it == grads.end()) continue;
    auto [slot, fresh] = moments_.try_emplace(p.name, Array(p.value.shape()), Array(p.value.shape()));
    auto& [m, v] = slot->second;
    auto value = p.value.data();
    auto grad = it->second.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] * scale;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      value[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

double global_norm(const GradientMap& grads) {
  double total = 0.0;
  for (const auto& [name, g] : grads)
    for (double x : g.data()) total += x * x;
  return std::sqrt(total);
}

Example make_example(const QARecord& record, const Vocabulary& vocab, std::size_t lit_len, std::size_t window) {
  const std::size_t expected = series_per_record(record.task, window);
  if (record.series.size() != expected)
    throw ConfigError("series", "record " + record.id + " (" + std::string(task_name(record.task)) + ") has " +
                                    std::to_string(record.series.size()) + " series, expected " +
                                    std::to_string(expected));
  Example e;
  e.id = record.id;
  e.task = record.task;
  e.series = record.series;
  e.prompt = prompt_ids(record, vocab, lit_len);
  e.answer = vocab.encode(record.answer);
  if (e.answer.empty()) throw ConfigError("answer", "record " + record.id + " has an empty answer");
  return e;
}

const Array& EncodedCache::get(const std::string& series) {
  auto it = cache_.find(series);
  if (it != cache_.end()) return it->second;
  return cache_.emplace(series, model_.encode_segment(read_series(dir_ / series))).first->second;
}

std::vector<const Array*> EncodedCache::segments(const Example& example) {
  std::vector<const Array*> out;
  out.reserve(example.series.size());
  for (const auto& s : example.series) out.push_back(&get(s));
  return out;
}

BatchLoss batch_loss(Graph& g, const Model& model, EncodedCache& cache, std::span<const Example> batch) {
  if (batch.empty()) throw DimensionError("empty batch");
  std::vector<Var> logits;
  std::vector<int> targets;
  BatchLoss out;
  for (const auto& ex : batch) {
    Var prompt = model.augmented_prompt(g, cache.segments(ex), ex.prompt);
    auto a = model.lm().answer_logits(g, prompt, ex.answer);
    out.correct += count_correct(a.logits.value(), a.targets);
    logits.push_back(a.logits);
    targets.insert(targets.end(), a.targets.begin(), a.targets.end());
  }
  out.tokens = targets.size();
  Var all = logits.size() == 1 ? logits.front() : ops::concat(logits, 0);
  out.loss = ops::cross_entropy(all, targets, std::vector<bool>(targets.size(), true));
  return out;
}

Trainer::Trainer(Model& model, EncodedCache& cache, const TrainConfig& config)
    : model_(model),
      cache_(cache),
      config_(config),
      adam_(config.lr, config.beta1, config.beta2, config.eps),
      frozen_checksum_(model.params().checksum(false)) {}

StepReport Trainer::sft_step(std::span<const Example> batch) {
  Graph g;
  const BatchLoss b = batch_loss(g, model_, cache_, batch);
  const GradientMap grads = g.backward(b.loss);
  for (const auto& [name, grad] : grads)
    if (!is_alignment_parameter(name)) throw InvariantError("gradient reached frozen parameter " + name);

  StepReport r;
  r.step = ++steps_;
  r.loss = b.loss.value().item();
  r.grad_norm = global_norm(grads);
  r.correct = b.correct;
  r.tokens = b.tokens;
  const double scale = config_.clip > 0.0 && r.grad_norm > config_.clip ? config_.clip / r.grad_norm : 1.0;
  adam_.step(model_.params(), grads, scale);
  r.frozen_ok = model_.params().checksum(false) == frozen_checksum_;
  return r;
}

double teacher_forced_accuracy(const Model& model, EncodedCache& cache, std::span<const Example> examples) {
  std::size_t correct = 0, total = 0;
  for (const auto& ex : examples) {
    Graph g(false);
    const auto b = batch_loss(g, model, cache, std::span<const Example>(&ex, 1));
    correct += b.correct;
    total += b.tokens;
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

void pretrain_language_model(Model& model, std::span<const Example> examples, const TrainConfig& config,
                             std::uint64_t seed, std::ostream* log) {
  if (config.lm_pretrain_epochs == 0 || examples.empty()) return;
  set_lm_trainable(model.params(), true);
  Adam adam(config.lm_pretrain_lr, config.beta1, config.beta2, config.eps);
  Rng rng(mix_seed(seed, 0x5000));
  const MiniLm& lm = model.lm();
  for (std::size_t epoch = 0; epoch < config.lm_pretrain_epochs; ++epoch) {
    const auto order = shuffled(examples.size(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      Graph g;
      std::vector<Var> logits;
      std::vector<int> targets;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        const Example& ex = examples[order[i]];
        QueryEmbedding q = lm.embed_query(g, ex.prompt);
        const auto rows = placeholder_rows(q.placeholder);
        std::vector<int> hint(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) hint[k] = ex.answer[k % ex.answer.size()];
        Var prompt = rows.empty() ? q.embeddings
                                  : ops::scatter_rows(q.embeddings, lm.embed(g, hint, rows.front()), rows);
        auto a = lm.answer_logits(g, prompt, ex.answer);
        logits.push_back(a.logits);
        targets.insert(targets.end(), a.targets.begin(), a.targets.end());
      }
      Var loss = ops::cross_entropy(logits.size() == 1 ? logits.front() : ops::concat(logits, 0), targets,
                                    std::vector<bool>(targets.size(), true));
      const GradientMap grads = g.backward(loss);
      const double norm = global_norm(grads);
      adam.step(model.params(), grads, config.clip > 0.0 && norm > config.clip ? config.clip / norm : 1.0);
      loss_sum += loss.value().item();
      ++batches;
    }
    if (log) *log << "lm pretrain epoch " << epoch + 1 << " loss " << loss_sum / static_cast<double>(batches) << "\n";
  }
  set_lm_trainable(model.params(), false);
}

TrainResult train(const RunConfig& config, const std::filesystem::path& data_dir,
                  const std::filesystem::path& out_dir, std::uint64_t seed, std::ostream* log) {
  config.validate();
  const Vocabulary vocab = Vocabulary::load(data_dir / "vocab.txt");
  const auto records = read_manifest(data_dir / "train.jsonl");
  if (records.empty()) throw IoError((data_dir / "train.jsonl").string() + ": no training records");

  Model model(config.model, vocab.size(), seed);
  std::vector<Example> examples;
  examples.reserve(records.size());
  for (const auto& r : records) examples.push_back(make_example(r, vocab, config.model.lit_len, config.data.window));

  EncodedCache cache(model, data_dir);
  for (const auto& ex : examples) cache.segments(ex);
  if (log) *log << "encoded " << cache.size() << " series\n";

  pretrain_language_model(model, examples, config.train, seed, log);

  TrainResult result;
  result.budget = report_param_budget(model.params());
  result.analytic_trainable = config.model.itformer().parameter_count();
  if (log)
    *log << "trainable " << result.budget.trainable << " (analytic " << result.analytic_trainable << "), frozen "
         << result.budget.frozen << ", ratio " << result.budget.ratio << "\n";

  std::filesystem::create_directories(out_dir);
  std::ofstream csv(out_dir / kLogFile);
  if (!csv) throw IoError((out_dir / kLogFile).string() + ": cannot open for writing");
  csv << "step,epoch,loss,grad_norm,frozen_ok\n";
  csv.precision(17);

  Trainer trainer(model, cache, config.train);
  Rng order_rng(mix_seed(seed, 0x4000));
  bool done = false;
  for (std::size_t epoch = 1; epoch <= config.train.epochs && !done; ++epoch) {
    const auto order = shuffled(examples.size(), order_rng);
    for (std::size_t start = 0; start < order.size() && !done; start += config.train.batch_size) {
      std::vector<Example> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config.train.batch_size); ++i)
        batch.push_back(examples[order[i]]);
      StepReport r = trainer.sft_step(batch);
      r.epoch = epoch;
      csv << r.step << "," << r.epoch << "," << r.loss << "," << r.grad_norm << "," << (r.frozen_ok ? 1 : 0)
          << "\n";
      if (!r.frozen_ok) throw InvariantError("frozen parameters changed at step " + std::to_string(r.step));
      if (log && (r.step % 50 == 0 || r.step == 1))
        *log << "epoch " << epoch << " step " << r.step << " loss " << r.loss << " grad_norm " << r.grad_norm
             << "\n";
      result.steps.push_back(r);
      done = config.train.max_steps > 0 && trainer.steps() >= config.train.max_steps;
    }
  }
  if (!csv) throw IoError((out_dir / kLogFile).string() + ": write failed");

  result.checkpoint = out_dir / kCheckpointFile;
  save_checkpoint(result.checkpoint, model.params());
  std::ofstream(out_dir / kConfigFile) << render_config(config);
  return result;
}

EvalReport evaluate(const Model& model, EncodedCache& cache, const std::vector<QARecord>& records,
                    const Vocabulary& vocab, const EvalConfig& config, std::size_t window) {
  std::vector<Prediction> predictions;
  std::map<Task, std::size_t> seen;
  for (const auto& r : records) {
    if (config.limit > 0 && seen[r.task] >= config.limit) continue;
    ++seen[r.task];
    const Example ex = make_example(r, vocab, model.config().lit_len, window);
    const auto ids = model.answer(cache.segments(ex), ex.prompt, config.max_answer_len);
    predictions.push_back({&r, vocab.decode(ids)});
  }
  return score_predictions(predictions);
}

}  // namespace itf
