// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xlstm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "xlstm/checkpoint.hpp"
#include "xlstm/error.hpp"

namespace xlstm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Tensor leading_rows(const Tensor& t, std::size_t rows) {
  const std::size_t cols = t.cols();
  return Tensor({rows, cols}, std::vector<Scalar>(t.data(), t.data() + rows * cols));
}

struct SampleOutput {
  Tensor pred;
  ModelCache cache;
  std::size_t prefix = 0;
};

SampleOutput forward_sample(const ModelParams& model, const TaskSample& s) {
  SampleOutput out;
  out.prefix = s.evaluated_prefix();
  ModelOutput o = s.kind == TaskKind::Nns
                      ? model_forward(model, leading_rows(s.inputs, out.prefix))
                      : model_forward(model, std::span<const std::int32_t>(s.tokens).first(out.prefix));
  out.pred = std::move(o.logits);
  out.cache = std::move(o.cache);
  return out;
}

LossResult sample_loss(const TaskSample& s, const SampleOutput& o) {
  const std::span<const Scalar> mask = std::span<const Scalar>(s.mask).first(o.prefix);
  if (s.kind == TaskKind::Nns) return mse_loss(o.pred, leading_rows(s.target_values, o.prefix), mask);
  return masked_cross_entropy(o.pred, std::span<const std::int32_t>(s.targets).first(o.prefix), mask);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t tag) { return splitmix64(seed + tag); }

std::string field(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<TaskSample> eval_samples(const TaskConfig& task, std::size_t count, std::uint64_t seed) {
  std::vector<TaskSample> out;
  out.reserve(count);
  const std::uint64_t base = stream_seed(seed, kEvalStream);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = Rng::derive(base, i);
    out.push_back(generate(task, rng));
  }
  return out;
}

EvalMetrics evaluate(const ModelParams& model, const TaskConfig& task, const std::vector<TaskSample>& samples) {
  if (samples.empty()) throw Error("evaluate: no samples");
  EvalMetrics m;
  double total = 0;
  std::size_t correct = 0;
  for (const TaskSample& s : samples) {
    const SampleOutput o = forward_sample(model, s);
    const LossResult r = sample_loss(s, o);
    total += r.loss * double(r.count);
    m.positions += r.count;
    if (s.kind != TaskKind::Nns) {
      correct += count_correct(o.pred, std::span<const std::int32_t>(s.targets).first(o.prefix),
                               std::span<const Scalar>(s.mask).first(o.prefix), task.answer_classes());
    }
  }
  m.samples = samples.size();
  m.loss = total / double(m.positions);
  if (task.kind == TaskKind::Nns) {
    m.accuracy = m.scaled_accuracy = kNaN;
    m.mse = m.loss;
  } else {
    m.accuracy = double(correct) / double(m.positions);
    m.scaled_accuracy = scaled_accuracy(m.accuracy, task.random_baseline());
    m.mse = kNaN;
  }
  return m;
}

double sample_loss_and_grad(const ModelParams& model, const TaskSample& sample, double weight, ModelParams& grads) {
  const SampleOutput o = forward_sample(model, sample);
  LossResult r = sample_loss(sample, o);
  r.grad *= Scalar(weight);
  model_backward_acc(model, o.cache, r.grad, grads);
  return r.loss;
}

ModelParams init_model(RunConfig config) {
  config.finalize();
  Rng rng = Rng::derive(config.seed, kInitStream);
  return ModelParams::init(config.model, rng);
}

Trainer::Trainer(RunConfig config) : Trainer(config, init_model(config)) {}

Trainer::Trainer(RunConfig config, ModelParams model) : config_(std::move(config)), model_(std::move(model)) {
  config_.finalize();
  grads_ = zeros_like_params(model_);
  state_ = OptimizerState::for_params(param_list(model_));
  schedule_ = config_.train.schedule();
  train_task_ = config_.train_task();
  eval_task_ = config_.eval_task();
  eval_set_ = eval_samples(eval_task_, config_.eval.samples, config_.seed);
}

double Trainer::current_lr() const { return lr_at(schedule_, std::min<std::size_t>(steps_done() + 1, schedule_.total_steps)); }

double Trainer::step() {
  const std::size_t batch = config_.train.batch_size;
  const std::uint64_t base = stream_seed(config_.seed, kTrainStream);
  const double lr = current_lr();
  ParamList g = param_list(grads_);
  zero_all(g);
  double loss = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    Rng rng = Rng::derive(base, std::uint64_t(steps_done()) * batch + b);
    const TaskSample s = generate(train_task_, rng);
    loss += sample_loss_and_grad(model_, s, 1.0 / double(batch), grads_);
  }
  loss /= double(batch);
  if (!std::isfinite(loss)) throw Error("non-finite training loss at step " + std::to_string(steps_done() + 1));
  adamw_step(param_list(model_), g, state_, lr, config_.train.adamw);
  return loss;
}

EvalMetrics Trainer::evaluate() const { return xlstm::evaluate(model_, eval_task_, eval_set_); }

std::string metrics_header() {
  return "step,train_loss,eval_loss,eval_accuracy,eval_scaled_accuracy,eval_mse,lr";
}

std::string format_metrics_row(const MetricsRow& r) {
  return std::to_string(r.step) + "," + field(r.train_loss) + "," + field(r.eval.loss) + "," +
         field(r.eval.accuracy) + "," + field(r.eval.scaled_accuracy) + "," + field(r.eval.mse) + "," + field(r.lr);
}

TrainSummary run_training(const RunConfig& input, std::ostream* log) {
  RunConfig config = input;
  config.finalize();
  namespace fs = std::filesystem;
  const fs::path dir(config.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + config.out_dir + "': " + ec.message());

  std::ofstream(dir / "run.yaml") << to_yaml(config);
  std::ofstream metrics(dir / "metrics.csv");
  std::ofstream timing(dir / "timing.csv");
  if (!metrics || !timing) throw IoError("cannot write metrics in '" + config.out_dir + "'");
  {
    RunConfig echo = config;
    echo.out_dir.clear();
    std::istringstream lines(to_yaml(echo));
    for (std::string line; std::getline(lines, line);) metrics << "# " << line << "\n";
  }
  metrics << metrics_header() << "\n";
  timing << "step,seconds\n";

  const auto start = std::chrono::steady_clock::now();
  Trainer trainer(config);
  TrainSummary summary;
  auto record = [&](double train_loss) {
    MetricsRow row;
    row.step = trainer.steps_done();
    row.train_loss = train_loss;
    row.eval = trainer.evaluate();
    row.lr = trainer.steps_done() == 0 ? 0.0 : lr_at(config.train.schedule(), trainer.steps_done());
    metrics << format_metrics_row(row) << "\n" << std::flush;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    timing << row.step << "," << secs << "\n" << std::flush;
    if (log) {
      *log << "step " << row.step << " train_loss " << field(train_loss) << " eval_loss " << row.eval.loss;
      if (config.task.kind == TaskKind::Nns) *log << " eval_mse " << row.eval.mse;
      else *log << " eval_acc " << row.eval.accuracy << " scaled " << row.eval.scaled_accuracy;
      *log << " (" << secs << " s)\n" << std::flush;
    }
    summary.rows.push_back(row);
    return row;
  };
  auto reached = [&](const EvalMetrics& e) {
    if (config.task.kind == TaskKind::Nns) return config.train.stop_mse > 0 && e.mse <= config.train.stop_mse;
    return config.train.stop_scaled_accuracy > 0 && e.scaled_accuracy >= config.train.stop_scaled_accuracy;
  };

  record(kNaN);
  double loss_sum = 0;
  std::size_t loss_count = 0;
  while (trainer.steps_done() < config.train.steps) {
    loss_sum += trainer.step();
    ++loss_count;
    if (trainer.steps_done() % config.eval.interval == 0 || trainer.steps_done() == config.train.steps) {
      const MetricsRow row = record(loss_sum / double(loss_count));
      loss_sum = 0;
      loss_count = 0;
      if (reached(row.eval) && trainer.steps_done() < config.train.steps) {
        summary.stopped_early = true;
        break;
      }
    }
  }
  save_checkpoint((dir / "model.ckpt").string(), trainer.model());
  return summary;
}

}  // namespace xlstm
