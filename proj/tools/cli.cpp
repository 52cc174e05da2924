// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>

#include "xlstm/checkpoint.hpp"
#include "xlstm/config.hpp"
#include "xlstm/equivalence.hpp"
#include "xlstm/error.hpp"
#include "xlstm/gradcheck.hpp"
#include "xlstm/trainer.hpp"

namespace xlstm::cli {

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> steps;
  bool quiet = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
};

struct GradArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
};

struct EquivArgs {
  std::size_t trials = 100;
  std::size_t max_steps = 64;
  std::size_t max_dim = 32;
  std::uint64_t seed = 0;
  double threshold = 1e-8;
  std::string kind;
  std::optional<std::uint64_t> trial_seed;
};

RunConfig load_with_overrides(const std::string& path, std::optional<std::uint64_t> seed,
                              std::optional<std::string> out_dir, std::optional<std::size_t> steps) {
  RunConfig c = load_run_config(path);
  if (seed) c.seed = *seed;
  if (out_dir) c.out_dir = *out_dir;
  if (steps) c.train.steps = *steps;
  c.finalize();
  return c;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const RunConfig c = load_with_overrides(a.config, a.seed, a.out, a.steps);
  out << "# xlstm train: " << c.out_dir << "\n";
  const TrainSummary s = run_training(c, a.quiet ? nullptr : &out);
  const MetricsRow& last = s.rows.back();
  out << metrics_header() << "\n" << format_metrics_row(last) << "\n";
  if (s.stopped_early) out << "# stopped early at step " << last.step << "\n";
  return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  RunConfig c = load_with_overrides(a.config, a.seed, std::nullopt, std::nullopt);
  if (a.samples) c.eval.samples = *a.samples;
  const ModelParams model = load_checkpoint(a.checkpoint);
  if (model.config.vocab_size != c.model.vocab_size || model.config.input_dim != c.model.input_dim ||
      model.config.outputs() != c.model.outputs()) {
    throw ConfigError("task", "checkpoint model interface does not match task '" +
                                  std::string(to_string(c.task.kind)) + "'");
  }
  const TaskConfig task = c.eval_task();
  const EvalMetrics m = evaluate(model, task, eval_samples(task, c.eval.samples, c.seed));
  std::istringstream lines(to_yaml(c));
  for (std::string line; std::getline(lines, line);) out << "# " << line << "\n";
  out << "samples,positions,loss,accuracy,scaled_accuracy,mse\n";
  auto opt = [](double v) { return std::isnan(v) ? std::string() : num(v); };
  out << m.samples << "," << m.positions << "," << num(m.loss) << "," << opt(m.accuracy) << ","
      << opt(m.scaled_accuracy) << "," << opt(m.mse) << "\n";
  return kExitOk;
}

int cmd_gradcheck(const GradArgs& a, std::ostream& out) {
  GradCheckConfig c = a.config.empty() ? GradCheckConfig{} : load_gradcheck_config(a.config);
  if (a.seed) c.seed = *a.seed;
  if (a.threshold) c.threshold = *a.threshold;
  if (!(c.threshold > 0)) throw ConfigError("threshold", "must be positive");
  bool ok = true;
  out << "model,group,entries,max_abs_analytic,max_abs_error,rel_error,status\n";
  for (const GradCheckModelSpec& spec : c.models) {
    const GradCheckReport r = gradcheck_model(spec, c.seed, c.step);
    for (const GroupReport& g : r.groups) {
      const bool pass = g.rel_error < c.threshold;
      out << r.label << "," << g.name << "," << g.entries << "," << sci(g.max_abs_analytic) << ","
          << sci(g.max_abs_error) << "," << sci(g.rel_error) << "," << (pass ? "ok" : "FAIL") << "\n";
    }
    const bool pass = r.passed(c.threshold);
    ok = ok && pass;
    out << "# " << r.label << ": worst " << sci(r.worst()) << (pass ? " < " : " >= ") << sci(c.threshold)
        << (pass ? " PASS" : " FAIL") << "\n";
  }
  return ok ? kExitOk : kExitCheckFailed;
}

EquivalenceKind parse_kind(const std::string& name) {
  for (EquivalenceKind k : {EquivalenceKind::SLstmStabilization, EquivalenceKind::MLstmStabilization,
                            EquivalenceKind::MLstmParallel}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("kind", "unknown equivalence kind '" + name + "'");
}

void print_trial(std::ostream& out, const TrialResult& t) {
  out << to_string(t.kind) << "," << t.seed << "," << t.steps << "," << t.dim << "," << t.heads << ","
      << to_string(t.forget_gate) << "," << sci(t.rel_error) << "\n";
}

int cmd_equivcheck(const EquivArgs& a, std::ostream& out) {
  if (a.trials == 0) throw ConfigError("trials", "must be at least 1");
  if (a.max_steps == 0) throw ConfigError("max-steps", "must be at least 1");
  if (a.max_dim == 0) throw ConfigError("max-dim", "must be at least 1");
  if (!(a.threshold > 0)) throw ConfigError("threshold", "must be positive");
  const char* header = "kind,seed,steps,dim,heads,forget_gate,rel_error\n";
  if (a.trial_seed) {
    if (a.kind.empty()) throw ConfigError("kind", "--trial-seed needs --kind");
    const TrialResult t = run_equivalence_trial(parse_kind(a.kind), *a.trial_seed, a.max_steps, a.max_dim);
    out << header;
    print_trial(out, t);
    return t.rel_error < a.threshold ? kExitOk : kExitCheckFailed;
  }
  const EquivalenceReport r = run_equivalence({a.trials, a.max_steps, a.max_dim, a.seed});
  out << "# worst trial per kind over " << a.trials << " trials (T <= " << a.max_steps << ", d <= " << a.max_dim
      << ")\n"
      << header;
  bool ok = true;
  for (EquivalenceKind k : {EquivalenceKind::SLstmStabilization, EquivalenceKind::MLstmStabilization,
                            EquivalenceKind::MLstmParallel}) {
    const TrialResult& w = r.worst(k);
    print_trial(out, w);
    if (!(w.rel_error < a.threshold)) {
      ok = false;
      out << "# FAIL " << to_string(k) << " seed " << w.seed << " error " << sci(w.rel_error)
          << " >= " << sci(a.threshold) << "\n";
    }
  }
  out << (ok ? "# PASS\n" : "# FAIL\n");
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"xLSTM training, evaluation and verification"};
  app.require_subcommand(1);

  TrainArgs train;
  CLI::App* t = app.add_subcommand("train", "Train a model and write a run directory");
  t->add_option("--config", train.config, "Run config (YAML)")->required();
  t->add_option("--seed", train.seed, "Override the config seed");
  t->add_option("--out", train.out, "Override the output directory");
  t->add_option("--steps", train.steps, "Override train.steps");
  t->add_flag("--quiet", train.quiet, "Only print the final metrics row");

  EvalArgs eval;
  CLI::App* e = app.add_subcommand("eval", "Evaluate a checkpoint on held-out samples");
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  e->add_option("--config", eval.config, "Run config (task and eval sections are used)")->required();
  e->add_option("--seed", eval.seed, "Override the config seed");
  e->add_option("--samples", eval.samples, "Override eval.samples");

  GradArgs grad;
  CLI::App* g = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  g->add_option("--config", grad.config, "Gradient-check config (YAML); default: the three standard models");
  g->add_option("--seed", grad.seed, "Override the seed");
  g->add_option("--threshold", grad.threshold, "Maximum relative error per parameter group");

  EquivArgs eq;
  CLI::App* q = app.add_subcommand("equivcheck", "Stabilized/unstabilized and parallel/recurrent equivalence");
  q->add_option("--trials", eq.trials, "Trials per kind")->capture_default_str();
  q->add_option("--max-steps", eq.max_steps, "Largest sequence length T")->capture_default_str();
  q->add_option("--max-dim", eq.max_dim, "Largest hidden size d")->capture_default_str();
  q->add_option("--seed", eq.seed, "Seed of the first trial")->capture_default_str();
  q->add_option("--threshold", eq.threshold, "Maximum relative error")->capture_default_str();
  q->add_option("--kind", eq.kind, "Trial kind for --trial-seed");
  q->add_option("--trial-seed", eq.trial_seed, "Rerun a single trial");

  std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "usage error: " << ex.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (t->parsed()) return cmd_train(train, out);
    if (e->parsed()) return cmd_eval(eval, out);
    if (g->parsed()) return cmd_gradcheck(grad, out);
    return cmd_equivcheck(eq, out);
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const IoError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitCheckFailed;
  }
}

}  // namespace xlstm::cli
