// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xlstm/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "xlstm/error.hpp"

namespace xlstm {

namespace {

/// Reads typed values from one YAML mapping and remembers which keys were consumed.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_, "expected a mapping");
  }

  std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }

  template <class T>
  void read(const std::string& name, T& out) {
    seen_.insert(name);
    if (!node_ || node_.IsNull() || !node_[name]) return;
    try {
      out = node_[name].template as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(key(name), "has the wrong type");
    }
  }

  void read_size(const std::string& name, std::size_t& out) {
    long long v = static_cast<long long>(out);
    read(name, v);
    if (v < 0) throw ConfigError(key(name), "must not be negative");
    out = static_cast<std::size_t>(v);
  }

  template <class E, class F>
  void read_enum(const std::string& name, E& out, F parse) {
    std::string text;
    read(name, text);
    if (text.empty()) return;
    try {
      out = parse(text);
    } catch (const ConfigError& e) {
      throw ConfigError(key(name), e.what());
    }
  }

  Section child(const std::string& name) {
    seen_.insert(name);
    return Section(node_ && node_.IsMap() ? node_[name] : YAML::Node(), key(name));
  }

  void mark(const std::string& name) { seen_.insert(name); }

  bool has(const std::string& name) const { return node_ && node_.IsMap() && node_[name]; }

  /// Rejects keys that were never read.
  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const std::string name = kv.first.as<std::string>();
      if (!seen_.count(name)) throw ConfigError(key(name), "unknown config key");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

/// Shortest round-trip decimal form.
std::string real(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

GateActivation parse_gate(const std::string& s) { return gate_activation_from_string(s); }
Activation parse_activation(const std::string& s) { return activation_from_string(s); }

void read_ratio(Section& s, StackConfig& m) {
  std::string ratio;
  s.read("ratio", ratio);
  if (ratio.empty()) return;
  const std::size_t colon = ratio.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(ratio);
    std::size_t used_a = 0, used_b = 0;
    const long a = std::stol(ratio.substr(0, colon), &used_a);
    const long b = std::stol(ratio.substr(colon + 1), &used_b);
    if (a < 0 || b < 0 || used_a != colon || used_b != ratio.size() - colon - 1) throw std::invalid_argument(ratio);
    m.ratio_mlstm = std::size_t(a);
    m.ratio_slstm = std::size_t(b);
  } catch (const std::logic_error&) {
    throw ConfigError(s.key("ratio"), "expected 'a:b' with non-negative integers, got '" + ratio + "'");
  }
}

void read_model(Section s, StackConfig& m) {
  s.read_size("num_blocks", m.num_blocks);
  read_ratio(s, m);
  if (s.has("slstm_positions")) {
    std::vector<long long> pos;
    s.read("slstm_positions", pos);
    m.slstm_positions.clear();
    for (long long p : pos) {
      if (p < 0) throw ConfigError(s.key("slstm_positions"), "positions must not be negative");
      m.slstm_positions.push_back(std::size_t(p));
    }
  } else {
    s.read("slstm_positions", m.slstm_positions);
  }
  s.read_size("embedding_dim", m.embedding_dim);
  s.read_size("vocab_size", m.vocab_size);
  s.read_size("input_dim", m.input_dim);
  s.read_size("output_dim", m.output_dim);
  s.read("tie_weights", m.tie_weights);

  Section sl = s.child("slstm");
  sl.read_size("num_heads", m.slstm.num_heads);
  sl.read_size("conv_kernel", m.slstm.conv_kernel);
  sl.read("mlp_factor", m.slstm.mlp_factor);
  sl.read_enum("mlp_value_activation", m.slstm.mlp_value_activation, parse_activation);
  sl.read_enum("mlp_gate_activation", m.slstm.mlp_gate_activation, parse_activation);
  sl.read_enum("forget_gate", m.slstm.forget_gate, parse_gate);
  sl.read_enum("input_gate", m.slstm.input_gate, parse_gate);
  sl.read("block_diagonal_input", m.slstm.block_diagonal_input);
  double clip = m.slstm.recurrent_grad_clip;
  sl.read("recurrent_grad_clip", clip);
  m.slstm.recurrent_grad_clip = Scalar(clip);
  sl.finish();

  Section ml = s.child("mlstm");
  ml.read_size("num_heads", m.mlstm.num_heads);
  ml.read_size("proj_factor", m.mlstm.proj_factor);
  ml.read_size("conv_kernel", m.mlstm.conv_kernel);
  ml.read_size("qkv_block_size", m.mlstm.qkv_block_size);
  ml.read_enum("forget_gate", m.mlstm.forget_gate, parse_gate);
  ml.read_enum("output_gate_activation", m.mlstm.output_gate_activation, parse_activation);
  ml.finish();
  s.finish();
}

void emit_model(YAML::Emitter& e, const StackConfig& m) {
  e << YAML::BeginMap;
  e << YAML::Key << "num_blocks" << YAML::Value << m.num_blocks;
  e << YAML::Key << "ratio" << YAML::Value << (std::to_string(m.ratio_mlstm) + ":" + std::to_string(m.ratio_slstm));
  e << YAML::Key << "slstm_positions" << YAML::Value << YAML::Flow << m.slstm_positions;
  e << YAML::Key << "embedding_dim" << YAML::Value << m.embedding_dim;
  e << YAML::Key << "vocab_size" << YAML::Value << m.vocab_size;
  e << YAML::Key << "input_dim" << YAML::Value << m.input_dim;
  e << YAML::Key << "output_dim" << YAML::Value << m.output_dim;
  e << YAML::Key << "tie_weights" << YAML::Value << m.tie_weights;
  e << YAML::Key << "slstm" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "num_heads" << YAML::Value << m.slstm.num_heads;
  e << YAML::Key << "conv_kernel" << YAML::Value << m.slstm.conv_kernel;
  e << YAML::Key << "mlp_factor" << YAML::Value << real(m.slstm.mlp_factor);
  e << YAML::Key << "mlp_value_activation" << YAML::Value << std::string(to_string(m.slstm.mlp_value_activation));
  e << YAML::Key << "mlp_gate_activation" << YAML::Value << std::string(to_string(m.slstm.mlp_gate_activation));
  e << YAML::Key << "forget_gate" << YAML::Value << std::string(to_string(m.slstm.forget_gate));
  e << YAML::Key << "input_gate" << YAML::Value << std::string(to_string(m.slstm.input_gate));
  e << YAML::Key << "block_diagonal_input" << YAML::Value << m.slstm.block_diagonal_input;
  e << YAML::Key << "recurrent_grad_clip" << YAML::Value << real(double(m.slstm.recurrent_grad_clip));
  e << YAML::EndMap;
  e << YAML::Key << "mlstm" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "num_heads" << YAML::Value << m.mlstm.num_heads;
  e << YAML::Key << "proj_factor" << YAML::Value << m.mlstm.proj_factor;
  e << YAML::Key << "conv_kernel" << YAML::Value << m.mlstm.conv_kernel;
  e << YAML::Key << "qkv_block_size" << YAML::Value << m.mlstm.qkv_block_size;
  e << YAML::Key << "forget_gate" << YAML::Value << std::string(to_string(m.mlstm.forget_gate));
  e << YAML::Key << "output_gate_activation" << YAML::Value << std::string(to_string(m.mlstm.output_gate_activation));
  e << YAML::EndMap;
  e << YAML::EndMap;
}

YAML::Node load_yaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("malformed config: ") + e.what());
  }
}

}  // namespace

ScheduleConfig TrainConfig::schedule() const {
  ScheduleConfig s = ScheduleConfig::with_default_warmup(lr, steps);
  if (warmup_steps >= 0) s.warmup_steps = std::size_t(warmup_steps);
  s.floor_fraction = lr_floor;
  return s;
}

TaskConfig RunConfig::train_task() const {
  TaskConfig t = task;
  if (t.kind != TaskKind::Mqar && train.mask_all_positions) t.mask_all_positions = true;
  return t;
}

TaskConfig RunConfig::eval_task() const {
  TaskConfig t = task;
  if (eval.min_length != 0) t.min_length = eval.min_length;
  if (eval.max_length != 0) t.max_length = eval.max_length;
  if (t.kind != TaskKind::Mqar && (eval.min_length != 0 || eval.max_length != 0)) t.context = 0;
  return t;
}

void RunConfig::finalize() {
  task.validate();
  eval_task().validate();
  model.vocab_size = task.model_vocab();
  model.input_dim = task.input_dim();
  model.output_dim = task.kind == TaskKind::Nns ? 1 : 0;
  if (model.tie_weights && task.kind == TaskKind::Nns) {
    throw ConfigError("model.tie_weights", "weight tying needs a token task");
  }
  model.validate();
  (void)model.layout();
  if (train.steps == 0) throw ConfigError("train.steps", "must be at least 1");
  if (train.batch_size == 0) throw ConfigError("train.batch_size", "must be at least 1");
  if (eval.samples == 0) throw ConfigError("eval.samples", "must be at least 1");
  if (eval.interval == 0) throw ConfigError("eval.interval", "must be at least 1");
  train.schedule().validate();
}

RunConfig parse_run_config(const std::string& text) {
  YAML::Node root = load_yaml(text);
  RunConfig c;
  Section s(root, "");
  long long seed = 0;
  s.read("seed", seed);
  if (seed < 0) throw ConfigError("seed", "must not be negative");
  c.seed = std::uint64_t(seed);
  s.read("out", c.out_dir);
  read_model(s.child("model"), c.model);

  Section t = s.child("task");
  t.read_enum("kind", c.task.kind, task_kind_from_string);
  t.read_size("min_length", c.task.min_length);
  t.read_size("max_length", c.task.max_length);
  t.read_size("context", c.task.context);
  t.read_size("vocab_size", c.task.vocab_size);
  t.read_size("kv_pairs", c.task.kv_pairs);
  t.read("mask_all_positions", c.task.mask_all_positions);
  t.finish();

  Section e = s.child("eval");
  e.read_size("min_length", c.eval.min_length);
  e.read_size("max_length", c.eval.max_length);
  e.read_size("samples", c.eval.samples);
  e.read_size("interval", c.eval.interval);
  e.finish();

  Section tr = s.child("train");
  tr.read_size("steps", c.train.steps);
  tr.read_size("batch_size", c.train.batch_size);
  tr.read("lr", c.train.lr);
  tr.read("warmup_steps", c.train.warmup_steps);
  tr.read("lr_floor", c.train.lr_floor);
  tr.read("weight_decay", c.train.adamw.weight_decay);
  tr.read("beta1", c.train.adamw.beta1);
  tr.read("beta2", c.train.adamw.beta2);
  tr.read("eps", c.train.adamw.eps);
  tr.read("mask_all_positions", c.train.mask_all_positions);
  tr.read("stop_scaled_accuracy", c.train.stop_scaled_accuracy);
  tr.read("stop_mse", c.train.stop_mse);
  tr.finish();
  s.finish();

  c.finalize();
  return c;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_text(path)); }

GradCheckConfig parse_gradcheck_config(const std::string& text) {
  YAML::Node root = load_yaml(text);
  GradCheckConfig c;
  Section s(root, "");
  long long seed = 7;
  s.read("seed", seed);
  if (seed < 0) throw ConfigError("seed", "must not be negative");
  c.seed = std::uint64_t(seed);
  s.read("step", c.step);
  s.read("threshold", c.threshold);
  if (!(c.step > 0)) throw ConfigError("step", "must be positive");
  if (!(c.threshold > 0)) throw ConfigError("threshold", "must be positive");
  if (s.has("models")) {
    YAML::Node list = root["models"];
    if (!list.IsSequence() || list.size() == 0) throw ConfigError("models", "expected a non-empty list");
    c.models.clear();
    for (std::size_t k = 0; k < list.size(); ++k) {
      Section m(list[k], "models." + std::to_string(k));
      GradCheckModelSpec spec;
      m.read("label", spec.label);
      StackConfig ratio;
      ratio.ratio_mlstm = spec.ratio_mlstm;
      ratio.ratio_slstm = spec.ratio_slstm;
      read_ratio(m, ratio);
      spec.ratio_mlstm = ratio.ratio_mlstm;
      spec.ratio_slstm = ratio.ratio_slstm;
      m.read_size("num_blocks", spec.num_blocks);
      m.read_size("dim", spec.dim);
      m.read_size("vocab", spec.vocab);
      m.read_size("steps", spec.steps);
      m.finish();
      if (spec.label.empty()) spec.label = "model" + std::to_string(k);
      if (spec.num_blocks == 0 || spec.dim == 0 || spec.vocab == 0 || spec.steps == 0) {
        throw ConfigError(m.key("dim"), "num_blocks, dim, vocab and steps must be positive");
      }
      c.models.push_back(spec);
    }
  }
  s.mark("models");
  s.finish();
  return c;
}

GradCheckConfig load_gradcheck_config(const std::string& path) { return parse_gradcheck_config(read_text(path)); }

std::string model_to_yaml(const StackConfig& m) {
  YAML::Emitter e;
  emit_model(e, m);
  return e.c_str();
}

StackConfig model_from_yaml(const std::string& text) {
  StackConfig m;
  read_model(Section(load_yaml(text), "model"), m);
  m.validate();
  return m;
}

std::string to_yaml(const RunConfig& c) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "seed" << YAML::Value << c.seed;
  e << YAML::Key << "out" << YAML::Value << c.out_dir;
  e << YAML::Key << "model" << YAML::Value;
  emit_model(e, c.model);
  e << YAML::Key << "task" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << std::string(to_string(c.task.kind));
  e << YAML::Key << "min_length" << YAML::Value << c.task.min_length;
  e << YAML::Key << "max_length" << YAML::Value << c.task.max_length;
  e << YAML::Key << "context" << YAML::Value << c.task.context;
  e << YAML::Key << "vocab_size" << YAML::Value << c.task.vocab_size;
  e << YAML::Key << "kv_pairs" << YAML::Value << c.task.kv_pairs;
  e << YAML::Key << "mask_all_positions" << YAML::Value << c.task.mask_all_positions;
  e << YAML::EndMap;
  e << YAML::Key << "eval" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "min_length" << YAML::Value << c.eval.min_length;
  e << YAML::Key << "max_length" << YAML::Value << c.eval.max_length;
  e << YAML::Key << "samples" << YAML::Value << c.eval.samples;
  e << YAML::Key << "interval" << YAML::Value << c.eval.interval;
  e << YAML::EndMap;
  e << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "steps" << YAML::Value << c.train.steps;
  e << YAML::Key << "batch_size" << YAML::Value << c.train.batch_size;
  e << YAML::Key << "lr" << YAML::Value << real(c.train.lr);
  e << YAML::Key << "warmup_steps" << YAML::Value << c.train.warmup_steps;
  e << YAML::Key << "lr_floor" << YAML::Value << real(c.train.lr_floor);
  e << YAML::Key << "weight_decay" << YAML::Value << real(c.train.adamw.weight_decay);
  e << YAML::Key << "beta1" << YAML::Value << real(c.train.adamw.beta1);
  e << YAML::Key << "beta2" << YAML::Value << real(c.train.adamw.beta2);
  e << YAML::Key << "eps" << YAML::Value << real(c.train.adamw.eps);
  e << YAML::Key << "mask_all_positions" << YAML::Value << c.train.mask_all_positions;
  e << YAML::Key << "stop_scaled_accuracy" << YAML::Value << real(c.train.stop_scaled_accuracy);
  e << YAML::Key << "stop_mse" << YAML::Value << real(c.train.stop_mse);
  e << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace xlstm
