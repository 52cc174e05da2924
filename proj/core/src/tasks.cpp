// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xlstm/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "xlstm/error.hpp"

namespace xlstm {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Parity: return "parity";
    case TaskKind::Mqar: return "mqar";
    case TaskKind::Nns: return "nns";
  }
  return "parity";
}

TaskKind task_kind_from_string(std::string_view name) {
  if (name == "parity") return TaskKind::Parity;
  if (name == "mqar") return TaskKind::Mqar;
  if (name == "nns") return TaskKind::Nns;
  throw ConfigError("task.kind", "unknown task '" + std::string(name) + "' (expected parity, mqar or nns)");
}

void TaskConfig::validate() const {
  if (kind != TaskKind::Mqar) {
    if (min_length < 1 || min_length > max_length) {
      throw ConfigError("task.min_length", "length range must satisfy 1 <= min_length <= max_length");
    }
    if (context != 0 && context < max_length + 1) {
      throw ConfigError("task.context", "context must hold max_length + 1 positions");
    }
    return;
  }
  if (vocab_size < 4 || vocab_size % 2 != 0) throw ConfigError("task.vocab_size", "MQAR vocabulary must be even and >= 4");
  if (kv_pairs == 0 || kv_pairs > vocab_size / 2 - 1) {
    throw ConfigError("task.kv_pairs", "kv_pairs must be in [1, vocab_size/2 - 1] (key vocabulary)");
  }
  const std::size_t ctx = padded_length();
  if (ctx < 2 * kv_pairs || (ctx - 2 * kv_pairs) / 2 < kv_pairs) {
    throw ConfigError("task.context", "context too short for the prefix and one query slot per key");
  }
}

std::size_t TaskConfig::padded_length() const {
  if (context != 0) return context;
  if (kind == TaskKind::Mqar) return 64;
  return max_length + 1;
}

std::size_t TaskConfig::model_vocab() const {
  switch (kind) {
    case TaskKind::Parity: return parity::kVocab;
    case TaskKind::Mqar: return vocab_size;
    case TaskKind::Nns: return 0;
  }
  return 0;
}

std::size_t TaskConfig::input_dim() const { return kind == TaskKind::Nns ? 3 : 0; }

double TaskConfig::random_baseline() const {
  switch (kind) {
    case TaskKind::Parity: return 0.5;
    case TaskKind::Mqar: return 2.0 / double(vocab_size);
    case TaskKind::Nns: return 0.0;
  }
  return 0.0;
}

std::span<const std::int32_t> TaskConfig::answer_classes() const {
  static constexpr std::int32_t kParityClasses[] = {parity::kA, parity::kB};
  if (kind == TaskKind::Parity) return kParityClasses;
  return {};
}

std::size_t TaskSample::evaluated_prefix() const {
  for (std::size_t t = mask.size(); t-- > 0;) {
    if (mask[t] != 0) return t + 1;
  }
  return 0;
}

TaskSample make_parity(const std::vector<std::int32_t>& symbols, std::size_t context, bool all_positions) {
  const std::size_t n = symbols.size();
  if (n == 0) throw ConfigError("task.min_length", "parity needs at least one symbol");
  if (context < n + 1) throw ConfigError("task.context", "context must hold the symbols and the answer slot");
  TaskSample s;
  s.kind = TaskKind::Parity;
  s.tokens.assign(context, parity::kPad);
  s.targets.assign(context, parity::kPad);
  s.mask.assign(context, Scalar(0));
  std::size_t bs = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (symbols[t] != parity::kA && symbols[t] != parity::kB) throw ShapeError("parity: symbols must be a or b");
    s.tokens[t] = symbols[t];
    bs += symbols[t] == parity::kB;
    if (all_positions) {
      s.targets[t] = bs % 2 == 0 ? parity::kA : parity::kB;
      s.mask[t] = Scalar(1);
    }
  }
  s.targets[n] = bs % 2 == 0 ? parity::kA : parity::kB;
  s.mask[n] = Scalar(1);
  s.length = n + 1;
  return s;
}

TaskSample gen_parity(const TaskConfig& c, Rng& rng) {
  c.validate();
  const std::size_t n = std::size_t(rng.uniform_int(std::int64_t(c.min_length), std::int64_t(c.max_length)));
  std::vector<std::int32_t> symbols(n);
  for (auto& x : symbols) x = std::int32_t(rng.uniform_int(0, 1));
  return make_parity(symbols, c.padded_length(), c.mask_all_positions);
}

TaskSample gen_mqar(const TaskConfig& c, Rng& rng) {
  c.validate();
  const std::size_t ctx = c.padded_length(), n = c.kv_pairs, half = c.vocab_size / 2;
  TaskSample s;
  s.kind = TaskKind::Mqar;
  s.tokens.assign(ctx, 0);
  s.targets.assign(ctx, 0);
  s.mask.assign(ctx, Scalar(0));
  s.length = ctx;

  std::vector<std::int32_t> keys, values;
  while (keys.size() < n) {
    const auto k = std::int32_t(rng.uniform_int(1, std::int64_t(half) - 1));
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }
  for (std::size_t i = 0; i < n; ++i) values.push_back(std::int32_t(rng.uniform_int(std::int64_t(half), std::int64_t(c.vocab_size) - 1)));
  for (std::size_t i = 0; i < n; ++i) {
    s.tokens[2 * i] = keys[i];
    s.tokens[2 * i + 1] = values[i];
  }

  const std::size_t slots = (ctx - 2 * n) / 2;
  std::vector<std::size_t> free(slots);
  for (std::size_t i = 0; i < slots; ++i) free[i] = i;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[std::size_t(rng.uniform_int(0, std::int64_t(i)))]);
  for (std::size_t q = 0; q < n; ++q) {
    double total = 0;
    for (std::size_t slot : free) total += 1.0 / double(slot + 1);
    double u = rng.uniform() * total;
    std::size_t pick = free.size() - 1;
    for (std::size_t i = 0; i < free.size(); ++i) {
      u -= 1.0 / double(free[i] + 1);
      if (u < 0) {
        pick = i;
        break;
      }
    }
    const std::size_t pos = 2 * n + 2 * free[pick];
    free.erase(free.begin() + std::ptrdiff_t(pick));
    const std::size_t which = order[q];
    s.tokens[pos] = keys[which];
    s.targets[pos] = values[which];
    s.mask[pos] = Scalar(1);
  }
  return s;
}

TaskSample gen_nns(const TaskConfig& c, Rng& rng) {
  c.validate();
  const std::size_t ctx = c.padded_length();
  const std::size_t n = std::size_t(rng.uniform_int(std::int64_t(c.min_length), std::int64_t(c.max_length)));
  TaskSample s;
  s.kind = TaskKind::Nns;
  s.inputs = Tensor({ctx, 3});
  s.target_values = Tensor({ctx, 1});
  s.mask.assign(ctx, Scalar(0));
  s.length = n + 1;
  for (std::size_t t = 0; t <= n; ++t) {
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    s.inputs(t, 0) = Scalar(std::cos(angle));
    s.inputs(t, 1) = Scalar(std::sin(angle));
    s.inputs(t, 2) = t == 0 ? Scalar(0) : Scalar(rng.uniform());
  }
  double best = -INFINITY;
  Scalar best_value = 0;
  for (std::size_t t = 1; t <= n; ++t) {
    const double sim = double(s.inputs(0, 0)) * s.inputs(t, 0) + double(s.inputs(0, 1)) * s.inputs(t, 1);
    if (sim > best) {
      best = sim;
      best_value = s.inputs(t, 2);
    }
    s.target_values(t, 0) = best_value;
    if (c.mask_all_positions || t == n) s.mask[t] = Scalar(1);
  }
  return s;
}

TaskSample generate(const TaskConfig& c, Rng& rng) {
  switch (c.kind) {
    case TaskKind::Parity: return gen_parity(c, rng);
    case TaskKind::Mqar: return gen_mqar(c, rng);
    case TaskKind::Nns: return gen_nns(c, rng);
  }
  throw ConfigError("task.kind", "unknown task");
}

double scaled_accuracy(double raw, double s_rand) {
  if (!(s_rand >= 0 && s_rand < 1)) throw Error("scaled_accuracy: random baseline must be in [0, 1)");
  if (!(raw >= 0 && raw <= 1)) throw Error("scaled_accuracy: raw accuracy must be in [0, 1]");
  return (raw - s_rand) / (1.0 - s_rand);
}

double scaled_accuracy(double raw, double s_rand, double floor) { return std::max(scaled_accuracy(raw, s_rand), floor); }

namespace {

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split(std::string_view text, std::string_view sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = text.find(sep, start);
    out.emplace_back(text.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + sep.size();
  }
  return out;
}

std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double parse_real(const std::string& w) {
  std::size_t used = 0;
  const double v = std::stod(w, &used);
  if (used != w.size()) throw Error("sample line: bad number '" + w + "'");
  return v;
}

std::int32_t parse_int(const std::string& w) {
  std::int32_t v = 0;
  const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
  if (ec != std::errc() || ptr != w.data() + w.size()) throw Error("sample line: bad integer '" + w + "'");
  return v;
}

}  // namespace

std::string to_line(const TaskSample& s) {
  std::string out(to_string(s.kind));
  out += ' ' + std::to_string(s.length) + " |";
  const std::size_t n = s.size();
  for (std::size_t t = 0; t < n; ++t) {
    if (s.kind == TaskKind::Nns) {
      out += ' ' + format_real(s.inputs(t, 0)) + ',' + format_real(s.inputs(t, 1)) + ',' + format_real(s.inputs(t, 2));
    } else {
      out += ' ' + std::to_string(s.tokens[t]);
    }
  }
  out += " |";
  for (std::size_t t = 0; t < n; ++t) {
    out += ' ' + (s.kind == TaskKind::Nns ? format_real(s.target_values(t, 0)) : std::to_string(s.targets[t]));
  }
  out += " | ";
  for (std::size_t t = 0; t < n; ++t) out += s.mask[t] != 0 ? '1' : '0';
  return out;
}

TaskSample sample_from_line(std::string_view line) {
  const std::vector<std::string> fields = split(line, " | ");
  if (fields.size() != 4) throw Error("sample line: expected 4 fields separated by ' | '");
  const std::vector<std::string> head = words(fields[0]);
  if (head.size() != 2) throw Error("sample line: header must be '<task> <length>'");
  TaskSample s;
  s.kind = task_kind_from_string(head[0]);
  s.length = std::size_t(parse_int(head[1]));
  const std::vector<std::string> in = words(fields[1]), tg = words(fields[2]);
  const std::string mask = fields[3];
  const std::size_t n = mask.size();
  if (in.size() != n || tg.size() != n) throw Error("sample line: inputs, targets and mask differ in length");
  for (char ch : mask) {
    if (ch != '0' && ch != '1') throw Error("sample line: mask must be 0/1 digits");
    s.mask.push_back(ch == '1' ? Scalar(1) : Scalar(0));
  }
  if (s.kind == TaskKind::Nns) {
    s.inputs = Tensor({n, 3});
    s.target_values = Tensor({n, 1});
    for (std::size_t t = 0; t < n; ++t) {
      const std::vector<std::string> parts = split(in[t], ",");
      if (parts.size() != 3) throw Error("sample line: NNS rows are 'x1,x2,value'");
      for (std::size_t c = 0; c < 3; ++c) s.inputs(t, c) = Scalar(parse_real(parts[c]));
      s.target_values(t, 0) = Scalar(parse_real(tg[t]));
    }
  } else {
    for (std::size_t t = 0; t < n; ++t) {
      s.tokens.push_back(parse_int(in[t]));
      s.targets.push_back(parse_int(tg[t]));
    }
  }
  return s;
}

}  // namespace xlstm
