// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xlstm/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xlstm/error.hpp"

namespace xlstm {

std::string_view to_string(BlockKind kind) { return kind == BlockKind::SLstm ? "slstm" : "mlstm"; }

std::vector<std::size_t> slstm_positions_for_ratio(std::size_t n, std::size_t a, std::size_t b) {
  if (a + b == 0) throw ConfigError("model.ratio", "ratio a:b must not be 0:0");
  const std::size_t count = n * b / (a + b);
  const std::size_t start = n * a / (a + b);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(start + k * (n - start) / count);
  return out;
}

void StackConfig::validate() const {
  if (num_blocks == 0) throw ConfigError("model.num_blocks", "must be at least 1");
  if (embedding_dim == 0) throw ConfigError("model.embedding_dim", "must be positive");
  if ((vocab_size == 0) == (input_dim == 0)) {
    throw ConfigError("model.vocab_size", "exactly one of vocab_size and input_dim must be set");
  }
  if (outputs() == 0) throw ConfigError("model.output_dim", "output width must be positive");
  if (tie_weights && (!token_input() || outputs() != vocab_size)) {
    throw ConfigError("model.tie_weights", "weight tying needs a token model with vocab_size outputs");
  }
  for (std::size_t pos : slstm_positions) {
    if (pos >= num_blocks) {
      throw ConfigError("model.slstm_positions", "position " + std::to_string(pos) + " outside [0, " +
                                                     std::to_string(num_blocks) + ")");
    }
  }
  if (ratio_mlstm + ratio_slstm == 0) throw ConfigError("model.ratio", "ratio a:b must not be 0:0");
}

std::vector<BlockKind> StackConfig::layout() const {
  std::vector<BlockKind> kinds(num_blocks, BlockKind::MLstm);
  const std::vector<std::size_t> pos =
      slstm_positions.empty() ? slstm_positions_for_ratio(num_blocks, ratio_mlstm, ratio_slstm) : slstm_positions;
  for (std::size_t p : pos) {
    if (p >= num_blocks) throw ConfigError("model.slstm_positions", "position outside the stack");
    kinds[p] = BlockKind::SLstm;
  }
  return kinds;
}

ModelParams ModelParams::zeros(const StackConfig& c) {
  c.validate();
  ModelParams m;
  m.config = c;
  const std::size_t d = c.embedding_dim;
  if (c.token_input()) {
    m.embedding = Tensor({c.vocab_size, d});
  } else {
    m.input_proj = Tensor({d, c.input_dim});
    m.input_bias = Tensor({d});
  }
  for (BlockKind kind : c.layout()) {
    BlockParams b;
    b.kind = kind;
    if (kind == BlockKind::SLstm) b.slstm = SLstmBlockParams::zeros(d, c.slstm);
    else b.mlstm = MLstmBlockParams::zeros(d, c.mlstm);
    m.blocks.push_back(std::move(b));
  }
  m.norm_gain = Tensor({d}, Scalar(1));
  m.norm_shift = Tensor({d});
  if (!c.tie_weights) m.head = Tensor({c.outputs(), d});
  if (c.output_dim != 0) m.head_bias = Tensor({c.outputs()});
  return m;
}

ModelParams ModelParams::init(const StackConfig& c, Rng& rng) {
  ModelParams m = zeros(c);
  const std::size_t d = c.embedding_dim;
  if (c.token_input()) rng.fill_normal(m.embedding, 0.0, 0.02);
  else rng.fill_truncated_normal(m.input_proj, 0.0, std::sqrt(0.4 / double(c.input_dim)), 2.0);
  for (BlockParams& b : m.blocks) {
    if (b.kind == BlockKind::SLstm) b.slstm = SLstmBlockParams::init(d, c.slstm, rng);
    else b.mlstm = MLstmBlockParams::init(d, c.mlstm, rng);
  }
  if (!m.head.empty()) rng.fill_truncated_normal(m.head, 0.0, std::sqrt(0.4 / double(d)), 2.0);
  return m;
}

void ModelParams::collect(ParamList& out, const std::string& prefix) {
  if (config.token_input()) {
    out.push_back({prefix + "embedding", &embedding, false});
  } else {
    out.push_back({prefix + "input_proj", &input_proj});
    out.push_back({prefix + "input_bias", &input_bias, false});
  }
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const std::string p = prefix + "blocks." + std::to_string(k) + "." + std::string(to_string(blocks[k].kind)) + ".";
    if (blocks[k].kind == BlockKind::SLstm) blocks[k].slstm.collect(out, p);
    else blocks[k].mlstm.collect(out, p);
  }
  out.push_back({prefix + "final_norm.gain", &norm_gain, false});
  out.push_back({prefix + "final_norm.shift", &norm_shift, false});
  if (!head.empty()) out.push_back({prefix + "head", &head});
  if (!head_bias.empty()) out.push_back({prefix + "head_bias", &head_bias, false});
}

std::size_t count_parameters(const StackConfig& c) {
  c.validate();
  const std::size_t d = c.embedding_dim;
  std::size_t total = c.token_input() ? c.vocab_size * d : d * c.input_dim + d;
  const std::size_t heads_s = c.slstm.num_heads;
  const std::size_t slstm_block =
      2 * d + (c.slstm.conv_kernel > 0 ? c.slstm.conv_kernel * d + d : 0) +
      4 * linear_param_count(d, d, c.slstm.block_diagonal_input ? heads_s : 1, true) + 4 * d * d / heads_s + 2 * d +
      3 * c.slstm.mlp_dim(d) * d;
  const std::size_t inner = d * c.mlstm.proj_factor, hm = c.mlstm.num_heads;
  const std::size_t mlstm_block = 2 * d + 2 * inner * d + c.mlstm.conv_kernel * inner + inner +
                                  3 * linear_param_count(inner, inner, inner / c.mlstm.qkv_block_size, false) +
                                  2 * (hm * 3 * inner + hm) + 2 * inner + inner + d * inner;
  for (BlockKind kind : c.layout()) total += kind == BlockKind::SLstm ? slstm_block : mlstm_block;
  total += 2 * d;
  if (!c.tie_weights) total += c.outputs() * d;
  if (c.output_dim != 0) total += c.outputs();
  return total;
}

namespace {

ModelOutput forward_embedded(const ModelParams& m, Tensor h, ModelCache cache) {
  cache.blocks.resize(m.blocks.size());
  for (std::size_t k = 0; k < m.blocks.size(); ++k) {
    BlockCache& bc = cache.blocks[k];
    bc.kind = m.blocks[k].kind;
    if (bc.kind == BlockKind::SLstm) {
      SLstmBlockResult r = slstm_block_forward(m.blocks[k].slstm, h);
      h = std::move(r.y);
      bc.slstm = std::move(r.cache);
    } else {
      MLstmBlockResult r = mlstm_block_forward(m.blocks[k].mlstm, h);
      h = std::move(r.y);
      bc.mlstm = std::move(r.cache);
    }
  }
  cache.final_hidden = group_norm(h, 1, m.norm_gain, m.norm_shift, kNormEps, &cache.final_norm);
  ModelOutput out;
  out.logits = linear(cache.final_hidden, m.config.tie_weights ? m.embedding : m.head, m.head_bias);
  out.cache = std::move(cache);
  return out;
}

}  // namespace

ModelOutput model_forward(const ModelParams& m, std::span<const std::int32_t> tokens) {
  if (!m.config.token_input()) throw ShapeError("model_forward: this model takes real-vector inputs");
  if (tokens.empty()) throw ShapeError("model_forward: empty token sequence");
  const std::size_t d = m.config.embedding_dim, vocab = m.config.vocab_size;
  Tensor h({tokens.size(), d});
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const std::int32_t id = tokens[t];
    if (id < 0 || std::size_t(id) >= vocab) {
      throw ShapeError("model_forward: token id " + std::to_string(id) + " at position " + std::to_string(t) +
                       " outside vocabulary of size " + std::to_string(vocab));
    }
    std::copy_n(m.embedding.data() + std::size_t(id) * d, d, h.data() + t * d);
  }
  ModelCache cache;
  cache.tokens.assign(tokens.begin(), tokens.end());
  return forward_embedded(m, std::move(h), std::move(cache));
}

ModelOutput model_forward(const ModelParams& m, const Tensor& x) {
  if (m.config.token_input()) throw ShapeError("model_forward: this model takes token inputs");
  if (x.rank() != 2 || x.dim(1) != m.config.input_dim || x.dim(0) == 0) {
    throw ShapeError("model_forward: input " + shape_string(x.shape()) + " does not match input_dim " +
                     std::to_string(m.config.input_dim));
  }
  ModelCache cache;
  cache.inputs = x;
  return forward_embedded(m, linear(x, m.input_proj, m.input_bias), std::move(cache));
}

void model_backward_acc(const ModelParams& m, const ModelCache& cache, const Tensor& grad_logits, ModelParams& g) {
  if (cache.blocks.size() != m.blocks.size() || cache.final_hidden.empty()) {
    throw CacheMismatchError("model_backward: cache does not match the model");
  }
  const std::size_t steps = cache.final_hidden.dim(0), d = m.config.embedding_dim;
  require_shape(grad_logits, {steps, m.config.outputs()}, "model_backward upstream");
  Tensor d_final({steps, d});
  if (m.config.tie_weights) {
    linear_backward_acc(cache.final_hidden, m.embedding, grad_logits, &d_final, &g.embedding, nullptr);
  } else {
    linear_backward_acc(cache.final_hidden, m.head, grad_logits, &d_final, &g.head,
                        m.head_bias.empty() ? nullptr : &g.head_bias);
  }
  Tensor d_h({steps, d});
  group_norm_backward_acc(cache.final_norm, 1, m.norm_gain, d_final, &d_h, &g.norm_gain, &g.norm_shift);
  for (std::size_t k = m.blocks.size(); k-- > 0;) {
    const BlockCache& bc = cache.blocks[k];
    if (bc.kind != m.blocks[k].kind) throw CacheMismatchError("model_backward: block kind mismatch");
    if (bc.kind == BlockKind::SLstm) d_h = slstm_block_backward(m.blocks[k].slstm, bc.slstm, d_h, g.blocks[k].slstm);
    else d_h = mlstm_block_backward(m.blocks[k].mlstm, bc.mlstm, d_h, g.blocks[k].mlstm);
  }
  if (m.config.token_input()) {
    for (std::size_t t = 0; t < cache.tokens.size(); ++t) {
      Scalar* row = g.embedding.data() + std::size_t(cache.tokens[t]) * d;
      const Scalar* src = d_h.data() + t * d;
      for (std::size_t c = 0; c < d; ++c) row[c] += src[c];
    }
  } else {
    linear_backward_acc(cache.inputs, m.input_proj, d_h, nullptr, &g.input_proj, &g.input_bias);
  }
}

ModelParams model_backward(const ModelParams& m, const ModelCache& cache, const Tensor& grad_logits) {
  ModelParams g = zeros_like_params(m);
  model_backward_acc(m, cache, grad_logits, g);
  return g;
}

}  // namespace xlstm
