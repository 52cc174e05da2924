// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

// xLSTM[a:b] stacks: input embedding, residual blocks, final LayerNorm and output head.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xlstm/blocks.hpp"
#include "xlstm/params.hpp"
#include "xlstm/rng.hpp"
#include "xlstm/tensor.hpp"

namespace xlstm {

enum class BlockKind { MLstm, SLstm };

std::string_view to_string(BlockKind kind);

/// sLSTM block positions for xLSTM[a:b] with `num_blocks` blocks: floor(n * b / (a + b)) sLSTM
/// blocks spread evenly (rounding down) over [floor(n * a / (a + b)), n).
std::vector<std::size_t> slstm_positions_for_ratio(std::size_t num_blocks, std::size_t ratio_mlstm,
                                                   std::size_t ratio_slstm);

struct StackConfig {
  std::size_t num_blocks = 2;
  std::size_t ratio_mlstm = 1;
  std::size_t ratio_slstm = 1;
  /// Explicit sLSTM positions; when non-empty they replace the ratio rule.
  std::vector<std::size_t> slstm_positions;
  std::size_t embedding_dim = 64;
  /// Token models set vocab_size; vector-input models set input_dim instead.
  std::size_t vocab_size = 0;
  std::size_t input_dim = 0;
  /// Output width; 0 means vocab_size logits. A non-zero value adds a head bias.
  std::size_t output_dim = 0;
  bool tie_weights = false;
  SLstmBlockConfig slstm;
  MLstmBlockConfig mlstm;

  void validate() const;
  std::vector<BlockKind> layout() const;
  std::size_t outputs() const { return output_dim == 0 ? vocab_size : output_dim; }
  bool token_input() const { return vocab_size > 0; }
};

struct BlockParams {
  BlockKind kind = BlockKind::MLstm;
  SLstmBlockParams slstm;
  MLstmBlockParams mlstm;
};

struct ModelParams {
  StackConfig config;
  Tensor embedding;               // [V x d]; token models
  Tensor input_proj, input_bias;  // [d x in], [d]; vector-input models
  std::vector<BlockParams> blocks;
  Tensor norm_gain, norm_shift;   // [d]
  Tensor head;                    // [out x d]; empty when tied to the embedding
  Tensor head_bias;               // [out]; only when output_dim is set

  static ModelParams zeros(const StackConfig& config);
  static ModelParams init(const StackConfig& config, Rng& rng);
  void collect(ParamList& out, const std::string& prefix = "");
};

/// Parameter count from the configuration alone (no allocation).
std::size_t count_parameters(const StackConfig& config);

struct BlockCache {
  BlockKind kind = BlockKind::MLstm;
  SLstmBlockCache slstm;
  MLstmBlockCache mlstm;
};

struct ModelCache {
  std::vector<std::int32_t> tokens;
  Tensor inputs;
  std::vector<BlockCache> blocks;
  GroupNormCache final_norm;
  Tensor final_hidden;  // output of the final norm
};

struct ModelOutput {
  Tensor logits;  // [T x outputs]
  ModelCache cache;
};

/// Throws ShapeError for out-of-range token ids.
ModelOutput model_forward(const ModelParams& model, std::span<const std::int32_t> tokens);
/// Vector-input models; x is [T x input_dim].
ModelOutput model_forward(const ModelParams& model, const Tensor& x);

/// Gradients for every parameter (same layout as the model).
ModelParams model_backward(const ModelParams& model, const ModelCache& cache, const Tensor& grad_logits);
/// Accumulating variant.
void model_backward_acc(const ModelParams& model, const ModelCache& cache, const Tensor& grad_logits,
                        ModelParams& grads);

}  // namespace xlstm
