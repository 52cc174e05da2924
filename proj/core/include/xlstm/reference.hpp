// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

// Unstabilized forms of the sLSTM and mLSTM recurrences: raw exponential gates, no stabilizer
// state. They overflow for large pre-activations and exist only as comparison baselines for the
// stabilized kernels.

#pragma once

#include "xlstm/mlstm.hpp"
#include "xlstm/slstm.hpp"
#include "xlstm/tensor.hpp"

namespace xlstm {

/// Hidden sequence [T x d] of the sLSTM cell from a zero initial state.
Tensor slstm_unstabilized_forward(const SLstmParams& params, const Tensor& x_seq);

/// H-tilde [T x d] of the mLSTM recurrence with denominator max(|n^T q|, threshold).
Tensor mlstm_core_unstabilized(const MLstmCoreInputs& inputs, std::size_t num_heads, GateActivation forget_gate,
                               Scalar threshold = Scalar(1));

/// Cell output [T x d] (output gate applied when enabled).
Tensor mlstm_unstabilized_forward(const MLstmParams& params, const Tensor& x_seq, Scalar threshold = Scalar(1));

}  // namespace xlstm
