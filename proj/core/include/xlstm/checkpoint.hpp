// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

// Checkpoint files. All integers and values are little-endian.
//
//   magic        8 bytes  "XLSTMCKP"
//   version      u32      1
//   header_len   u64
//   header       header_len bytes of YAML (the model section of the run config)
//   count        u64      number of tensors
//   per tensor, in declaration order:
//     name_len   u32, name bytes
//     rank       u32, dims u64[rank]
//     values     f64[prod(dims)], row-major

#pragma once

#include <iosfwd>
#include <string>

#include "xlstm/model.hpp"

namespace xlstm {

inline constexpr char kCheckpointMagic[8] = {'X', 'L', 'S', 'T', 'M', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const ModelParams& model);
/// Rebuilds the model from the header, then fills every tensor by name. Throws IoError on a bad
/// magic, truncation, a missing or unknown tensor, or a shape mismatch.
ModelParams read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const ModelParams& model);
ModelParams load_checkpoint(const std::string& path);

}  // namespace xlstm
