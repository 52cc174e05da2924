// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xlstm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "xlstm/config.hpp"
#include "xlstm/error.hpp"

namespace xlstm {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError(std::string("checkpoint truncated in ") + what);
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n, const char* what) {
  if (n > (std::uint64_t(1) << 32)) throw IoError(std::string("checkpoint ") + what + " length is implausible");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), std::streamsize(n))) throw IoError(std::string("checkpoint truncated in ") + what);
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& model) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string header = model_to_yaml(model.config) + "\n";
  put<std::uint64_t>(out, header.size());
  out.write(header.data(), std::streamsize(header.size()));
  const ParamList params = param_list(const_cast<ModelParams&>(model));
  put<std::uint64_t>(out, params.size());
  for (const ParamRef& p : params) {
    put<std::uint32_t>(out, std::uint32_t(p.name.size()));
    out.write(p.name.data(), std::streamsize(p.name.size()));
    put<std::uint32_t>(out, std::uint32_t(p.tensor->rank()));
    for (std::size_t d : p.tensor->shape()) put<std::uint64_t>(out, d);
    for (Scalar v : p.tensor->values()) put<double>(out, double(v));
  }
  if (!out) throw IoError("checkpoint write failed");
}

ModelParams read_checkpoint(std::istream& in) {
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw IoError("not a checkpoint file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const std::string header = get_bytes(in, get<std::uint64_t>(in, "header"), "header");
  ModelParams model = ModelParams::zeros(model_from_yaml(header));

  std::map<std::string, ParamRef> by_name;
  for (const ParamRef& p : param_list(model)) by_name.emplace(p.name, p);
  const auto count = get<std::uint64_t>(in, "tensor count");
  if (count != by_name.size()) {
    throw IoError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                  std::to_string(by_name.size()));
  }
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::string name = get_bytes(in, get<std::uint32_t>(in, "name"), "name");
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError("checkpoint tensor '" + name + "' is not a model parameter");
    Tensor& t = *it->second.tensor;
    const auto rank = get<std::uint32_t>(in, "rank");
    Shape shape(rank);
    for (auto& d : shape) d = std::size_t(get<std::uint64_t>(in, "dims"));
    if (shape != t.shape()) {
      throw IoError("checkpoint tensor '" + name + "' has shape " + shape_string(shape) + ", model expects " +
                    shape_string(t.shape()));
    }
    for (Scalar& v : t.values()) v = Scalar(get<double>(in, "values"));
    by_name.erase(it);
  }
  return model;
}

void save_checkpoint(const std::string& path, const ModelParams& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_checkpoint(out, model);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace xlstm
