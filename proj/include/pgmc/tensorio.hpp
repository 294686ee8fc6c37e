#pragma once

// Minimal named-tensor container for checkpoints: a flat binary file holding
// (name, shape, f64 data) records. Native byte order; checkpoints are a
// same-platform convenience, not an interchange format.

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "pgmc/errors.hpp"

namespace pgmc {

struct Tensor {
  std::vector<std::uint64_t> shape;
  std::vector<double> data;

  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

using TensorMap = std::map<std::string, Tensor>;

namespace detail {

inline constexpr char kTensorMagic[8] = {'P', 'G', 'M', 'C', 'T', 'N', 'S', 'R'};

template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError(path + ": truncated tensor file");
  return v;
}

}  // namespace detail

inline void save_tensors(const std::string& path, const TensorMap& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write tensor file " + path);
  out.write(detail::kTensorMagic, 8);
  detail::write_raw<std::uint32_t>(out, 1);  // version
  detail::write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    if (tensor.element_count() != tensor.data.size()) {
      throw DimensionError("tensor '" + name + "': shape does not match data size");
    }
    detail::write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.shape.size()));
    for (auto d : tensor.shape) detail::write_raw<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.data.size() * sizeof(double)));
  }
  if (!out) throw IoError("short write to " + path);
}

inline TensorMap load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open tensor file " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != std::string(detail::kTensorMagic, 8)) {
    throw FormatError(path + ": bad tensor magic");
  }
  const auto version = detail::read_raw<std::uint32_t>(in, path);
  if (version != 1) throw FormatError(path + ": unsupported tensor version");
  const auto count = detail::read_raw<std::uint32_t>(in, path);
  TensorMap tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = detail::read_raw<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw FormatError(path + ": truncated tensor name");
    Tensor tensor;
    const auto ndim = detail::read_raw<std::uint32_t>(in, path);
    tensor.shape.resize(ndim);
    for (auto& d : tensor.shape) d = detail::read_raw<std::uint64_t>(in, path);
    tensor.data.resize(tensor.element_count());
    in.read(reinterpret_cast<char*>(tensor.data.data()),
            static_cast<std::streamsize>(tensor.data.size() * sizeof(double)));
    if (!in) throw FormatError(path + ": truncated tensor data for '" + name + "'");
    tensors.emplace(std::move(name), std::move(tensor));
  }
  return tensors;
}

}  // namespace pgmc
