// SPDX-License-Identifier: Apache-2.0
#include "autoprog/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace autoprog {

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'A', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error(path + ": checkpoint truncated while reading " + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, ckpt.optimizer_step);
  write_pod(out, static_cast<std::uint32_t>(ckpt.config_text.size()));
  out.write(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
  write_pod(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, t] : ckpt.params) {
    write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) write_pod(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error(path + ": bad magic, not an APCK checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in, path, "version");
  if (version != kVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.optimizer_step = read_pod<std::uint64_t>(in, path, "optimizer step");
  const auto cfg_len = read_pod<std::uint32_t>(in, path, "config length");
  ckpt.config_text.resize(cfg_len);
  in.read(ckpt.config_text.data(), cfg_len);
  if (!in) throw std::runtime_error(path + ": checkpoint truncated while reading config");
  const auto tensor_count = read_pod<std::uint32_t>(in, path, "tensor count");
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in, path, "tensor name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error(path + ": checkpoint truncated while reading tensor name");
    const auto ndim = read_pod<std::uint32_t>(in, path, "tensor rank");
    std::vector<int> shape;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      shape.push_back(static_cast<int>(read_pod<std::uint32_t>(in, path, "tensor dim")));
    }
    std::vector<float> data(shape_numel(shape));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!in) {
      throw std::runtime_error(path + ": checkpoint truncated while reading tensor " + name);
    }
    ckpt.params.add(name, Tensor::from_data(std::move(shape), std::move(data),
                                            /*requires_grad=*/true));
  }
  return ckpt;
}

}  // namespace autoprog
