#include "ragcode/param_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "ragcode/corpus.hpp"

namespace ragcode::param_io {

namespace {

template <typename T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

template <typename T>
void put(std::ofstream& out, T v) {
  v = to_le(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error(path.string() + ": truncated parameter file");
  return to_le(v);
}

}  // namespace

void write(const std::filesystem::path& path, const FlatFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(file.magic.data(), 4);
  put<std::uint32_t>(out, file.version);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(file.header.size()));
  for (std::uint32_t h : file.header) put(out, h);
  put<std::uint64_t>(out, file.values.size());
  for (float v : file.values) put(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw Error("failed writing " + path.string());
}

FlatFile read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  FlatFile f;
  if (!in.read(f.magic.data(), 4)) throw Error(path.string() + ": truncated parameter file");
  f.version = get<std::uint32_t>(in, path);
  const auto n_header = get<std::uint32_t>(in, path);
  if (n_header > 64) throw Error(path.string() + ": implausible header length");
  f.header.resize(n_header);
  for (auto& h : f.header) h = get<std::uint32_t>(in, path);
  const auto n_values = get<std::uint64_t>(in, path);
  if (n_values > (std::uint64_t{1} << 32)) throw Error(path.string() + ": implausible value count");
  f.values.resize(n_values);
  for (float& v : f.values) v = std::bit_cast<float>(get<std::uint32_t>(in, path));
  return f;
}

void pack(std::span<const std::span<const double>> tensors, std::vector<float>& out) {
  for (auto t : tensors)
    for (double v : t) out.push_back(static_cast<float>(v));
}

std::size_t unpack(std::span<const float> values, std::size_t offset, std::span<const std::span<double>> tensors) {
  for (auto t : tensors) {
    if (offset + t.size() > values.size()) throw Error("parameter file holds fewer values than the model needs");
    for (double& v : t) v = values[offset++];
  }
  return offset;
}

}  // namespace ragcode::param_io
