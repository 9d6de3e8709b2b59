#pragma once
// Flat little-endian float32 parameter files.
//
// Layout: 4-byte magic, u32 version, u32 header count, header count x u32
// (model dimensions), u64 value count, then the values as IEEE-754 binary32.
// Tensors are written back to back in the order the model enumerates them.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ragcode::param_io {

struct FlatFile {
  std::array<char, 4> magic{};
  std::uint32_t version = 0;
  std::vector<std::uint32_t> header;
  std::vector<float> values;
};

void write(const std::filesystem::path& path, const FlatFile& file);
FlatFile read(const std::filesystem::path& path);

/// Appends the tensors, narrowed to float32.
void pack(std::span<const std::span<const double>> tensors, std::vector<float>& out);
/// Fills the tensors from `values` starting at `offset`; returns the new
/// offset. Throws Error if there are too few values.
std::size_t unpack(std::span<const float> values, std::size_t offset, std::span<const std::span<double>> tensors);

}  // namespace ragcode::param_io
