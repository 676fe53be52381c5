#pragma once

#include <filesystem>
#include <span>

#include "diagfuse/mask.hpp"
#include "diagfuse/tensor.hpp"

namespace diagfuse {

// TNS1: ASCII header "TNS1\n<ndim>\n<d0> <d1> ...\n" then little-endian
// float64 payload in row-major order.
void write_tns(const std::filesystem::path& path, const Tensor& t);
Tensor read_tns(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255). Masks store foreground as 255.
void write_pgm(const std::filesystem::path& path, const Mask& m);
// Soft values in [0,1] quantized to 8 bits.
void write_pgm(const std::filesystem::path& path, std::span<const double> values,
               std::size_t h, std::size_t w);
// Raw 8-bit pixels with their dimensions.
struct Gray8 {
  std::size_t h = 0, w = 0;
  std::vector<std::uint8_t> px;
};
Gray8 read_pgm(const std::filesystem::path& path);
// Foreground where pixel >= 128.
Mask read_pgm_mask(const std::filesystem::path& path);

}  // namespace diagfuse
