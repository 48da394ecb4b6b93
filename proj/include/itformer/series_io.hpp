#pragma once

#include <filesystem>

#include "itformer/array.hpp"

namespace itf {

/// Series file: "ITTS" | version u32 | L u32 | V u32 | L·V f32 little-endian, time-major.
inline constexpr std::uint32_t kSeriesVersion = 1;

/// Writes an L×V array (values narrowed to f32).
void write_series(const std::filesystem::path& path, const Array& values);
/// Reads an L×V array, promoting to f64.
Array read_series(const std::filesystem::path& path);

}  // namespace itf
