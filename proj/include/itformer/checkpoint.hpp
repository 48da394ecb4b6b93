#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "itformer/params.hpp"

namespace itf {

/// Binary checkpoint:
///   "ITCK" | version u32 | count u32 | per parameter:
///   name length u16 | UTF-8 name | rank u32 | dims u32×rank | f64 payload (little-endian)
/// Trainability is carried by the name: parameters under "psi." are the alignment module.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Array value;
};

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into `params`. Every parameter must be present with the
/// same shape; a mismatch raises ConfigError naming the parameter.
void load_checkpoint(const std::filesystem::path& path, ParameterSet& params);

bool is_alignment_parameter(const std::string& name);

}  // namespace itf
