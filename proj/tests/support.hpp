#pragma once

// Shared fixtures for the unit tests and the acceptance runner.

#include <cstdint>
#include <filesystem>
#include <string>

#include "itformer/array.hpp"
#include "itformer/config.hpp"
#include "itformer/rng.hpp"

namespace support {

inline itf::Array random_array(itf::Shape shape, std::uint64_t seed, double scale = 1.0) {
  itf::Rng rng(seed);
  itf::Array a(std::move(shape));
  for (auto& v : a.data()) v = scale * rng.normal();
  return a;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("itformer_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// A configuration small enough for unit tests: 8 channels, 120-step cycles in
/// 2 windows, width 16, short reasoning windows.
inline itf::RunConfig tiny_config() {
  itf::RunConfig c;
  c.data.engines = 10;
  c.data.cycles = 6;
  c.data.window = 3;
  c.data.channels = 8;
  c.data.length = 120;
  c.data.counts = {40, 40, 40, 40};
  c.model.d = 16;
  c.model.channels = 8;
  c.model.patch_len = 60;
  c.model.stride = 60;
  c.model.encoder_layers = 1;
  c.model.encoder_heads = 2;
  c.model.encoder_hidden = 32;
  c.model.lit_len = 4;
  c.model.layers = 2;
  c.model.heads = 2;
  c.model.lm_layers = 1;
  c.model.lm_heads = 2;
  c.model.lm_hidden = 32;
  c.train.lm_pretrain_epochs = 0;
  return c;
}

/// Shell command with stdout/stderr discarded; returns the process exit code.
inline int run_quiet(const std::string& command) {
  const int status = std::system((command + " >/dev/null 2>&1").c_str());
  return status == -1 ? -1 : WEXITSTATUS(status);
}

}  // namespace support
