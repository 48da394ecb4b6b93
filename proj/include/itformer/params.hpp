#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "itformer/array.hpp"
#include "itformer/rng.hpp"

namespace itf {

struct Parameter {
  std::string name;
  Array value;
  bool trainable = false;
};

/// Owns every named parameter of a model. Addresses stay valid for the
/// lifetime of the set, so modules may keep `Parameter*` handles.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  /// Registers a parameter initialized uniformly in ±1/√fan_in.
  Parameter& add_uniform(const std::string& name, Shape shape, std::size_t fan_in, bool trainable, Rng& rng);
  Parameter& add(const std::string& name, Array value, bool trainable);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  std::deque<Parameter>& all() { return params_; }
  const std::deque<Parameter>& all() const { return params_; }

  std::size_t count(bool trainable) const;
  std::size_t total() const;

  /// FNV-1a over names and raw payload bytes of the selected parameters.
  std::uint64_t checksum(bool trainable) const;

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

using GradientMap = std::map<std::string, Array>;

}  // namespace itf
