#include "itformer/params.hpp"

#include <cmath>
#include <cstring>

#include "itformer/errors.hpp"

namespace itf {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * 3.14159265358979323846 * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Parameter& ParameterSet::add(const std::string& name, Array value, bool trainable) {
  if (index_.count(name)) throw InvariantError("duplicate parameter name " + name);
  index_[name] = params_.size();
  params_.push_back(Parameter{name, std::move(value), trainable});
  return params_.back();
}

Parameter& ParameterSet::add_uniform(const std::string& name, Shape shape, std::size_t fan_in, bool trainable,
                                     Rng& rng) {
  Array value(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : value.data()) v = rng.uniform(-bound, bound);
  return add(name, std::move(value), trainable);
}

Parameter* ParameterSet::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

const Parameter* ParameterSet::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

Parameter& ParameterSet::at(const std::string& name) {
  auto* p = find(name);
  if (!p) throw InvariantError("no parameter named " + name);
  return *p;
}

std::size_t ParameterSet::count(bool trainable) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.trainable == trainable) n += p.value.size();
  return n;
}

std::size_t ParameterSet::total() const { return count(true) + count(false); }

std::uint64_t ParameterSet::checksum(bool trainable) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* bytes, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : params_) {
    if (p.trainable != trainable) continue;
    feed(p.name.data(), p.name.size());
    feed(p.value.data().data(), p.value.size() * sizeof(double));
  }
  return h;
}

}  // namespace itf
