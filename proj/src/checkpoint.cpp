#include "itformer/checkpoint.hpp"

#include <limits>

#include "binary_io.hpp"
#include "itformer/errors.hpp"

namespace itf {

bool is_alignment_parameter(const std::string& name) { return name.rfind("psi.", 0) == 0; }

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  std::string out = "ITCK";
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.all().size()));
  for (const auto& p : params.all()) {
    if (p.name.size() > std::numeric_limits<std::uint16_t>::max())
      throw InvariantError("parameter name too long: " + p.name);
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(p.name.size()));
    out += p.name;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : p.value.data()) detail::put_le<double>(out, v);
  }
  detail::write_file_atomic(path, out);
}

std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path) {
  detail::ByteReader in(detail::read_file(path), path.string());
  if (in.get_string(4) != "ITCK") throw IoError(path.string() + ": not a checkpoint (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>();
  std::vector<NamedArray> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray entry;
    entry.name = in.get_string(in.get<std::uint16_t>());
    const auto rank = in.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = in.get<std::uint32_t>();
    std::vector<double> data(element_count(shape));
    for (auto& v : data) v = in.get<double>();
    try {
      entry.value = Array(std::move(shape), std::move(data));
    } catch (const DimensionError& e) {
      throw IoError(path.string() + ": parameter " + entry.name + ": " + e.what());
    }
    out.push_back(std::move(entry));
  }
  if (!in.at_end()) throw IoError(path.string() + ": trailing bytes after last parameter");
  return out;
}

void load_checkpoint(const std::filesystem::path& path, ParameterSet& params) {
  auto entries = read_checkpoint(path);
  if (entries.size() != params.all().size())
    throw ConfigError("checkpoint", path.string() + " holds " + std::to_string(entries.size()) +
                                        " parameters, model expects " + std::to_string(params.all().size()));
  for (auto& e : entries) {
    Parameter* p = params.find(e.name);
    if (!p) throw ConfigError(e.name, "checkpoint parameter not present in the configured model");
    if (p->value.shape() != e.value.shape())
      throw ConfigError(e.name, "checkpoint shape " + to_string(e.value.shape()) + " but model expects " +
                                    to_string(p->value.shape()));
    p->value = std::move(e.value);
  }
}

}  // namespace itf
