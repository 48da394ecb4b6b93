#include "itformer/series_io.hpp"

#include "binary_io.hpp"
#include "itformer/errors.hpp"

namespace itf {

void write_series(const std::filesystem::path& path, const Array& values) {
  if (values.rank() != 2) throw DimensionError("write_series: expected L×V, got " + to_string(values.shape()));
  std::string out = "ITTS";
  out.reserve(16 + values.size() * 4);
  detail::put_le<std::uint32_t>(out, kSeriesVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(values.dim(0)));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(values.dim(1)));
  for (double v : values.data()) detail::put_le<float>(out, static_cast<float>(v));
  detail::write_file_atomic(path, out);
}

Array read_series(const std::filesystem::path& path) {
  detail::ByteReader in(detail::read_file(path), path.string());
  if (in.get_string(4) != "ITTS") throw IoError(path.string() + ": not a series file (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kSeriesVersion)
    throw IoError(path.string() + ": unsupported series version " + std::to_string(version));
  const auto length = in.get<std::uint32_t>();
  const auto channels = in.get<std::uint32_t>();
  if (length == 0 || channels == 0) throw IoError(path.string() + ": empty series");
  std::vector<double> data(static_cast<std::size_t>(length) * channels);
  for (auto& v : data) v = static_cast<double>(in.get<float>());
  if (!in.at_end()) throw IoError(path.string() + ": trailing bytes after payload");
  return Array({length, channels}, std::move(data));
}

}  // namespace itf
