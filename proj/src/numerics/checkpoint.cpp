#include "cta/checkpoint.hpp"

#include <fstream>

#include "cta/binary_io.hpp"
#include "cta/errors.hpp"

namespace cta {

namespace {
constexpr char kMagic[5] = {'C', 'T', 'A', 'K', '1'};
}

void save_checkpoint(const std::filesystem::path& path, const ParameterList& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  for (const NamedTensor& p : params) {
    le::write<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    le::write<std::uint32_t>(os, static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) le::write<std::uint64_t>(os, d);
    for (double v : p.tensor.data()) le::write<double>(os, v);
  }
  if (!os) throw FormatError("failed writing checkpoint: " + path.string());
}

ParameterList load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path.string());
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("bad checkpoint magic in " + path.string());
  }
  const std::string what = "checkpoint " + path.string();
  ParameterList params;
  std::uint32_t name_len = 0;
  while (le::read(is, name_len)) {
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw FormatError("truncated data in " + what);
    const auto rank = le::read_or_throw<std::uint32_t>(is, what);
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape.push_back(static_cast<std::size_t>(le::read_or_throw<std::uint64_t>(is, what)));
    }
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = le::read_or_throw<double>(is, what + " (" + name + ")");
    params.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values))});
  }
  return params;
}

void assign_parameters(ParameterList& params, const ParameterList& loaded) {
  const std::size_t n = std::min(params.size(), loaded.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (params[i].name != loaded[i].name) {
      throw FormatError("checkpoint mismatch at parameter '" + params[i].name +
                        "': checkpoint has '" + loaded[i].name + "'");
    }
    if (params[i].tensor.shape() != loaded[i].tensor.shape()) {
      throw FormatError("checkpoint mismatch at parameter '" + params[i].name + "': shape " +
                        shape_str(loaded[i].tensor.shape()) + ", model expects " +
                        shape_str(params[i].tensor.shape()));
    }
  }
  if (params.size() != loaded.size()) {
    const std::string first =
        params.size() > n ? params[n].name : loaded[n].name;
    throw FormatError("checkpoint mismatch at parameter '" + first + "': checkpoint has " +
                      std::to_string(loaded.size()) + " parameters, model has " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = params[i].tensor.mutable_data();
    auto src = loaded[i].tensor.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace cta
