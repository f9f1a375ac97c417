#include "syncap/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace syncap::num {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'Y', 'N', 'C', 'A', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class U>
void put(std::ostream& out, U v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class U>
U get(std::istream& in, const std::filesystem::path& path) {
  U v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw IoError("truncated checkpoint: " + path.string());
  return v;
}

std::string read_header(std::istream& in, const std::filesystem::path& path) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("not a checkpoint file: " + path.string());
  if (get<std::uint32_t>(in, path) != kVersion)
    throw IoError("unsupported checkpoint version: " + path.string());
  const auto n = get<std::uint64_t>(in, path);
  std::string meta(n, '\0');
  if (!in.read(meta.data(), static_cast<std::streamsize>(n)))
    throw IoError("truncated checkpoint: " + path.string());
  return meta;
}

}  // namespace

template <class T>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<T>& params,
                     const std::string& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 8);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, metadata.size());
  out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(out, sizeof(T));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rows));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.cols));
    out.write(reinterpret_cast<const char*>(p.value.data.data()),
              static_cast<std::streamsize>(p.value.data.size() * sizeof(T)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

template <class T>
std::string load_checkpoint(const std::filesystem::path& path, ParamStore<T>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string meta = read_header(in, path);
  const auto count = get<std::uint32_t>(in, path);
  if (count != params.size())
    throw IoError("checkpoint has " + std::to_string(count) + " tensors, model expects " +
                  std::to_string(params.size()));
  for (auto& p : params) {
    const auto len = get<std::uint32_t>(in, path);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw IoError("truncated checkpoint: " + path.string());
    const auto width = get<std::uint32_t>(in, path);
    const auto rows = get<std::uint32_t>(in, path);
    const auto cols = get<std::uint32_t>(in, path);
    if (name != p.name || static_cast<int>(rows) != p.value.rows ||
        static_cast<int>(cols) != p.value.cols)
      throw IoError("checkpoint tensor " + name + " does not match parameter " + p.name);
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    if (width == 4) {
      std::vector<float> buf(n);
      if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4)))
        throw IoError("truncated checkpoint: " + path.string());
      for (std::size_t i = 0; i < n; ++i) p.value.data[i] = static_cast<T>(buf[i]);
    } else if (width == 8) {
      std::vector<double> buf(n);
      if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 8)))
        throw IoError("truncated checkpoint: " + path.string());
      for (std::size_t i = 0; i < n; ++i) p.value.data[i] = static_cast<T>(buf[i]);
    } else {
      throw IoError("unsupported element width in checkpoint: " + std::to_string(width));
    }
  }
  return meta;
}

std::string read_checkpoint_metadata(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return read_header(in, path);
}

template void save_checkpoint(const std::filesystem::path&, const ParamStore<float>&,
                              const std::string&);
template void save_checkpoint(const std::filesystem::path&, const ParamStore<double>&,
                              const std::string&);
template std::string load_checkpoint(const std::filesystem::path&, ParamStore<float>&);
template std::string load_checkpoint(const std::filesystem::path&, ParamStore<double>&);

}  // namespace syncap::num
