#include "metanas/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "metanas/errors.hpp"

namespace metanas {

namespace {

constexpr char kMagic[4] = {'B', 'M', 'C', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw IoError(std::string("checkpoint: truncated while reading ") + what);
  }
  return v;
}

void write_store(std::ostream& os, const ParamStore& store) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, t] : store) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) write_pod<std::int32_t>(os, d);
    write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(t.data.size()));
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
}

ParamStore read_store(std::istream& is) {
  ParamStore store;
  const auto count = read_pod<std::uint32_t>(is, "parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(is, "name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw IoError("checkpoint: truncated parameter name");
    const auto rank = read_pod<std::uint32_t>(is, "rank");
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(read_pod<std::int32_t>(is, "extent"));
    const auto numel = read_pod<std::uint64_t>(is, "element count");
    if (static_cast<std::int64_t>(numel) != shape_numel(shape)) {
      throw IoError("checkpoint: element count disagrees with shape for " + name);
    }
    std::vector<double> data(numel);
    if (!is.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(numel * sizeof(double)))) {
      throw IoError("checkpoint: truncated data for " + name);
    }
    store.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return store;
}

}  // namespace

void checkpoint_save(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  write_pod<std::uint32_t>(os, kVersion);
  write_pod<std::uint64_t>(os, ckpt.config_hash);
  write_pod<std::int32_t>(os, ckpt.epoch);
  write_pod<std::uint64_t>(os, ckpt.rng_seed);
  write_store(os, ckpt.params.values);
  write_store(os, ckpt.params.scales);
  if (!os) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4)) throw IoError("checkpoint: truncated while reading magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("checkpoint: corrupt header in " + path);
  }
  const auto version = read_pod<std::uint32_t>(is, "version");
  if (version != kVersion) {
    throw IoError("checkpoint: format version " + std::to_string(version) + " unsupported (want " +
                  std::to_string(kVersion) + ")");
  }
  Checkpoint ckpt;
  ckpt.config_hash = read_pod<std::uint64_t>(is, "config hash");
  ckpt.epoch = read_pod<std::int32_t>(is, "epoch");
  ckpt.rng_seed = read_pod<std::uint64_t>(is, "rng seed");
  ckpt.params.values = read_store(is);
  ckpt.params.scales = read_store(is);
  return ckpt;
}

}  // namespace metanas
