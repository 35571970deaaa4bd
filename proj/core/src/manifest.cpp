#include "metanas/manifest.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metanas/errors.hpp"
#include "metanas/params.hpp"

namespace metanas {

std::uint64_t hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("manifest: cannot open " + path);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  char buf[65536];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    h = fnv1a_bytes(buf, static_cast<size_t>(is.gcount()), h);
    if (is.eof()) break;
  }
  return h;
}

void write_manifest(const std::string& out_dir, const std::string& config_json,
                    std::uint64_t seed, const std::vector<std::string>& output_files) {
  nlohmann::json manifest;
  manifest["version"] = kVersionString;
  manifest["seed"] = seed;
  manifest["config"] = nlohmann::json::parse(config_json);
  nlohmann::json outputs = nlohmann::json::object();
  for (const std::string& rel : output_files) {
    std::ostringstream hex;
    hex << std::hex << hash_file(out_dir + "/" + rel);
    outputs[rel] = hex.str();
  }
  manifest["outputs"] = outputs;

  const std::string path = out_dir + "/manifest.json";
  std::ofstream os(path);
  if (!os) throw IoError("manifest: cannot open " + path + " for writing");
  os << manifest.dump(2) << "\n";
  if (!os) throw IoError("manifest: write failed for " + path);
}

}  // namespace metanas
