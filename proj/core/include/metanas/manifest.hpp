#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace metanas {

inline constexpr const char* kVersionString = "metanas-0.1.0";

// Writes <out_dir>/manifest.json capturing the config, seed, version string
// and a content hash per listed output file (paths relative to out_dir).
// Wall-clock sinks are deliberately left off the list so reruns with the
// same config and seed produce identical manifests.
void write_manifest(const std::string& out_dir, const std::string& config_json,
                    std::uint64_t seed, const std::vector<std::string>& output_files);

std::uint64_t hash_file(const std::string& path);

}  // namespace metanas
