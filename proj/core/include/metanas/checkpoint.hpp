#pragma once

#include <cstdint>
#include <string>

#include "metanas/params.hpp"

namespace metanas {

// Versioned binary state: magic "BMC1", format version, config hash, epoch
// counter, root RNG seed (counter-based streams need nothing more), and the
// full parameter set. load(save(x)) is bitwise faithful.
struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::int32_t epoch = 0;  // epochs completed
  std::uint64_t rng_seed = 0;
  ParamSet params;
};

void checkpoint_save(const std::string& path, const Checkpoint& ckpt);
Checkpoint checkpoint_load(const std::string& path);

}  // namespace metanas
