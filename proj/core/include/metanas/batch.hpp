#pragma once

#include <cstdint>
#include <vector>

#include "metanas/tensor.hpp"

namespace metanas {

// One labeled minibatch: x is (N, C, H, W) with H == W == resolution.
struct Batch {
  Tensor x;
  std::vector<int> labels;
  int resolution = 0;
  // Size of the originating training split; used to scale the KL weight.
  std::int64_t dataset_size = 1;
};

}  // namespace metanas
