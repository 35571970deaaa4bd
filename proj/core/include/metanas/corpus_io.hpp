#pragma once

#include <string>

#include "metanas/task_gen.hpp"

namespace metanas {

// Corpus file format "BNC1": magic, format version, a JSON manifest
// (class count, image shape, dtype=u8, per-class counts, provenance),
// then one binary blob of row-major u8 pixels in class-major order.
void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(const std::string& path);

}  // namespace metanas
