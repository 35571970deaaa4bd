#include "metanas/corpus_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

#include <nlohmann/json.hpp>

#include "metanas/errors.hpp"

namespace metanas {

namespace {

constexpr char kMagic[4] = {'B', 'N', 'C', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw IoError(std::string("corpus: truncated while reading ") + what);
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_corpus(const std::string& path, const Corpus& corpus) {
  nlohmann::json manifest;
  manifest["class_count"] = corpus.classes;
  manifest["image_shape"] = {corpus.channels, corpus.size, corpus.size};
  manifest["dtype"] = "u8";
  std::vector<int> counts;
  for (int c = 0; c < corpus.classes; ++c) counts.push_back(corpus.per_class(c));
  manifest["per_class_counts"] = counts;
  manifest["provenance"] = corpus.provenance;
  const std::string text = manifest.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("corpus: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& cls : corpus.images) {
    for (const Tensor& img : cls) {
      std::vector<unsigned char> bytes(img.data.size());
      for (size_t i = 0; i < img.data.size(); ++i) {
        bytes[i] = static_cast<unsigned char>(std::lround(img.data[i] * 255.0));
      }
      os.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    }
  }
  if (!os) throw IoError("corpus: write failed for " + path);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("corpus: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4)) throw IoError("corpus: truncated while reading magic");
  if (std::string(magic, 4) != std::string(kMagic, 4)) {
    throw IoError("corpus: bad magic in " + path);
  }
  const std::uint32_t version = read_u32(is, "version");
  if (version != kVersion) {
    throw IoError("corpus: unsupported format version " + std::to_string(version));
  }
  const std::uint32_t manifest_len = read_u32(is, "manifest length");
  std::string text(manifest_len, '\0');
  if (!is.read(text.data(), manifest_len)) {
    throw IoError("corpus: truncated manifest (expected " + std::to_string(manifest_len) + " bytes)");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corpus: malformed manifest: ") + e.what());
  }

  Corpus corpus;
  try {
    corpus.classes = manifest.at("class_count").get<int>();
    const auto shape = manifest.at("image_shape").get<std::vector<int>>();
    if (shape.size() != 3 || shape[1] != shape[2]) {
      throw IoError("corpus: image_shape must be [channels, size, size]");
    }
    corpus.channels = shape[0];
    corpus.size = shape[1];
    if (manifest.at("dtype").get<std::string>() != "u8") {
      throw IoError("corpus: unsupported dtype " + manifest.at("dtype").get<std::string>());
    }
    corpus.provenance = manifest.value("provenance", std::string("ingested"));
    const auto counts = manifest.at("per_class_counts").get<std::vector<int>>();
    if (static_cast<int>(counts.size()) != corpus.classes) {
      throw IoError("corpus: per_class_counts length does not match class_count");
    }
    std::int64_t expected = 0;
    const std::int64_t img_bytes =
        static_cast<std::int64_t>(corpus.channels) * corpus.size * corpus.size;
    for (int n : counts) {
      if (n <= 0) throw IoError("corpus: empty class in manifest");
      expected += static_cast<std::int64_t>(n) * img_bytes;
    }
    std::vector<unsigned char> blob(static_cast<size_t>(expected));
    is.read(reinterpret_cast<char*>(blob.data()), expected);
    const std::int64_t got = is.gcount();
    if (got != expected) {
      throw IoError("corpus: truncated blob, expected " + std::to_string(expected) +
                    " bytes, got " + std::to_string(got));
    }
    size_t at = 0;
    corpus.images.resize(static_cast<size_t>(corpus.classes));
    for (int c = 0; c < corpus.classes; ++c) {
      auto& list = corpus.images[static_cast<size_t>(c)];
      for (int i = 0; i < counts[static_cast<size_t>(c)]; ++i) {
        Tensor img = Tensor::zeros({corpus.channels, corpus.size, corpus.size});
        for (std::int64_t k = 0; k < img_bytes; ++k) {
          img.data[static_cast<size_t>(k)] = blob[at++] / 255.0;
        }
        list.push_back(std::move(img));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corpus: manifest missing field: ") + e.what());
  }
  return corpus;
}

}  // namespace metanas
