#pragma once

#include <cstdint>
#include <string_view>

namespace metanas {

// Counter-based random stream. Every stream is a pure function of
// (root seed, kind label, up to three indices), so parallel and serial
// runs draw identical numbers regardless of scheduling, and a resumed
// run can reconstruct any epoch's streams from the root seed alone.
class RngStream {
 public:
  RngStream() : key_(0) {}
  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1).
  double uniform();
  // Uniform integer in [0, n), n > 0.
  std::uint64_t uniform_int(std::uint64_t n);
  // Standard normal (Box-Muller; the spare draw is cached in the stream).
  double normal();
  // Standard Gumbel(0, 1): -log(-log(u)).
  double gumbel();

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t hash_label(std::string_view label);
std::uint64_t mix_u64(std::uint64_t a, std::uint64_t b);

// Named stream derivation: the only way randomness enters the library.
RngStream make_stream(std::uint64_t root_seed, std::string_view kind,
                      std::uint64_t a = 0, std::uint64_t b = 0,
                      std::uint64_t c = 0);

}  // namespace metanas
