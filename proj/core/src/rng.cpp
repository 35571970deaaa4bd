#include "metanas/rng.hpp"

#include <cmath>

namespace metanas {

namespace {

// splitmix64 finalizer; full-period mixer with good avalanche.
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_u64(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2)));
}

std::uint64_t hash_label(std::string_view label) {
  // FNV-1a 64.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

RngStream make_stream(std::uint64_t root_seed, std::string_view kind,
                      std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t k = mix_u64(root_seed, hash_label(kind));
  k = mix_u64(k, a);
  k = mix_u64(k, b);
  k = mix_u64(k, c);
  return RngStream(k);
}

std::uint64_t RngStream::next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }

double RngStream::uniform() {
  // 53 random bits, shifted into (0, 1): never exactly 0 or 1.
  const std::uint64_t bits = next_u64() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = ~0ULL - (~0ULL % n + 1) % n;
  std::uint64_t x = next_u64();
  while (x > limit) x = next_u64();
  return x % n;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * M_PI * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

double RngStream::gumbel() { return -std::log(-std::log(uniform())); }

}  // namespace metanas
