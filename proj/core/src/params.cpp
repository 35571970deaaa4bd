#include "metanas/params.hpp"

#include <cmath>
#include <cstring>

#include "metanas/errors.hpp"

namespace metanas {

std::uint64_t fnv1a_bytes(const void* data, size_t len, std::uint64_t seed) {
  std::uint64_t h = seed;
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

namespace {

std::uint64_t hash_store(const ParamStore& store, std::uint64_t h) {
  for (const auto& [name, t] : store) {
    h = fnv1a_bytes(name.data(), name.size(), h);
    if (!t.shape.empty()) h = fnv1a_bytes(t.shape.data(), t.shape.size() * sizeof(int), h);
    if (!t.data.empty()) h = fnv1a_bytes(t.data.data(), t.data.size() * sizeof(double), h);
  }
  return h;
}

bool stores_congruent(const ParamStore& a, const ParamStore& b) {
  if (a.size() != b.size()) return false;
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.shape != ib->second.shape) return false;
  }
  return true;
}

}  // namespace

bool ParamSet::congruent_with(const ParamSet& other) const {
  return stores_congruent(values, other.values) && stores_congruent(scales, other.scales);
}

void ParamSet::require_congruent(const char* what, const ParamSet& other) const {
  if (!congruent_with(other)) {
    throw ShapeError(std::string(what) + ": parameter sets are not structurally congruent");
  }
}

std::uint64_t ParamSet::content_hash() const {
  std::uint64_t h = hash_store(values, 0xCBF29CE484222325ULL);
  return hash_store(scales, h);
}

std::int64_t ParamSet::scalar_count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : values) n += t.numel();
  for (const auto& [name, t] : scales) n += t.numel();
  return n;
}

namespace {

void apply_step(const char* which, ParamStore& params, const ParamStore& grads, double lr) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) {
      throw ShapeError("sgd_step: gradient for unknown parameter " + name);
    }
    if (!g.all_finite()) {
      throw NumericFault("sgd_step: non-finite gradient for " + std::string(which) + " " + name);
    }
    check_same_shape("sgd_step", it->second, g);
    Tensor& p = it->second;
    for (size_t i = 0; i < p.data.size(); ++i) p.data[i] -= lr * g.data[i];
  }
}

}  // namespace

ParamSet sgd_step(const ParamSet& params, const GradSet& grads, double lr) {
  ParamSet out = params;
  apply_step("value", out.values, grads.values, lr);
  apply_step("scale", out.scales, grads.scales, lr);
  return out;
}

void VarStore::put(const std::string& name, Var v) { vars_[name] = v; }

Var VarStore::get(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw Error("var store: missing parameter " + name);
  return it->second;
}

bool VarStore::contains(const std::string& name) const { return vars_.count(name) > 0; }

}  // namespace metanas
