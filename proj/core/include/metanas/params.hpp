#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "metanas/tape.hpp"
#include "metanas/tensor.hpp"

namespace metanas {

// Ordered name -> tensor map; iteration order is the canonical parameter
// order for updates, serialization, and hashing.
using ParamStore = std::map<std::string, Tensor>;

enum class ParamKind {
  kConvWeight,
  kBnGain,
  kBnBias,
  kLinearWeight,
  kLinearBias,
  kArchLogits,
};

struct ParamInfo {
  std::string name;
  Shape shape;
  ParamKind kind = ParamKind::kConvWeight;
  // True for weights carrying a Gaussian posterior (cell convolutions).
  // BN affine, heads, classifier, and architecture logits are point
  // parameters and carry no scale entry.
  bool gaussian = false;
};

using ParamSpec = std::vector<ParamInfo>;

// One set of meta- or posterior parameters: `values` holds every tensor
// (weights, BN affine, heads, classifier, architecture logits); `scales`
// holds raw (pre-softplus) scale tensors for exactly the Gaussian subset.
struct ParamSet {
  ParamStore values;
  ParamStore scales;

  bool congruent_with(const ParamSet& other) const;
  void require_congruent(const char* what, const ParamSet& other) const;
  std::uint64_t content_hash() const;
  std::int64_t scalar_count() const;
};

struct GradSet {
  ParamStore values;
  ParamStore scales;
};

// p <- p - lr * g elementwise for every key present in `grads`; parameters
// absent from the gradient map are untouched. Non-finite gradients raise
// NumericFault naming the parameter.
ParamSet sgd_step(const ParamSet& params, const GradSet& grads, double lr);

// Name -> tape var lookup used during network forward passes.
class VarStore {
 public:
  void put(const std::string& name, Var v);
  Var get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::map<std::string, Var>& all() const { return vars_; }

 private:
  std::map<std::string, Var> vars_;
};

std::uint64_t fnv1a_bytes(const void* data, size_t len, std::uint64_t seed = 0xCBF29CE484222325ULL);

}  // namespace metanas
