#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "metanas/cell_space.hpp"
#include "metanas/params.hpp"
#include "metanas/tape.hpp"

namespace metanas {

struct HeadSpec {
  int resolution = 16;
  int stride = 1;
};

struct SuperNetConfig {
  int cells = 4;       // search motif: normal/reduce alternating, reduce at odd indices
  int channels = 8;    // base cell channels; doubled at each reduce cell
  int classes = 10;
  int in_channels = 1;
  std::vector<HeadSpec> heads = {{16, 1}, {32, 2}};
};

// The stochastic super-network. The structure is immutable after build;
// parameters live outside in ParamSets so multiple snapshots can run
// forward passes concurrently on independent tapes.
class SuperNet {
 public:
  static SuperNet build(const SuperNetConfig& cfg);

  const SuperNetConfig& config() const { return cfg_; }
  const ParamSpec& param_spec() const { return spec_; }

  bool is_reduce(int cell) const { return cell % 2 == 1; }
  int cell_channels(int cell) const { return cell_channels_[static_cast<size_t>(cell)]; }
  int arch_edge_count() const { return cell_edge_count(); }

  // Fresh parameter set: Kaiming-uniform conv kernels, BN gain 1 / bias 0,
  // zero architecture logits (uniform prior over ops), softplus-raw scales
  // at init_sigma for the Gaussian subset.
  ParamSet init_params(std::uint64_t seed, double init_sigma = 0.05) const;

  // Forward pass to logits. `theta` must contain a Var for every non-arch
  // parameter name in param_spec(); z blocks are (edges x J) Vars shared by
  // all cells of the matching type.
  Var forward(const VarStore& theta, Var z_normal, Var z_reduce, Var x, int resolution) const;

  bool has_resolution(int resolution) const;

  static constexpr const char* kArchNormal = "arch/normal";
  static constexpr const char* kArchReduce = "arch/reduce";

 private:
  SuperNetConfig cfg_;
  ParamSpec spec_;
  std::vector<int> cell_channels_;
};

// Shared helpers (also used by the discrete full network).
void append_relu_conv_bn_params(ParamSpec& out, const std::string& prefix, int in_channels,
                                int out_channels, int kernel);
Var relu_conv_bn(const VarStore& p, const std::string& prefix, Var x, int stride, int pad);
void append_stem_params(ParamSpec& out, const std::string& prefix, int in_channels,
                        int out_channels);
Var stem_forward(const VarStore& p, const std::string& prefix, Var x, int stride);
void append_classifier_params(ParamSpec& out, int feat_channels, int classes);
Var classifier_forward(const VarStore& p, Var features);
ParamSet init_params_from_spec(const ParamSpec& spec, std::uint64_t seed, double init_sigma);

}  // namespace metanas
