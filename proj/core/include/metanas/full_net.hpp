#pragma once

#include <cstdint>
#include <vector>

#include "metanas/derive.hpp"
#include "metanas/params.hpp"
#include "metanas/supernet.hpp"
#include "metanas/task_gen.hpp"

namespace metanas {

struct FullNetConfig {
  int cells = 8;       // 20 for the CIFAR-style motif, 14 ImageNet-style
  int channels = 16;   // doubled at each reduction
  int classes = 10;
  int in_channels = 1;
  std::vector<HeadSpec> heads = {{16, 1}, {32, 2}};
};

// Discrete network committed from a genotype: reduce cells at floor(N/3)
// and floor(2N/3) (none when N < 3), channel doubling at reductions, each
// node summing exactly its two genotype edges. Parameter names mirror the
// super-network's so committed weights can be copied across.
class FullNet {
 public:
  static FullNet build(const Genotype& genotype, const FullNetConfig& cfg);

  const FullNetConfig& config() const { return cfg_; }
  const Genotype& genotype() const { return genotype_; }
  const ParamSpec& param_spec() const { return spec_; }
  std::int64_t param_count() const;

  bool is_reduce(int cell) const;
  ParamSet init_params(std::uint64_t seed) const;
  Var forward(const VarStore& params, Var x, int resolution) const;

 private:
  FullNetConfig cfg_;
  Genotype genotype_;
  ParamSpec spec_;
  std::vector<int> cell_channels_;
  std::vector<bool> reduce_flags_;
};

struct TrainSchedule {
  int epochs = 20;
  double lr = 0.05;      // cosine-decayed to lr_min
  double lr_min = 0.0;
  int batch_size = 32;
  std::uint64_t seed = 1;
};

struct TrainTrace {
  std::vector<double> train_accuracy;  // per epoch
  std::vector<double> val_accuracy;
  std::vector<double> train_loss;
};

// Plain SGD with cosine decay on the cross-entropy. Deterministic under a
// fixed seed; numeric faults carry the epoch index.
TrainTrace train_full(const FullNet& net, ParamSet& params, const TaskData& data,
                      const TrainSchedule& schedule);

// Accuracy of a discrete net (argmax logits, ties to the lowest class).
double full_net_accuracy(const FullNet& net, const ParamSet& params, const Tensor& x,
                         const std::vector<int>& y, int resolution, int batch_size);

// Deterministic super-net evaluation: theta = posterior means,
// z = row-softmax of the architecture logits (no Gumbel noise).
double supernet_accuracy(const SuperNet& net, const ParamSet& params, const Tensor& x,
                         const std::vector<int>& y, int resolution, int batch_size);

// --- Fast-adaptation experiment ---------------------------------------------

enum class FastAdaptArm { kAdapt, kFreezeArch, kScratch };
FastAdaptArm fast_adapt_arm_from_string(const std::string& name);
const char* fast_adapt_arm_name(FastAdaptArm arm);

struct FastAdaptConfig {
  int epochs = 6;
  MetaTrainConfig adapt;  // inner_lr, batch size, variational settings
  double tau = 0.5;
  std::uint64_t seed = 1;
};

struct FastAdaptCurve {
  FastAdaptArm arm;
  std::vector<double> val_accuracy;  // epochs + 1 entries; index 0 = init
};

// Arms: adapt the full posterior from the meta prior, adapt with frozen
// architecture logits, or train the super-net from scratch. Returns one
// per-epoch validation-accuracy curve per requested arm.
std::vector<FastAdaptCurve> fast_adapt_experiment(const SuperNet& net, const ParamSet& meta,
                                                  const Corpus& corpus, const TaskSpec& task,
                                                  const std::vector<FastAdaptArm>& arms,
                                                  const FastAdaptConfig& cfg);

// One-hot z block matching a genotype cell (retained edges one-hot on their
// op, all other edges one-hot on none).
Tensor genotype_one_hot_z(const GenotypeCell& cell);

}  // namespace metanas
