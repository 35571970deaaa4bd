#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "metanas/errors.hpp"
#include "metanas/params.hpp"
#include "metanas/supernet.hpp"
#include "metanas/task_gen.hpp"
#include "metanas/variational.hpp"

namespace metanas {

struct MetaTrainConfig {
  int epochs = 30;           // E
  int tasks_per_epoch = 6;   // C
  int inner_steps = -1;      // T; -1 = one pass over the task's training split
  double inner_lr = 0.05;    // eta
  double meta_lr = 1.0;      // lambda
  int batch_size = 16;
  int task_classes = 10;
  int workers = 1;
  std::uint64_t seed = 1;
  VariationalConfig variational;
};

struct AdaptResult {
  ParamSet params;
  std::vector<double> losses;  // one entry per inner step
  double tau = 0.0;
};

// Numeric fault mid-adaptation, carrying the failing step and the losses
// recorded before it.
class AdaptFault : public NumericFault {
 public:
  AdaptFault(const std::string& what, int step, std::vector<double> trace)
      : NumericFault(what), step(step), loss_trace(std::move(trace)) {}
  int step;
  std::vector<double> loss_trace;
};

// Stream labels for one task's adaptation; (a, b) is conventionally
// (epoch, task index) so parallel and serial schedules draw identically.
struct AdaptContext {
  std::uint64_t root_seed = 1;
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  double tau = 1.0;
};

// Algorithm: initialize the posterior at W, then T SGD steps on the
// per-batch objective with a fresh minibatch and fresh (xi, eps) per step.
// W itself is never mutated.
AdaptResult inner_adapt(const SuperNet& net, const ParamSet& meta, const Corpus& corpus,
                        const TaskSpec& task, const MetaTrainConfig& cfg,
                        const AdaptContext& ctx);

// W <- W + lambda * (1/C) * sum_c (adapted_c - W), elementwise over every
// parameter (heads and classifier included), summed in task-index order.
ParamSet meta_step(const ParamSet& meta, const std::vector<ParamSet>& adapted, double meta_lr);

struct EpochStats {
  int epoch = 0;
  double mean_final_loss = 0.0;
  double tau = 0.0;
  double wall_seconds = 0.0;
};

struct MetaTrainHooks {
  std::function<void(const EpochStats&)> on_epoch;
  std::function<void(int epoch, const ParamSet&)> on_checkpoint;
};

// Outer loop: E epochs of {sample C tasks -> adapt each -> meta step}.
// Tasks cycle through the registered resolutions (equal split). Inner
// adaptations run on `cfg.workers` threads reading an immutable W snapshot;
// the reduction order is task-index order regardless of completion order.
// `start_epoch` resumes mid-run and reproduces the uninterrupted result.
ParamSet meta_train(const SuperNet& net, ParamSet initial, const Corpus& corpus,
                    const MetaTrainConfig& cfg, const MetaTrainHooks& hooks = {},
                    std::vector<EpochStats>* history = nullptr, int start_epoch = 0);

// The epoch-e task list (resolution cycling + family pool = all classes).
std::vector<TaskSpec> sample_epoch_tasks(const SuperNet& net, const Corpus& corpus,
                                         const MetaTrainConfig& cfg, int epoch);

}  // namespace metanas
