#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "metanas/derive.hpp"
#include "metanas/full_net.hpp"
#include "metanas/params.hpp"
#include "metanas/supernet.hpp"
#include "metanas/task_gen.hpp"
#include "metanas/variational.hpp"

namespace metanas {

struct FewShotConfig {
  int n_way = 5;
  int k_shot = 5;
  int query_per_way = 5;
  int tasks_per_update = 2;    // episodes combined per meta update
  int inner_steps_search = 1;  // unrolled steps in search (4 at paper scale)
  int inner_steps_eval = 5;    // MAML inner steps
  double inner_lr = 0.05;
  double meta_lr = 0.05;
  int search_iterations = 500;
  int eval_iterations = 300;
  int eval_episodes = 200;
  int derive_episodes = 4;
  bool use_softmax = false;  // deterministic softmax(phi) instead of Gumbel samples
  int resolution = 16;
  double tau = 1.0;
  int eval_cells = 4;
  int eval_channels = 8;
  std::uint64_t seed = 1;
  VariationalConfig variational;
  std::vector<int> train_classes;
  std::vector<int> test_classes;
};

using VarMap = std::map<std::string, Var>;

// Tracked MAML adaptation: `steps` SGD steps on the support loss, recorded
// on the tape so outer gradients flow through the updates (second order).
VarMap maml_adapt_tracked(Tape& tape, const FullNet& net, const VarMap& params,
                          const Tensor& support_x, const std::vector<int>& support_y,
                          int resolution, int steps, double lr);

// Untracked adaptation on a private tape; returns plain tensors.
ParamSet maml_adapt(const FullNet& net, const ParamSet& params, const Tensor& support_x,
                    const std::vector<int>& support_y, int resolution, int steps, double lr);

// One outer step on the mean query loss of per-episode adapted parameters.
// Second-order by default; `first_order` drops gradients through the inner
// updates (classic FOMAML).
ParamSet maml_meta_step(const FullNet& net, const ParamSet& params,
                        const std::vector<Episode>& episodes, int inner_steps, double inner_lr,
                        double meta_lr, bool first_order = false);

struct FewShotSearchResult {
  ParamSet meta;
  Genotype genotype;
  std::vector<double> outer_losses;  // one per iteration
};

// Architecture search with truly unrolled inner optimization: per episode,
// (phi, psi) adapt on the support set with the updates recorded, the outer
// objective is the query-set loss at the adapted posterior, and W receives
// gradients through both the initialization and the prior terms.
FewShotSearchResult fewshot_search(const SuperNet& net, const ParamSet& initial,
                                   const Corpus& corpus, const FewShotConfig& cfg);

struct FewShotEvalResult {
  double mean_accuracy = 0.0;
  double ci95 = 0.0;
  int episodes = 0;
  std::uint64_t genotype_hash = 0;
};

// Trains a committed full network with second-order MAML on train-class
// episodes, then reports query accuracy over >= eval_episodes test-class
// episodes with a normal-approximation 95% interval.
FewShotEvalResult fewshot_eval(const Genotype& genotype, const Corpus& corpus,
                               const FewShotConfig& cfg);

Batch episode_support_batch(const Episode& ep);
Batch episode_query_batch(const Episode& ep);

}  // namespace metanas
