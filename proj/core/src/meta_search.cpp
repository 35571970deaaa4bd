#include "metanas/meta_search.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

#include "metanas/errors.hpp"

namespace metanas {

AdaptResult inner_adapt(const SuperNet& net, const ParamSet& meta, const Corpus& corpus,
                        const TaskSpec& task, const MetaTrainConfig& cfg,
                        const AdaptContext& ctx) {
  const TaskData data = materialize_task(corpus, task);
  if (data.train_y.empty()) throw ConfigError("inner_adapt: task has no training examples");

  RngStream batch_rng = make_stream(ctx.root_seed, "inner-batch", ctx.a, ctx.b);
  RngStream eps_rng = make_stream(ctx.root_seed, "inner-eps", ctx.a, ctx.b);
  RngStream xi_rng = make_stream(ctx.root_seed, "inner-xi", ctx.a, ctx.b);

  auto batches = epoch_batches(data.train_x.dim(0), cfg.batch_size, batch_rng);
  const int steps = cfg.inner_steps < 0 ? static_cast<int>(batches.size()) : cfg.inner_steps;

  AdaptResult result;
  result.params = meta;  // (phi0, psi0) = W
  result.tau = ctx.tau;
  size_t batch_at = 0;
  for (int t = 0; t < steps; ++t) {
    if (batch_at == batches.size()) {
      batches = epoch_batches(data.train_x.dim(0), cfg.batch_size, batch_rng);
      batch_at = 0;
    }
    const Batch batch = make_batch(data, batches[batch_at++]);
    try {
      Tape tape;
      PosteriorVars post = make_posterior_leaves(tape, result.params);
      PriorVars prior = make_prior_constants(tape, net, meta);
      ElboTerms terms =
          elbo_loss(tape, net, post, prior, batch, cfg.variational, ctx.tau, eps_rng, xi_rng);
      result.losses.push_back(terms.loss.value().scalar_value());

      std::vector<Var> leaves;
      std::vector<std::string> names;
      std::vector<bool> is_scale;
      for (const auto& [name, var] : post.values.all()) {
        leaves.push_back(var);
        names.push_back(name);
        is_scale.push_back(false);
      }
      if (cfg.variational.weight_mode == WeightMode::kGaussian) {
        for (const auto& [name, var] : post.scales.all()) {
          leaves.push_back(var);
          names.push_back(name);
          is_scale.push_back(true);
        }
      }
      std::vector<Tensor> grads = tape.gradient_values(terms.loss, leaves);
      GradSet gset;
      for (size_t i = 0; i < leaves.size(); ++i) {
        (is_scale[i] ? gset.scales : gset.values).emplace(names[i], std::move(grads[i]));
      }
      result.params = sgd_step(result.params, gset, cfg.inner_lr);
    } catch (const NumericFault& e) {
      throw AdaptFault("inner_adapt: numeric fault at step " + std::to_string(t) + ": " + e.what(),
                       t, result.losses);
    }
  }
  return result;
}

ParamSet meta_step(const ParamSet& meta, const std::vector<ParamSet>& adapted, double meta_lr) {
  if (adapted.empty()) throw ConfigError("meta_step: no adapted parameter sets");
  for (const ParamSet& a : adapted) meta.require_congruent("meta_step", a);

  ParamSet out = meta;
  const double inv_c = 1.0 / static_cast<double>(adapted.size());
  auto update_store = [&](ParamStore& dst, const ParamStore& base,
                          auto member) {
    for (auto& [name, tensor] : dst) {
      const Tensor& w = base.at(name);
      for (size_t i = 0; i < tensor.data.size(); ++i) {
        double acc = 0.0;
        for (const ParamSet& a : adapted) {
          acc += (a.*member).at(name).data[i] - w.data[i];
        }
        tensor.data[i] = w.data[i] + meta_lr * (acc * inv_c);
      }
    }
  };
  update_store(out.values, meta.values, &ParamSet::values);
  update_store(out.scales, meta.scales, &ParamSet::scales);
  return out;
}

std::vector<TaskSpec> sample_epoch_tasks(const SuperNet& net, const Corpus& corpus,
                                         const MetaTrainConfig& cfg, int epoch) {
  const auto& heads = net.config().heads;
  std::vector<TaskSpec> tasks;
  for (int c = 0; c < cfg.tasks_per_epoch; ++c) {
    const int res = heads[static_cast<size_t>(c) % heads.size()].resolution;
    RngStream rng = make_stream(cfg.seed, "task", static_cast<std::uint64_t>(epoch),
                                static_cast<std::uint64_t>(c));
    tasks.push_back(sample_task(corpus, cfg.task_classes, res, rng));
  }
  return tasks;
}

ParamSet meta_train(const SuperNet& net, ParamSet initial, const Corpus& corpus,
                    const MetaTrainConfig& cfg, const MetaTrainHooks& hooks,
                    std::vector<EpochStats>* history, int start_epoch) {
  if (cfg.tasks_per_epoch < 1) throw ConfigError("meta_train: tasks_per_epoch must be >= 1");
  ParamSet meta = std::move(initial);

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double tau = temperature(cfg.variational, epoch);
    const std::vector<TaskSpec> tasks = sample_epoch_tasks(net, corpus, cfg, epoch);

    std::vector<AdaptResult> results(tasks.size());
    const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(tasks.size())));
    if (workers == 1) {
      for (size_t c = 0; c < tasks.size(); ++c) {
        AdaptContext ctx{cfg.seed, static_cast<std::uint64_t>(epoch), c, tau};
        results[c] = inner_adapt(net, meta, corpus, tasks[c], cfg, ctx);
      }
    } else {
      std::atomic<size_t> next{0};
      std::exception_ptr fault;
      std::mutex fault_mu;
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (size_t c = next.fetch_add(1); c < tasks.size(); c = next.fetch_add(1)) {
            try {
              AdaptContext ctx{cfg.seed, static_cast<std::uint64_t>(epoch), c, tau};
              results[c] = inner_adapt(net, meta, corpus, tasks[c], cfg, ctx);
            } catch (...) {
              std::lock_guard<std::mutex> lock(fault_mu);
              if (!fault) fault = std::current_exception();
            }
          }
        });
      }
      for (auto& t : pool) t.join();
      if (fault) std::rethrow_exception(fault);
    }

    std::vector<ParamSet> adapted;
    adapted.reserve(results.size());
    double mean_final = 0.0;
    for (AdaptResult& r : results) {
      if (!r.losses.empty()) mean_final += r.losses.back();
      adapted.push_back(std::move(r.params));
    }
    mean_final /= static_cast<double>(results.size());
    meta = meta_step(meta, adapted, cfg.meta_lr);

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_final_loss = mean_final;
    stats.tau = tau;
    stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (history != nullptr) history->push_back(stats);
    if (hooks.on_epoch) hooks.on_epoch(stats);
    if (hooks.on_checkpoint) hooks.on_checkpoint(epoch, meta);
  }
  return meta;
}

}  // namespace metanas
