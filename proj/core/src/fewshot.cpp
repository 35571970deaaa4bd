#include "metanas/fewshot.hpp"

#include <algorithm>
#include <cmath>

#include "metanas/errors.hpp"

namespace metanas {

Batch episode_support_batch(const Episode& ep) {
  Batch b;
  b.x = ep.support_x;
  b.labels = ep.support_y;
  b.resolution = ep.resolution;
  b.dataset_size = static_cast<std::int64_t>(ep.support_y.size());
  return b;
}

Batch episode_query_batch(const Episode& ep) {
  Batch b;
  b.x = ep.query_x;
  b.labels = ep.query_y;
  b.resolution = ep.resolution;
  b.dataset_size = static_cast<std::int64_t>(ep.support_y.size());
  return b;
}

VarMap maml_adapt_tracked(Tape& tape, const FullNet& net, const VarMap& params,
                          const Tensor& support_x, const std::vector<int>& support_y,
                          int resolution, int steps, double lr) {
  if (support_y.empty()) throw ConfigError("maml_adapt: empty support set");
  VarMap current = params;
  Var x = tape.constant(support_x);
  for (int t = 0; t < steps; ++t) {
    VarStore store;
    std::vector<Var> wrt;
    std::vector<std::string> names;
    for (const auto& [name, var] : current) {
      store.put(name, var);
      wrt.push_back(var);
      names.push_back(name);
    }
    Var loss;
    try {
      loss = softmax_cross_entropy(net.forward(store, x, resolution), support_y);
    } catch (const NumericFault& e) {
      throw NumericFault("maml_adapt: numeric fault at step " + std::to_string(t) + ": " +
                         e.what());
    }
    std::vector<Var> grads = tape.gradients(loss, wrt);
    VarMap next;
    for (size_t i = 0; i < names.size(); ++i) {
      next[names[i]] = grads[i].defined() ? sub(wrt[i], scale(grads[i], lr)) : wrt[i];
    }
    current = std::move(next);
  }
  return current;
}

ParamSet maml_adapt(const FullNet& net, const ParamSet& params, const Tensor& support_x,
                    const std::vector<int>& support_y, int resolution, int steps, double lr) {
  Tape tape;
  VarMap leaves;
  for (const auto& [name, t] : params.values) leaves[name] = tape.leaf(t);
  VarMap adapted = maml_adapt_tracked(tape, net, leaves, support_x, support_y, resolution, steps, lr);
  ParamSet out = params;
  for (auto& [name, t] : out.values) t = adapted.at(name).value();
  return out;
}

ParamSet maml_meta_step(const FullNet& net, const ParamSet& params,
                        const std::vector<Episode>& episodes, int inner_steps, double inner_lr,
                        double meta_lr, bool first_order) {
  if (episodes.empty()) throw ConfigError("maml_meta_step: no episodes");

  GradSet total;
  if (first_order) {
    // FOMAML: query-loss gradient at the adapted parameters, applied to the
    // initialization.
    for (const Episode& ep : episodes) {
      ParamSet adapted = maml_adapt(net, params, ep.support_x, ep.support_y, ep.resolution,
                                    inner_steps, inner_lr);
      Tape tape;
      VarStore store;
      std::vector<Var> wrt;
      std::vector<std::string> names;
      for (const auto& [name, t] : adapted.values) {
        Var v = tape.leaf(t);
        store.put(name, v);
        wrt.push_back(v);
        names.push_back(name);
      }
      Var loss =
          softmax_cross_entropy(net.forward(store, tape.constant(ep.query_x), ep.resolution),
                                ep.query_y);
      std::vector<Tensor> grads = tape.gradient_values(loss, wrt);
      for (size_t i = 0; i < names.size(); ++i) {
        auto [it, inserted] = total.values.emplace(names[i], grads[i]);
        if (!inserted) {
          for (size_t k = 0; k < grads[i].data.size(); ++k) it->second.data[k] += grads[i].data[k];
        }
      }
    }
  } else {
    Tape tape;
    VarMap leaves;
    std::vector<Var> wrt;
    std::vector<std::string> names;
    for (const auto& [name, t] : params.values) {
      leaves[name] = tape.leaf(t);
      wrt.push_back(leaves[name]);
      names.push_back(name);
    }
    Var mean_query{};
    for (const Episode& ep : episodes) {
      VarMap adapted = maml_adapt_tracked(tape, net, leaves, ep.support_x, ep.support_y,
                                          ep.resolution, inner_steps, inner_lr);
      VarStore store;
      for (const auto& [name, var] : adapted) store.put(name, var);
      Var loss =
          softmax_cross_entropy(net.forward(store, tape.constant(ep.query_x), ep.resolution),
                                ep.query_y);
      mean_query = mean_query.defined() ? add(mean_query, loss) : loss;
    }
    mean_query = scale(mean_query, 1.0 / static_cast<double>(episodes.size()));
    std::vector<Tensor> grads = tape.gradient_values(mean_query, wrt);
    for (size_t i = 0; i < names.size(); ++i) total.values.emplace(names[i], std::move(grads[i]));
  }

  if (first_order) {
    const double inv = 1.0 / static_cast<double>(episodes.size());
    for (auto& [name, g] : total.values)
      for (double& v : g.data) v *= inv;
  }
  return sgd_step(params, total, meta_lr);
}

namespace {

std::vector<int> default_split(const std::vector<int>& classes, bool train_part) {
  // First ~60% of the listed classes train, the rest test.
  const size_t cut = (classes.size() * 3 + 4) / 5;
  if (train_part) return {classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(cut)};
  return {classes.begin() + static_cast<std::ptrdiff_t>(cut), classes.end()};
}

struct EpisodeSource {
  const Corpus& corpus;
  const FewShotConfig& cfg;
  std::vector<int> classes;
  const char* label;

  Episode draw(std::uint64_t a, std::uint64_t b) const {
    RngStream rng = make_stream(cfg.seed, label, a, b);
    return sample_episode(corpus, classes, cfg.n_way, cfg.k_shot, cfg.query_per_way,
                          cfg.resolution, rng);
  }
};

Tensor zero_gumbel(const Tensor& like) { return Tensor::zeros(like.shape); }

}  // namespace

FewShotSearchResult fewshot_search(const SuperNet& net, const ParamSet& initial,
                                   const Corpus& corpus, const FewShotConfig& cfg) {
  if (net.config().classes != cfg.n_way) {
    throw ConfigError("fewshot_search: super-net classes must equal n_way");
  }
  std::vector<int> train_classes =
      cfg.train_classes.empty() ? default_split(corpus.all_classes(), true) : cfg.train_classes;

  FewShotSearchResult result;
  result.meta = initial;

  for (int iter = 0; iter < cfg.search_iterations; ++iter) {
    Tape tape;
    PosteriorVars w_vars = make_posterior_leaves(tape, result.meta);
    // The prior and the initialization are the same W (Algorithm line
    // "(phi0, psi0) = W"); sharing the vars routes outer gradients through
    // both paths.
    PriorVars prior;
    for (const auto& [name, var] : w_vars.scales.all()) {
      prior.values.put(name, w_vars.values.get(name));
      prior.scales.put(name, var);
    }
    prior.values.put(SuperNet::kArchNormal, w_vars.values.get(SuperNet::kArchNormal));
    prior.values.put(SuperNet::kArchReduce, w_vars.values.get(SuperNet::kArchReduce));

    RngStream eps_rng = make_stream(cfg.seed, "fs-eps", static_cast<std::uint64_t>(iter));
    RngStream xi_rng = make_stream(cfg.seed, "fs-xi", static_cast<std::uint64_t>(iter));

    std::vector<Var> wrt;
    std::vector<std::string> wrt_names;
    std::vector<bool> wrt_scale;
    for (const auto& [name, var] : w_vars.values.all()) {
      wrt.push_back(var);
      wrt_names.push_back(name);
      wrt_scale.push_back(false);
    }
    if (cfg.variational.weight_mode == WeightMode::kGaussian) {
      for (const auto& [name, var] : w_vars.scales.all()) {
        wrt.push_back(var);
        wrt_names.push_back(name);
        wrt_scale.push_back(true);
      }
    }

    EpisodeSource source{corpus, cfg, train_classes, "fs-episode"};
    Var outer{};
    for (int t = 0; t < cfg.tasks_per_update; ++t) {
      const Episode ep = source.draw(static_cast<std::uint64_t>(iter), static_cast<std::uint64_t>(t));
      const Batch support = episode_support_batch(ep);
      const Batch query = episode_query_batch(ep);

      // Unrolled inner adaptation of (phi, psi) starting at W.
      PosteriorVars post = w_vars;
      for (int step = 0; step < cfg.inner_steps_search; ++step) {
        std::vector<ElboDraws> draws(1);
        draws[0] = draw_elbo_noise(net, result.meta, cfg.variational.weight_mode, eps_rng, xi_rng);
        if (cfg.use_softmax) {
          draws[0].xi_normal = zero_gumbel(draws[0].xi_normal);
          draws[0].xi_reduce = zero_gumbel(draws[0].xi_reduce);
        }
        ElboTerms terms =
            elbo_loss(tape, net, post, prior, support, cfg.variational, cfg.tau, draws);
        std::vector<Var> params;
        std::vector<std::string> names;
        std::vector<bool> scale_flag;
        for (const auto& [name, var] : post.values.all()) {
          params.push_back(var);
          names.push_back(name);
          scale_flag.push_back(false);
        }
        if (cfg.variational.weight_mode == WeightMode::kGaussian) {
          for (const auto& [name, var] : post.scales.all()) {
            params.push_back(var);
            names.push_back(name);
            scale_flag.push_back(true);
          }
        }
        std::vector<Var> grads = tape.gradients(terms.loss, params);
        PosteriorVars next = post;
        for (size_t i = 0; i < params.size(); ++i) {
          Var updated =
              grads[i].defined() ? sub(params[i], scale(grads[i], cfg.inner_lr)) : params[i];
          (scale_flag[i] ? next.scales : next.values).put(names[i], updated);
        }
        post = std::move(next);
      }

      std::vector<ElboDraws> qdraws(1);
      qdraws[0] = draw_elbo_noise(net, result.meta, cfg.variational.weight_mode, eps_rng, xi_rng);
      if (cfg.use_softmax) {
        qdraws[0].xi_normal = zero_gumbel(qdraws[0].xi_normal);
        qdraws[0].xi_reduce = zero_gumbel(qdraws[0].xi_reduce);
      }
      ElboTerms qterms = elbo_loss(tape, net, post, prior, query, cfg.variational, cfg.tau, qdraws);
      outer = outer.defined() ? add(outer, qterms.loss) : qterms.loss;
    }
    outer = scale(outer, 1.0 / static_cast<double>(cfg.tasks_per_update));
    result.outer_losses.push_back(outer.value().scalar_value());

    std::vector<Tensor> grads = tape.gradient_values(outer, wrt);
    GradSet gset;
    for (size_t i = 0; i < wrt.size(); ++i) {
      (wrt_scale[i] ? gset.scales : gset.values).emplace(wrt_names[i], std::move(grads[i]));
    }
    result.meta = sgd_step(result.meta, gset, cfg.meta_lr);
  }

  // Derivation: plain (untracked) adaptation on held-out training episodes,
  // then average the adapted softmax(phi) blocks.
  std::vector<ParamSet> adapted;
  EpisodeSource derive_source{corpus, cfg, train_classes, "fs-derive-episode"};
  MetaTrainConfig adapt_cfg;
  adapt_cfg.inner_lr = cfg.inner_lr;
  adapt_cfg.variational = cfg.variational;
  for (int i = 0; i < cfg.derive_episodes; ++i) {
    const Episode ep = derive_source.draw(static_cast<std::uint64_t>(i), 0);
    const Batch support = episode_support_batch(ep);
    ParamSet post = result.meta;
    RngStream eps_rng = make_stream(cfg.seed, "fs-derive-eps", static_cast<std::uint64_t>(i));
    RngStream xi_rng = make_stream(cfg.seed, "fs-derive-xi", static_cast<std::uint64_t>(i));
    const int steps = std::max(cfg.inner_steps_search, cfg.inner_steps_eval);
    for (int t = 0; t < steps; ++t) {
      Tape tape;
      PosteriorVars pv = make_posterior_leaves(tape, post);
      PriorVars prior = make_prior_constants(tape, net, result.meta);
      ElboTerms terms =
          elbo_loss(tape, net, pv, prior, support, cfg.variational, cfg.tau, eps_rng, xi_rng);
      std::vector<Var> leaves;
      std::vector<std::string> names;
      for (const auto& [name, var] : pv.values.all()) {
        leaves.push_back(var);
        names.push_back(name);
      }
      std::vector<Tensor> grads = tape.gradient_values(terms.loss, leaves);
      GradSet gset;
      for (size_t i2 = 0; i2 < names.size(); ++i2) {
        gset.values.emplace(names[i2], std::move(grads[i2]));
      }
      post = sgd_step(post, gset, cfg.inner_lr);
    }
    adapted.push_back(std::move(post));
  }
  result.genotype = derive_from_posteriors(
      adapted, "fewshot episodes=" + std::to_string(cfg.derive_episodes));
  return result;
}

FewShotEvalResult fewshot_eval(const Genotype& genotype, const Corpus& corpus,
                               const FewShotConfig& cfg) {
  std::vector<int> train_classes =
      cfg.train_classes.empty() ? default_split(corpus.all_classes(), true) : cfg.train_classes;
  std::vector<int> test_classes =
      cfg.test_classes.empty() ? default_split(corpus.all_classes(), false) : cfg.test_classes;
  for (int t : test_classes) {
    if (std::find(train_classes.begin(), train_classes.end(), t) != train_classes.end()) {
      throw ConfigError("fewshot_eval: class " + std::to_string(t) + " is in both splits");
    }
  }

  FullNetConfig net_cfg;
  net_cfg.cells = cfg.eval_cells;
  net_cfg.channels = cfg.eval_channels;
  net_cfg.classes = cfg.n_way;
  net_cfg.in_channels = corpus.channels;
  net_cfg.heads = {{cfg.resolution, 1}};
  const FullNet net = FullNet::build(genotype, net_cfg);
  ParamSet params = net.init_params(mix_u64(cfg.seed, hash_label("fs-eval-init")));

  EpisodeSource train_source{corpus, cfg, train_classes, "fs-eval-train-episode"};
  for (int iter = 0; iter < cfg.eval_iterations; ++iter) {
    std::vector<Episode> episodes;
    for (int t = 0; t < cfg.tasks_per_update; ++t) {
      episodes.push_back(train_source.draw(static_cast<std::uint64_t>(iter),
                                           static_cast<std::uint64_t>(t)));
    }
    params = maml_meta_step(net, params, episodes, cfg.inner_steps_eval, cfg.inner_lr,
                            cfg.meta_lr);
  }

  EpisodeSource test_source{corpus, cfg, test_classes, "fs-eval-test-episode"};
  std::vector<double> accuracies;
  for (int e = 0; e < cfg.eval_episodes; ++e) {
    const Episode ep = test_source.draw(static_cast<std::uint64_t>(e), 0);
    ParamSet adapted = maml_adapt(net, params, ep.support_x, ep.support_y, ep.resolution,
                                  cfg.inner_steps_eval, cfg.inner_lr);
    accuracies.push_back(full_net_accuracy(net, adapted, ep.query_x, ep.query_y, ep.resolution,
                                           static_cast<int>(ep.query_y.size())));
  }
  FewShotEvalResult result;
  result.episodes = static_cast<int>(accuracies.size());
  double mean = 0.0;
  for (double a : accuracies) mean += a;
  mean /= static_cast<double>(accuracies.size());
  double var = 0.0;
  for (double a : accuracies) var += (a - mean) * (a - mean);
  var /= std::max<size_t>(1, accuracies.size() - 1);
  result.mean_accuracy = mean;
  result.ci95 = 1.96 * std::sqrt(var / static_cast<double>(accuracies.size()));
  result.genotype_hash = genotype.content_hash();
  return result;
}

}  // namespace metanas
