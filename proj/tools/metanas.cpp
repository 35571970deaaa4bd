// Operator CLI: corpus generation, meta-training, adaptation, genotype
// derivation, full-network training, the fast-adaptation experiment,
// posterior PCA export, and the few-shot search/eval pipeline.
//
// Exit codes: 0 success, 2 invalid configuration or usage, 1 runtime fault.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metanas/checkpoint.hpp"
#include "metanas/config.hpp"
#include "metanas/corpus_io.hpp"
#include "metanas/derive.hpp"
#include "metanas/errors.hpp"
#include "metanas/fewshot.hpp"
#include "metanas/full_net.hpp"
#include "metanas/manifest.hpp"
#include "metanas/meta_search.hpp"
#include "metanas/metrics.hpp"
#include "metanas/pca.hpp"
#include "metanas/variational.hpp"

namespace fs = std::filesystem;
using namespace metanas;

namespace {

struct CommonArgs {
  std::string config_path;
};

RunConfig load_config(const CommonArgs& args) {
  RunConfig cfg = load_run_config(args.config_path);
  if (const char* env = std::getenv("METANAS_OUT_DIR")) {
    if (*env != '\0') cfg.out_dir = env;
  }
  fs::create_directories(cfg.out_dir);
  return cfg;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

int first_resolution(const SuperNetConfig& net, int requested) {
  if (requested != 0) return requested;
  return net.heads.front().resolution;
}

SuperNet build_supernet(const RunConfig& cfg) {
  require_section(cfg.has_supernet, "supernet");
  return SuperNet::build(cfg.supernet);
}

Checkpoint load_checkpoint_checked(const std::string& path, const RunConfig& cfg,
                                   bool check_hash) {
  Checkpoint ckpt = checkpoint_load(path);
  if (check_hash && ckpt.config_hash != 0 && ckpt.config_hash != config_hash(cfg)) {
    throw ConfigError("checkpoint " + path + " was produced by a different config");
  }
  return ckpt;
}

int cmd_gen_corpus(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  if (cfg.corpus.kind != "synthetic") {
    throw ConfigError("gen-corpus requires corpus.kind = synthetic");
  }
  const std::uint64_t seed =
      cfg.corpus.seed != 0 ? cfg.corpus.seed : mix_u64(cfg.seed, hash_label("corpus"));
  const Corpus corpus = generate_synthetic_corpus(seed, cfg.corpus.synth);
  save_corpus(join_path(cfg.out_dir, "corpus.bnc"), corpus);
  write_manifest(cfg.out_dir, cfg.canonical_json, cfg.seed, {"corpus.bnc"});
  std::cout << "corpus: " << corpus.classes << " classes x " << corpus.per_class(0) << " images @ "
            << corpus.size << "x" << corpus.size << "\n";
  return 0;
}

int cmd_meta_train(const CommonArgs& args, int epochs_override, const std::string& resume) {
  RunConfig cfg = load_config(args);
  require_section(cfg.has_variational, "variational");
  require_section(cfg.has_meta, "meta");
  SuperNet net = build_supernet(cfg);
  Corpus corpus = resolve_corpus(cfg);

  MetaTrainConfig mcfg = cfg.meta;
  if (epochs_override >= 0) mcfg.epochs = epochs_override;

  ParamSet initial;
  int start_epoch = 0;
  if (!resume.empty()) {
    Checkpoint ckpt = load_checkpoint_checked(resume, cfg, true);
    initial = std::move(ckpt.params);
    start_epoch = ckpt.epoch;
  } else {
    initial = net.init_params(mix_u64(cfg.seed, hash_label("meta-init")),
                              mcfg.variational.init_sigma);
  }

  const std::string ckpt_path = join_path(cfg.out_dir, "checkpoint.bmc");
  checkpoint_save(ckpt_path, Checkpoint{config_hash(cfg), start_epoch, cfg.seed, initial});

  CsvSink metrics(join_path(cfg.out_dir, "metrics.csv"), {"epoch", "mean_final_loss", "tau"});
  CsvSink timing(join_path(cfg.out_dir, "timing.csv"), {"epoch", "wall_seconds"});
  MetaTrainHooks hooks;
  hooks.on_epoch = [&](const EpochStats& s) {
    metrics.append({std::to_string(s.epoch), format_double(s.mean_final_loss), format_double(s.tau)});
    timing.append({std::to_string(s.epoch), format_double(s.wall_seconds)});
  };
  hooks.on_checkpoint = [&](int epoch, const ParamSet& params) {
    checkpoint_save(ckpt_path, Checkpoint{config_hash(cfg), epoch + 1, cfg.seed, params});
  };

  meta_train(net, std::move(initial), corpus, mcfg, hooks, nullptr, start_epoch);
  write_manifest(cfg.out_dir, cfg.canonical_json, cfg.seed, {"checkpoint.bmc", "metrics.csv"});
  std::cout << "meta-train: " << mcfg.epochs - start_epoch << " epochs -> " << ckpt_path << "\n";
  return 0;
}

int cmd_adapt(const CommonArgs& args, const std::string& checkpoint_path,
              std::uint64_t task_seed, const std::string& family, int resolution, double tau_flag,
              const std::string& out_name) {
  RunConfig cfg = load_config(args);
  require_section(cfg.has_variational, "variational");
  require_section(cfg.has_meta, "meta");
  SuperNet net = build_supernet(cfg);
  Corpus corpus = resolve_corpus(cfg);

  const std::string ckpt_file =
      checkpoint_path.empty() ? join_path(cfg.out_dir, "checkpoint.bmc") : checkpoint_path;
  Checkpoint ckpt = load_checkpoint_checked(ckpt_file, cfg, false);

  const int res = first_resolution(cfg.supernet, resolution);
  const double tau = tau_flag > 0.0 ? tau_flag : cfg.variational.tau_min;
  RngStream task_rng = make_stream(cfg.seed, "adapt-task", task_seed);
  TaskSpec task = sample_task(corpus, cfg.meta.task_classes, res, task_rng,
                              family_pool(corpus, family));
  AdaptContext ctx{cfg.seed, kAdaptStreamTag, task_seed, tau};
  AdaptResult result = inner_adapt(net, ckpt.params, corpus, task, cfg.meta, ctx);

  const std::string out_file =
      out_name.empty() ? "adapted_" + std::to_string(task_seed) + ".bmc" : out_name;
  checkpoint_save(join_path(cfg.out_dir, out_file),
                  Checkpoint{config_hash(cfg), -1, cfg.seed, result.params});
  CsvSink losses(join_path(cfg.out_dir, "adapt_loss_" + std::to_string(task_seed) + ".csv"),
                 {"step", "loss"});
  for (size_t t = 0; t < result.losses.size(); ++t) {
    losses.append({std::to_string(t), format_double(result.losses[t])});
  }
  write_manifest(cfg.out_dir, cfg.canonical_json, cfg.seed,
                 {out_file, "adapt_loss_" + std::to_string(task_seed) + ".csv"});
  std::cout << "adapt: task-seed " << task_seed << " (" << result.losses.size()
            << " steps) -> " << out_file << "\n";
  return 0;
}

int cmd_derive(const CommonArgs& args, const std::string& checkpoint_path,
               const std::vector<std::string>& adapted_files, int tasks_override,
               const std::string& out_name) {
  RunConfig cfg = load_config(args);
  require_section(cfg.has_derive, "derive");
  Genotype genotype;
  if (!adapted_files.empty()) {
    std::vector<ParamSet> adapted;
    for (const std::string& f : adapted_files) adapted.push_back(checkpoint_load(f).params);
    genotype = derive_from_posteriors(adapted, "tasks=" + std::to_string(adapted.size()) +
                                                   " tau=" + format_double(cfg.derive.tau));
  } else {
    require_section(cfg.has_variational, "variational");
    require_section(cfg.has_meta, "meta");
    SuperNet net = build_supernet(cfg);
    Corpus corpus = resolve_corpus(cfg);
    const std::string ckpt_file =
        checkpoint_path.empty() ? join_path(cfg.out_dir, "checkpoint.bmc") : checkpoint_path;
    Checkpoint ckpt = load_checkpoint_checked(ckpt_file, cfg, false);
    DeriveConfig dcfg;
    dcfg.adapt_tasks = tasks_override > 0 ? tasks_override : cfg.derive.tasks;
    dcfg.adapt = cfg.meta;
    dcfg.tau = cfg.derive.tau;
    dcfg.seed = cfg.seed;
    const int res = first_resolution(cfg.supernet, cfg.derive.resolution);
    std::vector<TaskSpec> task_list;
    for (int i = 0; i < dcfg.adapt_tasks; ++i) {
      RngStream rng = make_stream(cfg.seed, "adapt-task", static_cast<std::uint64_t>(i));
      task_list.push_back(sample_task(corpus, cfg.derive.task_classes, res, rng,
                                      family_pool(corpus, cfg.derive.family)));
    }
    genotype = derive_genotype(net, ckpt.params, corpus, task_list, dcfg);
  }
  const std::string out_file = out_name.empty() ? "genotype.txt" : out_name;
  save_genotype(join_path(cfg.out_dir, out_file), genotype);
  write_manifest(cfg.out_dir, cfg.canonical_json, cfg.seed, {out_file});
  std::cout << "derive: -> " << out_file << "\n" << genotype_to_text(genotype);
  return 0;
}

int cmd_train_full(const CommonArgs& args, const std::string& genotype_path) {
  RunConfig cfg = load_config(args);
  require_section(cfg.has_full, "full");
  Corpus corpus = resolve_corpus(cfg);
  const std::string geno_file =
      genotype_path.empty() ? join_path(cfg.out_dir, "genotype.txt") : genotype_path;
  const Genotype genotype = load_genotype(geno_file);

  FullNetConfig net_cfg = cfg.full.net;
  net_cfg.in_channels = corpus.channels;
  const FullNet net = FullNet::build(genotype, net_cfg);
  const int res = net_cfg.heads.empty() ? 16 : first_resolution(
      SuperNetConfig{2, 8, net_cfg.classes, net_cfg.in_channels, net_cfg.heads}, cfg.full.resolution);

  RngStream task_rng = make_stream(cfg.seed, "full-task", cfg.full.task_seed);
  TaskSpec task = sample_task(corpus, cfg.full.task_classes, res, task_rng,
                              family_pool(corpus, cfg.full.family));
  TaskData data = materialize_task(corpus, task);

  TrainSchedule schedule = cfg.full.schedule;
  schedule.seed = mix_u64(cfg.seed, hash_label("train-full"));
  ParamSet params = net.init_params(mix_u64(cfg.seed, hash_label("full-init")));
  TrainTrace trace = train_full(net, params, data, schedule);

  CsvSink csv(join_path(cfg.out_dir, "train_full.csv"),
              {"epoch", "train_loss", "train_accuracy", "val_accuracy"});
  for (size_t e = 0; e < trace.val_accuracy.size(); ++e) {
    csv.append({std::to_string(e), format_double(trace.train_loss[e]),
                format_double(trace.train_accuracy[e]), format_double(trace.val_accuracy[e])});
  }
  checkpoint_save(join_path(cfg.out_dir, "full_params.bmc"),
                  Checkpoint{config_hash(cfg), schedule.epochs, cfg.seed, params});
  write_manifest(cfg.out_dir, cfg.canonical_json, cfg.seed, {"train_full.csv", "full_params.bmc"});
  std::cout << "train-full: " << net.param_count() << " params, final val accuracy "
            << (trace.val_accuracy.empty() ? 0.0 : trace.val_accuracy.back()) << "\n";
  return 0;
}

int cmd_fast_adapt(const CommonArgs& args, const std::string& checkpoint_path) {
  RunConfig cfg = load_config(args);
  require_section(cfg.has_variational, "variational");
  require_section(cfg.has_meta, "meta");
  require_section(cfg.has_fast_adapt, "fast_adapt");
  SuperNet net = build_supernet(cfg);

  const std::string ckpt_file =
      checkpoint_path.empty() ? join_path(cfg.out_dir, "checkpoint.bmc") : checkpoint_path;
  Checkpoint ckpt = load_checkpoint_checked(ckpt_file, cfg, false);

  // Held-out task: fresh synthetic corpus seed never used in meta-training,
  // or a fresh task from an ingested corpus.
  Corpus held_out = cfg.corpus.kind == "file"
                        ? resolve_corpus(cfg)
                        : generate_synthetic_corpus(cfg.fast_adapt.held_out_corpus_seed,
                                                    cfg.corpus.synth);
  const int res = first_resolution(cfg.supernet, cfg.fast_adapt.resolution);
  RngStream task_rng = make_stream(cfg.seed, "fast-adapt-task");
  TaskSpec task = sample_task(held_out, cfg.fast_adapt.task_classes, res, task_rng,
                              family_pool(held_out, cfg.fast_adapt.family));

  std::vector<FastAdaptArm> arms;
  for (const std::string& name : cfg.fast_adapt.arms) arms.push_back(fast_adapt_arm_from_string(name));
  FastAdaptConfig facfg;
  facfg.epochs = cfg.fast_adapt.epochs;
  facfg.adapt = cfg.meta;
  facfg.tau = cfg.fast_adapt.tau;
  facfg.seed = cfg.seed;
  const auto curves = fast_adapt_experiment(net, ckpt.params, held_out, task, arms, facfg);

  CsvSink csv(join_path(cfg.out_dir, "fast_adapt.csv"), {"arm", "epoch", "val_accuracy"});
  for (const FastAdaptCurve& c : curves) {
    for (size_t e = 0; e < c.val_accuracy.size(); ++e) {
      csv.append({fast_adapt_arm_name(c.arm), std::to_string(e),
                  format_double(c.val_accuracy[static_cast<size_t>(e)])});
    }
  }
  write_manifest(cfg.out_dir, cfg.canonical_json, cfg.seed, {"fast_adapt.csv"});
  std::cout << "fast-adapt: " << curves.size() << " arms x " << cfg.fast_adapt.epochs
            << " epochs -> fast_adapt.csv\n";
  return 0;
}

int cmd_pca_export(const CommonArgs& args, const std::vector<std::string>& inputs,
                   const std::string& what, int k) {
  RunConfig cfg = load_config(args);
  if (inputs.empty()) throw ConfigError("pca-export: need at least one --input file=label");
  if (what != "phi" && what != "psi") throw ConfigError("pca-export: --what must be phi or psi");

  std::vector<std::vector<double>> samples;
  std::vector<std::string> labels;
  for (const std::string& spec : inputs) {
    const auto eq = spec.find('=');
    const std::string file = eq == std::string::npos ? spec : spec.substr(0, eq);
    const std::string label = eq == std::string::npos ? fs::path(file).stem().string()
                                                      : spec.substr(eq + 1);
    const Checkpoint ckpt = checkpoint_load(file);
    std::vector<double> flat;
    if (what == "phi") {
      for (const char* key : {SuperNet::kArchNormal, SuperNet::kArchReduce}) {
        const Tensor& t = ckpt.params.values.at(key);
        flat.insert(flat.end(), t.data.begin(), t.data.end());
      }
    } else {
      for (const auto& [name, scale] : ckpt.params.scales) {
        const Tensor& t = ckpt.params.values.at(name);
        flat.insert(flat.end(), t.data.begin(), t.data.end());
      }
    }
    samples.push_back(std::move(flat));
    labels.push_back(label);
  }

  const PcaResult result = pca(samples, k);
  std::vector<std::string> coord_cols = {"label"};
  for (int c = 0; c < result.effective_k; ++c) coord_cols.push_back("pc" + std::to_string(c + 1));
  CsvSink coords(join_path(cfg.out_dir, "pca_coords.csv"), coord_cols);
  for (size_t i = 0; i < samples.size(); ++i) {
    std::vector<std::string> row = {labels[i]};
    for (int c = 0; c < result.effective_k; ++c) {
      row.push_back(format_double(result.coordinates.at2(static_cast<int>(i), c)));
    }
    coords.append(row);
  }
  CsvSink variance(join_path(cfg.out_dir, "pca_variance.csv"),
                   {"component", "eigenvalue", "explained_ratio"});
  for (int c = 0; c < result.effective_k; ++c) {
    variance.append({std::to_string(c + 1), format_double(result.eigenvalues[static_cast<size_t>(c)]),
                     format_double(result.explained_ratio[static_cast<size_t>(c)])});
  }
  {
    std::ofstream meta(join_path(cfg.out_dir, "pca_meta.json"));
    meta << "{\"requested_k\": " << result.requested_k
         << ", \"effective_k\": " << result.effective_k << ", \"reduced\": "
         << (result.effective_k < result.requested_k ? "true" : "false") << "}\n";
  }
  write_manifest(cfg.out_dir, cfg.canonical_json, cfg.seed,
                 {"pca_coords.csv", "pca_variance.csv", "pca_meta.json"});
  std::cout << "pca-export: " << samples.size() << " samples, k=" << result.effective_k
            << (result.effective_k < result.requested_k ? " (rank-reduced)" : "") << "\n";
  return 0;
}

SuperNet build_fewshot_supernet(const RunConfig& cfg) {
  require_section(cfg.has_supernet, "supernet");
  SuperNetConfig scfg = cfg.supernet;
  scfg.classes = cfg.fewshot.cfg.n_way;
  scfg.heads = {{cfg.fewshot.cfg.resolution, 1}};
  return SuperNet::build(scfg);
}

void fill_fewshot_splits(FewShotSection& section, const Corpus& corpus) {
  if (!section.cfg.train_classes.empty()) return;
  const std::vector<int> pool = family_pool(corpus, section.family);
  const size_t cut = (pool.size() * 3 + 4) / 5;
  section.cfg.train_classes.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cut));
  section.cfg.test_classes.assign(pool.begin() + static_cast<std::ptrdiff_t>(cut), pool.end());
}

int cmd_fewshot_search(const CommonArgs& args) {
  RunConfig cfg = load_config(args);
  require_section(cfg.has_variational, "variational");
  require_section(cfg.has_fewshot, "fewshot");
  Corpus corpus = resolve_corpus(cfg);
  fill_fewshot_splits(cfg.fewshot, corpus);
  SuperNet net = build_fewshot_supernet(cfg);

  ParamSet initial = net.init_params(mix_u64(cfg.seed, hash_label("fs-init")),
                                     cfg.fewshot.cfg.variational.init_sigma);
  FewShotSearchResult result = fewshot_search(net, initial, corpus, cfg.fewshot.cfg);

  checkpoint_save(join_path(cfg.out_dir, "fs_checkpoint.bmc"),
                  Checkpoint{config_hash(cfg), cfg.fewshot.cfg.search_iterations, cfg.seed,
                             result.meta});
  save_genotype(join_path(cfg.out_dir, "fs_genotype.txt"), result.genotype);
  CsvSink losses(join_path(cfg.out_dir, "fs_losses.csv"), {"iteration", "outer_loss"});
  for (size_t i = 0; i < result.outer_losses.size(); ++i) {
    losses.append({std::to_string(i), format_double(result.outer_losses[i])});
  }
  write_manifest(cfg.out_dir, cfg.canonical_json, cfg.seed,
                 {"fs_checkpoint.bmc", "fs_genotype.txt", "fs_losses.csv"});
  std::cout << "fewshot-search: " << cfg.fewshot.cfg.search_iterations
            << " iterations -> fs_genotype.txt\n"
            << genotype_to_text(result.genotype);
  return 0;
}

int cmd_fewshot_eval(const CommonArgs& args, const std::string& genotype_path) {
  RunConfig cfg = load_config(args);
  require_section(cfg.has_fewshot, "fewshot");
  Corpus corpus = resolve_corpus(cfg);
  fill_fewshot_splits(cfg.fewshot, corpus);
  const std::string geno_file =
      genotype_path.empty() ? join_path(cfg.out_dir, "fs_genotype.txt") : genotype_path;
  const Genotype genotype = load_genotype(geno_file);
  const FewShotEvalResult result = fewshot_eval(genotype, corpus, cfg.fewshot.cfg);

  CsvSink csv(join_path(cfg.out_dir, "fewshot_eval.csv"),
              {"genotype_hash", "episodes", "mean_accuracy", "ci95"});
  std::ostringstream hash_hex;
  hash_hex << std::hex << result.genotype_hash;
  csv.append({hash_hex.str(), std::to_string(result.episodes),
              format_double(result.mean_accuracy), format_double(result.ci95)});
  write_manifest(cfg.out_dir, cfg.canonical_json, cfg.seed, {"fewshot_eval.csv"});
  std::cout << "fewshot-eval: accuracy " << result.mean_accuracy << " +/- " << result.ci95
            << " over " << result.episodes << " episodes\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian meta architecture search over cell-based super-networks"};
  app.require_subcommand(1);

  CommonArgs common;
  int epochs_override = -1;
  std::string resume, checkpoint_path, family = "all", out_name, genotype_path, what = "phi";
  std::uint64_t task_seed = 0;
  int resolution = 0, tasks_override = 0, k = 2;
  double tau_flag = 0.0;
  std::vector<std::string> adapted_files, pca_inputs;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "JSON run configuration")->required();
  };

  CLI::App* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus file");
  add_config(gen);

  CLI::App* train = app.add_subcommand("meta-train", "meta-train the super-network prior");
  add_config(train);
  train->add_option("--epochs", epochs_override, "override meta.epochs");
  train->add_option("--resume", resume, "resume from a checkpoint file");

  CLI::App* adapt = app.add_subcommand("adapt", "adapt the prior to one sampled task");
  add_config(adapt);
  adapt->add_option("--checkpoint", checkpoint_path, "meta checkpoint (default out_dir/checkpoint.bmc)");
  adapt->add_option("--task-seed", task_seed, "task sampling index");
  adapt->add_option("--family", family, "class pool: a | b | all");
  adapt->add_option("--resolution", resolution, "task resolution (default first head)");
  adapt->add_option("--tau", tau_flag, "relaxation temperature (default variational.tau_min)");
  adapt->add_option("--out", out_name, "output posterior filename");

  CLI::App* derive = app.add_subcommand("derive", "commit a discrete genotype");
  add_config(derive);
  derive->add_option("--checkpoint", checkpoint_path, "meta checkpoint");
  derive->add_option("--adapted", adapted_files, "adapted posterior files (skip re-adaptation)");
  derive->add_option("--tasks", tasks_override, "override derive.tasks");
  derive->add_option("--out", out_name, "output genotype filename");

  CLI::App* full = app.add_subcommand("train-full", "train a committed full network");
  add_config(full);
  full->add_option("--genotype", genotype_path, "genotype file (default out_dir/genotype.txt)");

  CLI::App* fast = app.add_subcommand("fast-adapt", "fast-adaptation experiment on a held-out task");
  add_config(fast);
  fast->add_option("--checkpoint", checkpoint_path, "meta checkpoint");

  CLI::App* pca_cmd = app.add_subcommand("pca-export", "export posterior PCA coordinates");
  add_config(pca_cmd);
  pca_cmd->add_option("--input", pca_inputs, "posterior file=label (repeatable)")->required();
  pca_cmd->add_option("--what", what, "phi | psi");
  pca_cmd->add_option("--k", k, "number of components");

  CLI::App* fss = app.add_subcommand("fewshot-search", "unrolled few-shot architecture search");
  add_config(fss);

  CLI::App* fse = app.add_subcommand("fewshot-eval", "second-order MAML evaluation of a genotype");
  add_config(fse);
  fse->add_option("--genotype", genotype_path, "genotype file (default out_dir/fs_genotype.txt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_name() == "CallForHelp" ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_corpus(common);
    if (train->parsed()) return cmd_meta_train(common, epochs_override, resume);
    if (adapt->parsed())
      return cmd_adapt(common, checkpoint_path, task_seed, family, resolution, tau_flag, out_name);
    if (derive->parsed())
      return cmd_derive(common, checkpoint_path, adapted_files, tasks_override, out_name);
    if (full->parsed()) return cmd_train_full(common, genotype_path);
    if (fast->parsed()) return cmd_fast_adapt(common, checkpoint_path);
    if (pca_cmd->parsed()) return cmd_pca_export(common, pca_inputs, what, k);
    if (fss->parsed()) return cmd_fewshot_search(common);
    if (fse->parsed()) return cmd_fewshot_eval(common, genotype_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
