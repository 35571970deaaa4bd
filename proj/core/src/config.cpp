#include "metanas/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metanas/corpus_io.hpp"
#include "metanas/errors.hpp"
#include "metanas/params.hpp"

namespace metanas {

namespace {

using json = nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("config: unknown key '" + where + key + "'");
    }
  }
}

template <typename T>
T require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) {
    throw ConfigError("config: missing required key '" + where + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad type for '" + where + key + "'");
  }
}

template <typename T>
T optional(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad type for '" + where + key + "'");
  }
}

SuperNetConfig parse_supernet(const json& obj) {
  reject_unknown(obj, {"cells", "channels", "classes", "in_channels", "heads"}, "supernet.");
  SuperNetConfig cfg;
  cfg.cells = require<int>(obj, "cells", "supernet.");
  cfg.channels = require<int>(obj, "channels", "supernet.");
  cfg.classes = require<int>(obj, "classes", "supernet.");
  cfg.in_channels = optional<int>(obj, "in_channels", 1, "supernet.");
  if (obj.contains("heads")) {
    cfg.heads.clear();
    for (const auto& h : obj.at("heads")) {
      reject_unknown(h, {"resolution", "stride"}, "supernet.heads.");
      cfg.heads.push_back(
          {require<int>(h, "resolution", "supernet.heads."), require<int>(h, "stride", "supernet.heads.")});
    }
  }
  return cfg;
}

VariationalConfig parse_variational(const json& obj) {
  reject_unknown(obj,
                 {"tau0", "tau_min", "tau_decay", "beta", "beta_scale_by_dataset", "weight_mode",
                  "mc_samples", "init_sigma"},
                 "variational.");
  VariationalConfig cfg;
  cfg.tau0 = require<double>(obj, "tau0", "variational.");
  cfg.tau_min = require<double>(obj, "tau_min", "variational.");
  cfg.tau_decay = require<double>(obj, "tau_decay", "variational.");
  cfg.beta = require<double>(obj, "beta", "variational.");
  cfg.beta_scale_by_dataset = optional<bool>(obj, "beta_scale_by_dataset", true, "variational.");
  cfg.weight_mode =
      weight_mode_from_string(optional<std::string>(obj, "weight_mode", "point", "variational."));
  cfg.mc_samples = optional<int>(obj, "mc_samples", 1, "variational.");
  cfg.init_sigma = optional<double>(obj, "init_sigma", 0.05, "variational.");
  if (cfg.tau0 <= 0.0 || cfg.tau_min <= 0.0) throw ConfigError("config: tau must stay positive");
  if (cfg.mc_samples < 1) throw ConfigError("config: mc_samples must be >= 1");
  return cfg;
}

void parse_meta(const json& obj, MetaTrainConfig& cfg) {
  reject_unknown(obj,
                 {"epochs", "tasks_per_epoch", "inner_steps", "inner_lr", "meta_lr", "batch_size",
                  "task_classes"},
                 "meta.");
  cfg.epochs = require<int>(obj, "epochs", "meta.");
  cfg.tasks_per_epoch = require<int>(obj, "tasks_per_epoch", "meta.");
  cfg.inner_lr = require<double>(obj, "inner_lr", "meta.");
  cfg.meta_lr = require<double>(obj, "meta_lr", "meta.");
  cfg.inner_steps = optional<int>(obj, "inner_steps", -1, "meta.");
  cfg.batch_size = optional<int>(obj, "batch_size", 16, "meta.");
  cfg.task_classes = optional<int>(obj, "task_classes", 10, "meta.");
  if (cfg.inner_lr <= 0.0 || cfg.meta_lr < 0.0) {
    throw ConfigError("config: learning rates must be positive");
  }
}

CorpusConfig parse_corpus(const json& obj) {
  reject_unknown(obj, {"kind", "path", "seed", "classes", "per_class", "size"}, "corpus.");
  CorpusConfig cfg;
  cfg.kind = optional<std::string>(obj, "kind", "synthetic", "corpus.");
  if (cfg.kind != "synthetic" && cfg.kind != "file") {
    throw ConfigError("config: corpus.kind must be 'synthetic' or 'file'");
  }
  cfg.path = optional<std::string>(obj, "path", "", "corpus.");
  cfg.seed = optional<std::uint64_t>(obj, "seed", 0, "corpus.");
  cfg.synth.classes = optional<int>(obj, "classes", 20, "corpus.");
  cfg.synth.per_class = optional<int>(obj, "per_class", 24, "corpus.");
  cfg.synth.size = optional<int>(obj, "size", 32, "corpus.");
  return cfg;
}

DeriveSection parse_derive(const json& obj) {
  reject_unknown(obj, {"tasks", "tau", "family", "resolution", "task_classes"}, "derive.");
  DeriveSection s;
  s.tasks = optional<int>(obj, "tasks", 4, "derive.");
  s.tau = require<double>(obj, "tau", "derive.");
  s.family = optional<std::string>(obj, "family", "all", "derive.");
  s.resolution = optional<int>(obj, "resolution", 0, "derive.");
  s.task_classes = optional<int>(obj, "task_classes", 10, "derive.");
  return s;
}

FullSection parse_full(const json& obj) {
  reject_unknown(obj,
                 {"cells", "channels", "classes", "in_channels", "heads", "epochs", "lr", "lr_min",
                  "batch_size", "family", "resolution", "task_classes", "task_seed"},
                 "full.");
  FullSection s;
  s.net.cells = require<int>(obj, "cells", "full.");
  s.net.channels = require<int>(obj, "channels", "full.");
  s.net.classes = optional<int>(obj, "classes", 10, "full.");
  s.net.in_channels = optional<int>(obj, "in_channels", 1, "full.");
  if (obj.contains("heads")) {
    s.net.heads.clear();
    for (const auto& h : obj.at("heads")) {
      reject_unknown(h, {"resolution", "stride"}, "full.heads.");
      s.net.heads.push_back(
          {require<int>(h, "resolution", "full.heads."), require<int>(h, "stride", "full.heads.")});
    }
  }
  s.schedule.epochs = require<int>(obj, "epochs", "full.");
  s.schedule.lr = require<double>(obj, "lr", "full.");
  s.schedule.lr_min = optional<double>(obj, "lr_min", 0.0, "full.");
  s.schedule.batch_size = optional<int>(obj, "batch_size", 32, "full.");
  s.family = optional<std::string>(obj, "family", "all", "full.");
  s.resolution = optional<int>(obj, "resolution", 0, "full.");
  s.task_classes = optional<int>(obj, "task_classes", 10, "full.");
  s.task_seed = optional<std::uint64_t>(obj, "task_seed", 7, "full.");
  return s;
}

FastAdaptSection parse_fast_adapt(const json& obj) {
  reject_unknown(obj,
                 {"epochs", "tau", "family", "resolution", "task_classes",
                  "held_out_corpus_seed", "arms"},
                 "fast_adapt.");
  FastAdaptSection s;
  s.epochs = optional<int>(obj, "epochs", 6, "fast_adapt.");
  s.tau = require<double>(obj, "tau", "fast_adapt.");
  s.family = optional<std::string>(obj, "family", "b", "fast_adapt.");
  s.resolution = optional<int>(obj, "resolution", 0, "fast_adapt.");
  s.task_classes = optional<int>(obj, "task_classes", 10, "fast_adapt.");
  s.held_out_corpus_seed = optional<std::uint64_t>(obj, "held_out_corpus_seed", 99, "fast_adapt.");
  s.arms = optional<std::vector<std::string>>(obj, "arms",
                                              {"adapt", "freeze-arch", "scratch"}, "fast_adapt.");
  return s;
}

FewShotSection parse_fewshot(const json& obj) {
  reject_unknown(obj,
                 {"n_way", "k_shot", "query_per_way", "tasks_per_update", "inner_steps_search",
                  "inner_steps_eval", "inner_lr", "meta_lr", "search_iterations",
                  "eval_iterations", "eval_episodes", "derive_episodes", "use_softmax",
                  "resolution", "tau", "eval_cells", "eval_channels", "family", "train_classes",
                  "test_classes"},
                 "fewshot.");
  FewShotSection s;
  s.cfg.n_way = optional<int>(obj, "n_way", 5, "fewshot.");
  s.cfg.k_shot = optional<int>(obj, "k_shot", 5, "fewshot.");
  s.cfg.query_per_way = optional<int>(obj, "query_per_way", 5, "fewshot.");
  s.cfg.tasks_per_update = optional<int>(obj, "tasks_per_update", 2, "fewshot.");
  s.cfg.inner_steps_search = optional<int>(obj, "inner_steps_search", 1, "fewshot.");
  s.cfg.inner_steps_eval = optional<int>(obj, "inner_steps_eval", 5, "fewshot.");
  s.cfg.inner_lr = require<double>(obj, "inner_lr", "fewshot.");
  s.cfg.meta_lr = require<double>(obj, "meta_lr", "fewshot.");
  s.cfg.search_iterations = optional<int>(obj, "search_iterations", 500, "fewshot.");
  s.cfg.eval_iterations = optional<int>(obj, "eval_iterations", 300, "fewshot.");
  s.cfg.eval_episodes = optional<int>(obj, "eval_episodes", 200, "fewshot.");
  s.cfg.derive_episodes = optional<int>(obj, "derive_episodes", 4, "fewshot.");
  s.cfg.use_softmax = optional<bool>(obj, "use_softmax", false, "fewshot.");
  s.cfg.resolution = optional<int>(obj, "resolution", 16, "fewshot.");
  s.cfg.tau = require<double>(obj, "tau", "fewshot.");
  s.cfg.eval_cells = optional<int>(obj, "eval_cells", 4, "fewshot.");
  s.cfg.eval_channels = optional<int>(obj, "eval_channels", 8, "fewshot.");
  s.family = optional<std::string>(obj, "family", "a", "fewshot.");
  s.cfg.train_classes = optional<std::vector<int>>(obj, "train_classes", {}, "fewshot.");
  s.cfg.test_classes = optional<std::vector<int>>(obj, "test_classes", {}, "fewshot.");
  return s;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(root,
                 {"seed", "out_dir", "workers", "corpus", "supernet", "variational", "meta",
                  "derive", "full", "fast_adapt", "fewshot"},
                 "");

  RunConfig cfg;
  cfg.seed = require<std::uint64_t>(root, "seed", "");
  cfg.out_dir = optional<std::string>(root, "out_dir", "run", "");
  cfg.workers = optional<int>(root, "workers", 1, "");
  if (cfg.workers < 1) throw ConfigError("config: workers must be >= 1");
  if (root.contains("corpus")) cfg.corpus = parse_corpus(root.at("corpus"));
  if (root.contains("supernet")) {
    cfg.supernet = parse_supernet(root.at("supernet"));
    cfg.has_supernet = true;
  }
  if (root.contains("variational")) {
    cfg.variational = parse_variational(root.at("variational"));
    cfg.has_variational = true;
  }
  if (root.contains("meta")) {
    parse_meta(root.at("meta"), cfg.meta);
    cfg.has_meta = true;
    cfg.meta.seed = cfg.seed;
    cfg.meta.workers = cfg.workers;
    if (cfg.has_variational) cfg.meta.variational = cfg.variational;
  }
  if (root.contains("derive")) {
    cfg.derive = parse_derive(root.at("derive"));
    cfg.has_derive = true;
  }
  if (root.contains("full")) {
    cfg.full = parse_full(root.at("full"));
    cfg.has_full = true;
  }
  if (root.contains("fast_adapt")) {
    cfg.fast_adapt = parse_fast_adapt(root.at("fast_adapt"));
    cfg.has_fast_adapt = true;
  }
  if (root.contains("fewshot")) {
    cfg.fewshot = parse_fewshot(root.at("fewshot"));
    cfg.has_fewshot = true;
    cfg.fewshot.cfg.seed = cfg.seed;
    if (cfg.has_variational) cfg.fewshot.cfg.variational = cfg.variational;
  }
  cfg.canonical_json = root.dump();  // nlohmann objects iterate sorted by key
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_run_config(buf.str());
}

std::uint64_t config_hash(const RunConfig& cfg) {
  return fnv1a_bytes(cfg.canonical_json.data(), cfg.canonical_json.size());
}

void require_section(bool present, const char* name) {
  if (!present) {
    throw ConfigError(std::string("config: this command requires the '") + name + "' section");
  }
}

Corpus resolve_corpus(const RunConfig& cfg) {
  if (cfg.corpus.kind == "file") {
    if (cfg.corpus.path.empty()) throw ConfigError("config: corpus.kind=file needs corpus.path");
    return load_corpus(cfg.corpus.path);
  }
  const std::uint64_t seed = cfg.corpus.seed != 0 ? cfg.corpus.seed : mix_u64(cfg.seed, hash_label("corpus"));
  return generate_synthetic_corpus(seed, cfg.corpus.synth);
}

std::vector<int> family_pool(const Corpus& corpus, const std::string& family) {
  if (family == "a") return corpus.family_a_classes();
  if (family == "b") return corpus.family_b_classes();
  if (family == "all") return corpus.all_classes();
  throw ConfigError("config: family must be 'a', 'b', or 'all', got '" + family + "'");
}

}  // namespace metanas
