#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metanas/fewshot.hpp"
#include "metanas/full_net.hpp"
#include "metanas/meta_search.hpp"
#include "metanas/supernet.hpp"
#include "metanas/task_gen.hpp"
#include "metanas/variational.hpp"

namespace metanas {

struct CorpusConfig {
  std::string kind = "synthetic";  // "synthetic" | "file"
  std::string path;                // load path (kind=file) or gen-corpus output
  std::uint64_t seed = 0;          // 0 -> derived from the run seed
  SyntheticParams synth;
};

struct DeriveSection {
  int tasks = 4;
  double tau = 0.5;
  std::string family = "all";  // class pool: "a" | "b" | "all"
  int resolution = 0;          // 0 -> first registered head
  int task_classes = 10;
};

struct FullSection {
  FullNetConfig net;
  TrainSchedule schedule;
  std::string family = "all";
  int resolution = 0;
  int task_classes = 10;
  std::uint64_t task_seed = 7;
};

struct FastAdaptSection {
  int epochs = 6;
  double tau = 0.5;
  std::string family = "b";
  int resolution = 0;
  int task_classes = 10;
  std::uint64_t held_out_corpus_seed = 99;  // fresh corpus seed, unseen in training
  std::vector<std::string> arms = {"adapt", "freeze-arch", "scratch"};
};

struct FewShotSection {
  FewShotConfig cfg;
  std::string family = "a";
};

// Full run configuration. Sections are optional in the file; each CLI
// command requires the sections it uses. Unknown keys anywhere are
// rejected, and physics-affecting fields (tau schedule, beta, learning
// rates) have no silent defaults.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "run";
  int workers = 1;
  CorpusConfig corpus;
  bool has_supernet = false;
  SuperNetConfig supernet;
  bool has_variational = false;
  VariationalConfig variational;
  bool has_meta = false;
  MetaTrainConfig meta;  // variational member is filled from the shared block
  bool has_derive = false;
  DeriveSection derive;
  bool has_full = false;
  FullSection full;
  bool has_fast_adapt = false;
  FastAdaptSection fast_adapt;
  bool has_fewshot = false;
  FewShotSection fewshot;
  std::string canonical_json;  // sorted-key dump used for hashing/manifest
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::uint64_t config_hash(const RunConfig& cfg);

// Section presence guards (throw ConfigError naming the section).
void require_section(bool present, const char* name);

// Resolves the corpus: loads kind=file, generates kind=synthetic.
Corpus resolve_corpus(const RunConfig& cfg);

// Class pool for a family selector ("a" | "b" | "all").
std::vector<int> family_pool(const Corpus& corpus, const std::string& family);

}  // namespace metanas
