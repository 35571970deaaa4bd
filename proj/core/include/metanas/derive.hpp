#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "metanas/cell_space.hpp"
#include "metanas/meta_search.hpp"
#include "metanas/params.hpp"
#include "metanas/tensor.hpp"

namespace metanas {

// Committed discrete architecture: per intermediate node, exactly two
// (input index, operation) pairs; none is never retained.
struct GenotypeEdge {
  int input = 0;   // node index < the owning node
  OpKind op = OpKind::kSkip;
};

struct GenotypeCell {
  // One entry per intermediate node (node ids 2..5), two edges each.
  std::array<std::array<GenotypeEdge, 2>, CellSpec::kIntermediateNodes> nodes;
};

struct Genotype {
  GenotypeCell normal;
  GenotypeCell reduce;
  std::uint64_t phi_hash = 0;      // hash of the averaged probability blocks
  std::string derivation_note;     // free-form provenance (task count, tau)

  bool operator==(const Genotype& other) const;
  std::uint64_t content_hash() const;
};

// Selection rule applied to one cell type's averaged per-edge probabilities
// (rows = cell edges, cols = J): per edge the best non-none op; per node the
// two incoming edges with the highest best-op probability. Ties break to the
// lowest op code, then the lowest input index.
GenotypeCell commit_cell(const Tensor& mean_probs);

// Mean softmax(phi) over a set of adapted logit blocks.
Tensor mean_arch_probs(const std::vector<Tensor>& phi_blocks);

struct DeriveConfig {
  int adapt_tasks = 4;       // datasets averaged (paper default 8; desk 4)
  MetaTrainConfig adapt;     // inner adaptation settings
  double tau = 0.5;
  std::uint64_t seed = 1;
};

// Stream tag shared by in-process derivation and the CLI adapt command so
// `adapt` followed by `derive --adapted` reproduces derive_genotype bitwise.
inline constexpr std::uint64_t kAdaptStreamTag = 0xADAB7EULL;

// Adapt the meta parameters on each task, average the per-edge softmax(phi)
// blocks, then commit. Throws a derivation error naming the node when every
// incoming edge of some node puts its whole mass on none.
Genotype derive_genotype(const SuperNet& net, const ParamSet& meta, const Corpus& corpus,
                         const std::vector<TaskSpec>& tasks, const DeriveConfig& cfg);

// Commit from already-adapted posteriors (used by the CLI adapt -> derive path).
Genotype derive_from_posteriors(const std::vector<ParamSet>& adapted, const std::string& note);

// Stable text format: cell type -> node -> [(input, op-name)] plus
// provenance comments.
std::string genotype_to_text(const Genotype& g);
Genotype genotype_from_text(const std::string& text);
void save_genotype(const std::string& path, const Genotype& g);
Genotype load_genotype(const std::string& path);

// All-skip baseline (node inputs 0 and 1 for every node).
Genotype all_skip_genotype();

}  // namespace metanas
