#include "metanas/derive.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "metanas/errors.hpp"
#include "metanas/variational.hpp"

namespace metanas {

bool Genotype::operator==(const Genotype& other) const {
  auto cells_equal = [](const GenotypeCell& a, const GenotypeCell& b) {
    for (int n = 0; n < CellSpec::kIntermediateNodes; ++n)
      for (int e = 0; e < 2; ++e) {
        const auto& x = a.nodes[static_cast<size_t>(n)][static_cast<size_t>(e)];
        const auto& y = b.nodes[static_cast<size_t>(n)][static_cast<size_t>(e)];
        if (x.input != y.input || x.op != y.op) return false;
      }
    return true;
  };
  return cells_equal(normal, other.normal) && cells_equal(reduce, other.reduce);
}

std::uint64_t Genotype::content_hash() const {
  const std::string text = genotype_to_text(*this);
  return fnv1a_bytes(text.data(), text.size());
}

Tensor mean_arch_probs(const std::vector<Tensor>& phi_blocks) {
  if (phi_blocks.empty()) throw ConfigError("mean_arch_probs: no logit blocks");
  Tensor mean = Tensor::zeros(phi_blocks[0].shape);
  for (const Tensor& phi : phi_blocks) {
    check_same_shape("mean_arch_probs", mean, phi);
    const int rows = phi.dim(0), cols = phi.dim(1);
    for (int r = 0; r < rows; ++r) {
      double m = -1e300;
      for (int j = 0; j < cols; ++j) m = std::max(m, phi.at2(r, j));
      double denom = 0.0;
      for (int j = 0; j < cols; ++j) denom += std::exp(phi.at2(r, j) - m);
      for (int j = 0; j < cols; ++j) {
        mean.at2(r, j) += std::exp(phi.at2(r, j) - m) / denom;
      }
    }
  }
  for (double& v : mean.data) v /= static_cast<double>(phi_blocks.size());
  return mean;
}

GenotypeCell commit_cell(const Tensor& mean_probs) {
  if (mean_probs.rank() != 2 || mean_probs.dim(0) != cell_edge_count() ||
      mean_probs.dim(1) != kNumOps) {
    throw ShapeError("commit_cell: probability block must be (" +
                     std::to_string(cell_edge_count()) + "," + std::to_string(kNumOps) + ")");
  }
  GenotypeCell cell;
  for (int dst = CellSpec::kInputNodes; dst < CellSpec::kTotalNodes; ++dst) {
    // Per candidate edge: best non-none op (ties -> lowest code).
    struct Scored {
      int input;
      OpKind op;
      double score;
    };
    std::vector<Scored> scored;
    for (int src = 0; src < dst; ++src) {
      const int e = cell_edge_index(src, dst);
      int best_op = -1;
      double best_p = -1.0;
      for (int j = 0; j < kNumOps; ++j) {
        if (static_cast<OpKind>(j) == OpKind::kNone) continue;
        const double p = mean_probs.at2(e, j);
        if (p > best_p) {
          best_p = p;
          best_op = j;
        }
      }
      if (best_p <= 0.0) continue;  // all non-none mass is zero on this edge
      scored.push_back({src, static_cast<OpKind>(best_op), best_p});
    }
    if (static_cast<int>(scored.size()) < 2) {
      throw NumericFault("derive: degenerate posterior, node " + std::to_string(dst) +
                         " has fewer than two edges with non-none mass");
    }
    // Retain the two highest-scoring edges; ties -> lowest input index
    // (stable sort preserves ascending input order among equals).
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Scored& a, const Scored& b) { return a.score > b.score; });
    for (int k = 0; k < 2; ++k) {
      cell.nodes[static_cast<size_t>(dst - CellSpec::kInputNodes)][static_cast<size_t>(k)] = {
          scored[static_cast<size_t>(k)].input, scored[static_cast<size_t>(k)].op};
    }
    // Canonical order within a node: by input index.
    auto& pair = cell.nodes[static_cast<size_t>(dst - CellSpec::kInputNodes)];
    if (pair[0].input > pair[1].input) std::swap(pair[0], pair[1]);
  }
  return cell;
}

Genotype derive_from_posteriors(const std::vector<ParamSet>& adapted, const std::string& note) {
  if (adapted.empty()) throw ConfigError("derive: need at least one adapted posterior");
  std::vector<Tensor> phi_n, phi_r;
  for (const ParamSet& p : adapted) {
    phi_n.push_back(p.values.at(SuperNet::kArchNormal));
    phi_r.push_back(p.values.at(SuperNet::kArchReduce));
  }
  const Tensor mean_n = mean_arch_probs(phi_n);
  const Tensor mean_r = mean_arch_probs(phi_r);
  Genotype g;
  g.normal = commit_cell(mean_n);
  g.reduce = commit_cell(mean_r);
  std::uint64_t h = fnv1a_bytes(mean_n.data.data(), mean_n.data.size() * sizeof(double));
  g.phi_hash = fnv1a_bytes(mean_r.data.data(), mean_r.data.size() * sizeof(double), h);
  g.derivation_note = note;
  return g;
}

Genotype derive_genotype(const SuperNet& net, const ParamSet& meta, const Corpus& corpus,
                         const std::vector<TaskSpec>& tasks, const DeriveConfig& cfg) {
  if (tasks.empty()) throw ConfigError("derive_genotype: need at least one task");
  std::vector<ParamSet> adapted;
  for (size_t i = 0; i < tasks.size(); ++i) {
    AdaptContext ctx{cfg.seed, kAdaptStreamTag, static_cast<std::uint64_t>(i), cfg.tau};
    adapted.push_back(inner_adapt(net, meta, corpus, tasks[i], cfg.adapt, ctx).params);
  }
  std::ostringstream note;
  note << "tasks=" << tasks.size() << " tau=" << cfg.tau;
  return derive_from_posteriors(adapted, note.str());
}

std::string genotype_to_text(const Genotype& g) {
  std::ostringstream os;
  os << "genotype v1\n";
  if (g.phi_hash != 0) {
    os << "# phi_hash " << std::hex << g.phi_hash << std::dec << "\n";
  }
  if (!g.derivation_note.empty()) os << "# derivation " << g.derivation_note << "\n";
  auto emit_cell = [&os](const char* name, const GenotypeCell& cell) {
    os << name << ":\n";
    for (int n = 0; n < CellSpec::kIntermediateNodes; ++n) {
      os << "  node" << (n + CellSpec::kInputNodes) << ":";
      for (const GenotypeEdge& e : cell.nodes[static_cast<size_t>(n)]) {
        os << " (" << e.input << "," << op_name(e.op) << ")";
      }
      os << "\n";
    }
  };
  emit_cell("normal", g.normal);
  emit_cell("reduce", g.reduce);
  return os.str();
}

namespace {

GenotypeCell parse_cell(std::istringstream& is) {
  GenotypeCell cell;
  std::string line;
  for (int n = 0; n < CellSpec::kIntermediateNodes; ++n) {
    if (!std::getline(is, line)) throw IoError("genotype: truncated cell block");
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    const std::string expect = "node" + std::to_string(n + CellSpec::kInputNodes) + ":";
    if (tag != expect) throw IoError("genotype: expected " + expect + ", got " + tag);
    for (int e = 0; e < 2; ++e) {
      std::string pair;
      ls >> pair;
      if (pair.size() < 5 || pair.front() != '(' || pair.back() != ')') {
        throw IoError("genotype: malformed edge " + pair);
      }
      const auto comma = pair.find(',');
      if (comma == std::string::npos) throw IoError("genotype: malformed edge " + pair);
      GenotypeEdge edge;
      edge.input = std::stoi(pair.substr(1, comma - 1));
      edge.op = op_from_name(pair.substr(comma + 1, pair.size() - comma - 2));
      if (edge.op == OpKind::kNone) throw IoError("genotype: none op cannot be retained");
      if (edge.input < 0 || edge.input >= n + CellSpec::kInputNodes) {
        throw IoError("genotype: input " + std::to_string(edge.input) + " invalid for node " +
                      std::to_string(n + CellSpec::kInputNodes));
      }
      cell.nodes[static_cast<size_t>(n)][static_cast<size_t>(e)] = edge;
    }
  }
  return cell;
}

}  // namespace

Genotype genotype_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "genotype v1") {
    throw IoError("genotype: missing 'genotype v1' header");
  }
  Genotype g;
  while (std::getline(is, line)) {
    if (line.rfind("# phi_hash ", 0) == 0) {
      g.phi_hash = std::stoull(line.substr(11), nullptr, 16);
      continue;
    }
    if (line.rfind("# derivation ", 0) == 0) {
      g.derivation_note = line.substr(13);
      continue;
    }
    if (line == "normal:") {
      g.normal = parse_cell(is);
    } else if (line == "reduce:") {
      g.reduce = parse_cell(is);
    } else if (!line.empty()) {
      throw IoError("genotype: unexpected line: " + line);
    }
  }
  return g;
}

void save_genotype(const std::string& path, const Genotype& g) {
  std::ofstream os(path);
  if (!os) throw IoError("genotype: cannot open " + path + " for writing");
  os << genotype_to_text(g);
  if (!os) throw IoError("genotype: write failed for " + path);
}

Genotype load_genotype(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("genotype: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return genotype_from_text(buf.str());
}

Genotype all_skip_genotype() {
  Genotype g;
  for (int n = 0; n < CellSpec::kIntermediateNodes; ++n) {
    g.normal.nodes[static_cast<size_t>(n)] = {{{0, OpKind::kSkip}, {1, OpKind::kSkip}}};
    g.reduce.nodes[static_cast<size_t>(n)] = {{{0, OpKind::kSkip}, {1, OpKind::kSkip}}};
  }
  g.derivation_note = "all-skip baseline";
  return g;
}

}  // namespace metanas
