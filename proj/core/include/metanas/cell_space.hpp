#pragma once

#include <string>
#include <vector>

#include "metanas/params.hpp"
#include "metanas/tape.hpp"

namespace metanas {

// The nine candidate edge operations. Integer codes are stable and used
// for serialization and tie-breaking (lowest code wins).
enum class OpKind : int {
  kNone = 0,
  kSkip = 1,
  kMaxPool3 = 2,
  kAvgPool3 = 3,
  kSepConv3 = 4,
  kSepConv5 = 5,
  kSepConv7 = 6,
  kDilConv3 = 7,
  kDilConv5 = 8,
};

inline constexpr int kNumOps = 9;

const char* op_name(OpKind k);
OpKind op_from_name(const std::string& name);
bool op_is_parameterized(OpKind k);
bool op_is_pooling(OpKind k);

// Cell topology: 6 nodes, of which 2 are inputs and 4 intermediate; every
// pair (src, dst) with src < dst and dst intermediate is an edge. The cell
// output is the channel concatenation of the 4 intermediate nodes.
struct CellSpec {
  static constexpr int kTotalNodes = 6;
  static constexpr int kInputNodes = 2;
  static constexpr int kIntermediateNodes = 4;
};

struct CellEdge {
  int src;
  int dst;  // 2..5
};

const std::vector<CellEdge>& cell_edges();  // 14 edges, canonical order
int cell_edge_count();
int cell_edge_index(int src, int dst);

// Parameter inventory of one op instance (names relative to `prefix`).
void append_op_params(ParamSpec& out, const std::string& prefix, OpKind k, int channels);
std::int64_t op_param_count(OpKind k, int channels);

// Builds the op subgraph on `x` (channels -> channels, stride 1 or 2).
// Conv ops follow ReLU-Conv-BN ordering; separable convs apply their
// block twice with the stride on the first block; dilated convs apply once.
Var build_op(const VarStore& params, const std::string& prefix, OpKind k, Var x, int channels,
             int stride);

// Eq-style relaxed edge: sum_j z_j * op_j(x). `z_row` has length J and must
// lie within 1e-6 of the probability simplex.
Var mixed_edge_forward(const VarStore& params, const std::string& edge_prefix, Var x, Var z_row,
                       int channels, int stride);

// One whole cell: inputs are the two (already preprocessed) input nodes at
// the cell's channel count; `z_rows` is the (edges x J) sample block for
// this cell type. Reduce cells apply stride 2 on edges touching the inputs.
Var cell_forward(const VarStore& params, const std::string& cell_prefix,
                 const std::vector<Var>& inputs, Var z_block, int channels, bool is_reduce);

void append_cell_edge_params(ParamSpec& out, const std::string& cell_prefix, int channels);

}  // namespace metanas
