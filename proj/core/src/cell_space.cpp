#include "metanas/cell_space.hpp"

#include <cmath>

#include "metanas/errors.hpp"

namespace metanas {

namespace {

const char* const kOpNames[kNumOps] = {
    "none",          "skip",          "max_pool_3x3", "avg_pool_3x3", "sep_conv_3x3",
    "sep_conv_5x5",  "sep_conv_7x7",  "dil_conv_3x3", "dil_conv_5x5",
};

Shape strided_shape(const Shape& in, int stride) {
  if (stride == 1) return in;
  return {in[0], in[1], (in[2] + 1) / 2, (in[3] + 1) / 2};
}

// ReLU -> depthwise conv -> pointwise conv -> BN.
Var sep_block(const VarStore& p, const std::string& prefix, Var x, int channels, int kernel,
              int stride, int dilation) {
  const int pad = dilation * (kernel - 1) / 2;
  Var h = relu(x);
  h = conv2d(h, p.get(prefix + "/dw"), Conv2dAttrs::padded(stride, pad, dilation, channels));
  h = conv2d(h, p.get(prefix + "/pw"), Conv2dAttrs::padded(1, 0));
  return batch_norm(h, p.get(prefix + "/bng"), p.get(prefix + "/bnb"));
}

void append_sep_block_params(ParamSpec& out, const std::string& prefix, int channels, int kernel) {
  out.push_back({prefix + "/dw", {channels, 1, kernel, kernel}, ParamKind::kConvWeight, true});
  out.push_back({prefix + "/pw", {channels, channels, 1, 1}, ParamKind::kConvWeight, true});
  out.push_back({prefix + "/bng", {channels}, ParamKind::kBnGain, false});
  out.push_back({prefix + "/bnb", {channels}, ParamKind::kBnBias, false});
}

}  // namespace

const char* op_name(OpKind k) { return kOpNames[static_cast<int>(k)]; }

OpKind op_from_name(const std::string& name) {
  for (int i = 0; i < kNumOps; ++i) {
    if (name == kOpNames[i]) return static_cast<OpKind>(i);
  }
  throw ConfigError("unknown operation name: " + name);
}

bool op_is_parameterized(OpKind k) {
  switch (k) {
    case OpKind::kSepConv3:
    case OpKind::kSepConv5:
    case OpKind::kSepConv7:
    case OpKind::kDilConv3:
    case OpKind::kDilConv5:
      return true;
    default:
      return false;
  }
}

bool op_is_pooling(OpKind k) { return k == OpKind::kMaxPool3 || k == OpKind::kAvgPool3; }

const std::vector<CellEdge>& cell_edges() {
  static const std::vector<CellEdge> edges = [] {
    std::vector<CellEdge> e;
    for (int dst = CellSpec::kInputNodes; dst < CellSpec::kTotalNodes; ++dst) {
      for (int src = 0; src < dst; ++src) e.push_back({src, dst});
    }
    return e;
  }();
  return edges;
}

int cell_edge_count() { return static_cast<int>(cell_edges().size()); }

int cell_edge_index(int src, int dst) {
  const auto& edges = cell_edges();
  for (size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].src == src && edges[i].dst == dst) return static_cast<int>(i);
  }
  throw ConfigError("no cell edge (" + std::to_string(src) + "," + std::to_string(dst) + ")");
}

void append_op_params(ParamSpec& out, const std::string& prefix, OpKind k, int channels) {
  switch (k) {
    case OpKind::kSepConv3:
    case OpKind::kSepConv5:
    case OpKind::kSepConv7: {
      const int kernel = k == OpKind::kSepConv3 ? 3 : (k == OpKind::kSepConv5 ? 5 : 7);
      append_sep_block_params(out, prefix + "/b0", channels, kernel);
      append_sep_block_params(out, prefix + "/b1", channels, kernel);
      break;
    }
    case OpKind::kDilConv3:
    case OpKind::kDilConv5: {
      const int kernel = k == OpKind::kDilConv3 ? 3 : 5;
      append_sep_block_params(out, prefix, channels, kernel);
      break;
    }
    default:
      break;  // pooling / skip / none carry no parameters
  }
}

std::int64_t op_param_count(OpKind k, int channels) {
  ParamSpec spec;
  append_op_params(spec, "", k, channels);
  std::int64_t n = 0;
  for (const auto& info : spec) n += shape_numel(info.shape);
  return n;
}

Var build_op(const VarStore& params, const std::string& prefix, OpKind k, Var x, int channels,
             int stride) {
  switch (k) {
    case OpKind::kNone:
      return x.tape->constant(Tensor::zeros(strided_shape(x.value().shape, stride)));
    case OpKind::kSkip:
      return stride == 1 ? x : subsample2(x);
    case OpKind::kMaxPool3:
      return max_pool3(x, stride);
    case OpKind::kAvgPool3:
      return avg_pool3(x, stride);
    case OpKind::kSepConv3:
    case OpKind::kSepConv5:
    case OpKind::kSepConv7: {
      const int kernel = k == OpKind::kSepConv3 ? 3 : (k == OpKind::kSepConv5 ? 5 : 7);
      Var h = sep_block(params, prefix + "/b0", x, channels, kernel, stride, 1);
      return sep_block(params, prefix + "/b1", h, channels, kernel, 1, 1);
    }
    case OpKind::kDilConv3:
      return sep_block(params, prefix, x, channels, 3, stride, 2);
    case OpKind::kDilConv5:
      return sep_block(params, prefix, x, channels, 5, stride, 2);
  }
  throw ConfigError("build_op: bad op kind " + std::to_string(static_cast<int>(k)));
}

Var mixed_edge_forward(const VarStore& params, const std::string& edge_prefix, Var x, Var z_row,
                       int channels, int stride) {
  const Tensor& zv = z_row.value();
  if (zv.numel() != kNumOps) {
    throw ShapeError("mixed_edge_forward: z has " + std::to_string(zv.numel()) +
                     " components, expected " + std::to_string(kNumOps));
  }
  double sum = 0.0;
  for (double v : zv.data) {
    if (v < -1e-6 || v > 1.0 + 1e-6) {
      throw ShapeError("mixed_edge_forward: z component " + std::to_string(v) +
                       " outside [0,1]");
    }
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-6) {
    throw ShapeError("mixed_edge_forward: z sums to " + std::to_string(sum));
  }

  Var flat = reshape(z_row, {kNumOps});
  Var acc{};
  for (int j = 0; j < kNumOps; ++j) {
    Var out_j = build_op(params, edge_prefix + "/" + kOpNames[j], static_cast<OpKind>(j), x,
                         channels, stride);
    Var weighted = mul_scalar(out_j, take(flat, j));
    acc = acc.defined() ? add(acc, weighted) : weighted;
  }
  return acc;
}

Var cell_forward(const VarStore& params, const std::string& cell_prefix,
                 const std::vector<Var>& inputs, Var z_block, int channels, bool is_reduce) {
  if (inputs.size() != CellSpec::kInputNodes) {
    throw ShapeError("cell_forward: expected 2 inputs, got " + std::to_string(inputs.size()));
  }
  for (const Var& in : inputs) {
    if (in.value().dim(1) != channels) {
      throw ShapeError("cell_forward: input has " + std::to_string(in.value().dim(1)) +
                       " channels, cell expects " + std::to_string(channels));
    }
  }
  const Tensor& zv = z_block.value();
  if (zv.rank() != 2 || zv.dim(0) != cell_edge_count() || zv.dim(1) != kNumOps) {
    throw ShapeError("cell_forward: z block must be (" + std::to_string(cell_edge_count()) + "," +
                     std::to_string(kNumOps) + "), got " + shape_str(zv.shape));
  }

  std::vector<Var> nodes(CellSpec::kTotalNodes);
  nodes[0] = inputs[0];
  nodes[1] = inputs[1];
  for (int dst = CellSpec::kInputNodes; dst < CellSpec::kTotalNodes; ++dst) {
    Var acc{};
    for (int src = 0; src < dst; ++src) {
      const int e = cell_edge_index(src, dst);
      const int stride = (is_reduce && src < CellSpec::kInputNodes) ? 2 : 1;
      const std::string prefix = cell_prefix + "/e" + std::to_string(src) + "_" + std::to_string(dst);
      Var z_row = reshape(slice_rows(z_block, e, e + 1), {kNumOps});
      Var term = mixed_edge_forward(params, prefix, nodes[static_cast<size_t>(src)], z_row,
                                    channels, stride);
      acc = acc.defined() ? add(acc, term) : term;
    }
    nodes[static_cast<size_t>(dst)] = acc;
  }
  std::vector<Var> outs(nodes.begin() + CellSpec::kInputNodes, nodes.end());
  return concat_channels(outs);
}

void append_cell_edge_params(ParamSpec& out, const std::string& cell_prefix, int channels) {
  for (const CellEdge& e : cell_edges()) {
    const std::string prefix =
        cell_prefix + "/e" + std::to_string(e.src) + "_" + std::to_string(e.dst);
    for (int j = 0; j < kNumOps; ++j) {
      append_op_params(out, prefix + "/" + kOpNames[j], static_cast<OpKind>(j), channels);
    }
  }
}

}  // namespace metanas
