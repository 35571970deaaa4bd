#include "metanas/supernet.hpp"

#include <cmath>

#include "metanas/errors.hpp"
#include "metanas/rng.hpp"

namespace metanas {

void append_relu_conv_bn_params(ParamSpec& out, const std::string& prefix, int in_channels,
                                int out_channels, int kernel) {
  out.push_back({prefix + "/conv", {out_channels, in_channels, kernel, kernel},
                 ParamKind::kConvWeight, true});
  out.push_back({prefix + "/bng", {out_channels}, ParamKind::kBnGain, false});
  out.push_back({prefix + "/bnb", {out_channels}, ParamKind::kBnBias, false});
}

Var relu_conv_bn(const VarStore& p, const std::string& prefix, Var x, int stride, int pad) {
  Var h = conv2d(relu(x), p.get(prefix + "/conv"), Conv2dAttrs::padded(stride, pad));
  return batch_norm(h, p.get(prefix + "/bng"), p.get(prefix + "/bnb"));
}

// Featurization head: plain conv3x3 (stride per resolution) + BN. Kept as a
// point-estimated stem; no ReLU before the first conv.
void append_stem_params(ParamSpec& out, const std::string& prefix, int in_channels,
                        int out_channels) {
  out.push_back(
      {prefix + "/conv", {out_channels, in_channels, 3, 3}, ParamKind::kConvWeight, false});
  out.push_back({prefix + "/bng", {out_channels}, ParamKind::kBnGain, false});
  out.push_back({prefix + "/bnb", {out_channels}, ParamKind::kBnBias, false});
}

Var stem_forward(const VarStore& p, const std::string& prefix, Var x, int stride) {
  Var h = conv2d(x, p.get(prefix + "/conv"), Conv2dAttrs::padded(stride, 1));
  return batch_norm(h, p.get(prefix + "/bng"), p.get(prefix + "/bnb"));
}

void append_classifier_params(ParamSpec& out, int feat_channels, int classes) {
  out.push_back({"classifier/w", {feat_channels, classes}, ParamKind::kLinearWeight, false});
  out.push_back({"classifier/b", {classes}, ParamKind::kLinearBias, false});
}

Var classifier_forward(const VarStore& p, Var features) {
  return linear(global_avg_pool(features), p.get("classifier/w"), p.get("classifier/b"));
}

ParamSet init_params_from_spec(const ParamSpec& spec, std::uint64_t seed, double init_sigma) {
  ParamSet out;
  // raw scale r with softplus(r) == init_sigma
  const double raw_scale = std::log(std::expm1(init_sigma));
  std::uint64_t index = 0;
  for (const ParamInfo& info : spec) {
    Tensor t = Tensor::zeros(info.shape);
    RngStream rng = make_stream(seed, "init", index++);
    switch (info.kind) {
      case ParamKind::kConvWeight: {
        const std::int64_t fan_in = shape_numel(info.shape) / info.shape[0];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& v : t.data) v = (2.0 * rng.uniform() - 1.0) * bound;
        break;
      }
      case ParamKind::kLinearWeight: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(info.shape[0]));
        for (double& v : t.data) v = (2.0 * rng.uniform() - 1.0) * bound;
        break;
      }
      case ParamKind::kBnGain:
        for (double& v : t.data) v = 1.0;
        break;
      case ParamKind::kBnBias:
      case ParamKind::kLinearBias:
      case ParamKind::kArchLogits:
        break;  // zeros
    }
    if (info.gaussian) out.scales[info.name] = Tensor::full(info.shape, raw_scale);
    out.values[info.name] = std::move(t);
  }
  return out;
}

SuperNet SuperNet::build(const SuperNetConfig& cfg) {
  if (cfg.cells < 2) throw ConfigError("supernet: cells must be >= 2, got " + std::to_string(cfg.cells));
  if (cfg.channels < 1) throw ConfigError("supernet: channels must be >= 1");
  if (cfg.classes < 2) throw ConfigError("supernet: classes must be >= 2");
  if (cfg.heads.empty()) throw ConfigError("supernet: at least one resolution head required");

  SuperNet net;
  net.cfg_ = cfg;

  for (const HeadSpec& h : cfg.heads) {
    append_stem_params(net.spec_, "head" + std::to_string(h.resolution), cfg.in_channels,
                       cfg.channels);
  }

  int c_prev_prev = cfg.channels;
  int c_prev = cfg.channels;
  int c_cur = cfg.channels;
  for (int cell = 0; cell < cfg.cells; ++cell) {
    if (net.is_reduce(cell)) c_cur *= 2;
    net.cell_channels_.push_back(c_cur);
    const std::string prefix = "cell" + std::to_string(cell);
    append_relu_conv_bn_params(net.spec_, prefix + "/pre0", c_prev_prev, c_cur, 1);
    append_relu_conv_bn_params(net.spec_, prefix + "/pre1", c_prev, c_cur, 1);
    append_cell_edge_params(net.spec_, prefix, c_cur);
    c_prev_prev = c_prev;
    c_prev = CellSpec::kIntermediateNodes * c_cur;
  }

  append_classifier_params(net.spec_, c_prev, cfg.classes);
  net.spec_.push_back(
      {kArchNormal, {cell_edge_count(), kNumOps}, ParamKind::kArchLogits, false});
  net.spec_.push_back(
      {kArchReduce, {cell_edge_count(), kNumOps}, ParamKind::kArchLogits, false});
  return net;
}

ParamSet SuperNet::init_params(std::uint64_t seed, double init_sigma) const {
  return init_params_from_spec(spec_, seed, init_sigma);
}

bool SuperNet::has_resolution(int resolution) const {
  for (const HeadSpec& h : cfg_.heads) {
    if (h.resolution == resolution) return true;
  }
  return false;
}

Var SuperNet::forward(const VarStore& theta, Var z_normal, Var z_reduce, Var x,
                      int resolution) const {
  const HeadSpec* head = nullptr;
  for (const HeadSpec& h : cfg_.heads) {
    if (h.resolution == resolution) head = &h;
  }
  if (head == nullptr) {
    throw ConfigError("supernet: no head registered for resolution " + std::to_string(resolution));
  }
  const Tensor& xv = x.value();
  if (xv.rank() != 4 || xv.dim(1) != cfg_.in_channels || xv.dim(2) != resolution ||
      xv.dim(3) != resolution) {
    throw ShapeError("supernet: expected input (N," + std::to_string(cfg_.in_channels) + "," +
                     std::to_string(resolution) + "," + std::to_string(resolution) + "), got " +
                     shape_str(xv.shape));
  }

  Var stem = stem_forward(theta, "head" + std::to_string(head->resolution), x, head->stride);
  Var s0 = stem;
  Var s1 = stem;
  for (int cell = 0; cell < cfg_.cells; ++cell) {
    const std::string prefix = "cell" + std::to_string(cell);
    const int channels = cell_channels_[static_cast<size_t>(cell)];
    // Stride-2 preprocess when the older input is still at the pre-reduce
    // resolution (i.e. the previous cell reduced).
    const int pre0_stride = s0.value().dim(2) != s1.value().dim(2) ? 2 : 1;
    Var in0 = relu_conv_bn(theta, prefix + "/pre0", s0, pre0_stride, 0);
    Var in1 = relu_conv_bn(theta, prefix + "/pre1", s1, 1, 0);
    Var out = cell_forward(theta, prefix, {in0, in1}, is_reduce(cell) ? z_reduce : z_normal,
                           channels, is_reduce(cell));
    s0 = s1;
    s1 = out;
  }
  return classifier_forward(theta, s1);
}

}  // namespace metanas
