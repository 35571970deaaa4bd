#include "metanas/full_net.hpp"

#include <algorithm>
#include <cmath>

#include "metanas/errors.hpp"
#include "metanas/variational.hpp"

namespace metanas {

namespace {

std::vector<bool> reduce_positions(int cells) {
  std::vector<bool> flags(static_cast<size_t>(cells), false);
  if (cells >= 3) {
    flags[static_cast<size_t>(cells / 3)] = true;
    flags[static_cast<size_t>(2 * cells / 3)] = true;
  }
  return flags;
}

}  // namespace

FullNet FullNet::build(const Genotype& genotype, const FullNetConfig& cfg) {
  if (cfg.cells < 1) throw ConfigError("full net: cells must be >= 1");
  if (cfg.channels < 1) throw ConfigError("full net: channels must be >= 1");
  FullNet net;
  net.cfg_ = cfg;
  net.genotype_ = genotype;
  net.reduce_flags_ = reduce_positions(cfg.cells);

  for (const HeadSpec& h : cfg.heads) {
    append_stem_params(net.spec_, "head" + std::to_string(h.resolution), cfg.in_channels,
                       cfg.channels);
  }
  int c_prev_prev = cfg.channels;
  int c_prev = cfg.channels;
  int c_cur = cfg.channels;
  for (int cell = 0; cell < cfg.cells; ++cell) {
    if (net.reduce_flags_[static_cast<size_t>(cell)]) c_cur *= 2;
    net.cell_channels_.push_back(c_cur);
    const std::string prefix = "cell" + std::to_string(cell);
    append_relu_conv_bn_params(net.spec_, prefix + "/pre0", c_prev_prev, c_cur, 1);
    append_relu_conv_bn_params(net.spec_, prefix + "/pre1", c_prev, c_cur, 1);
    const GenotypeCell& gc =
        net.reduce_flags_[static_cast<size_t>(cell)] ? genotype.reduce : genotype.normal;
    for (int n = 0; n < CellSpec::kIntermediateNodes; ++n) {
      for (const GenotypeEdge& e : gc.nodes[static_cast<size_t>(n)]) {
        const std::string edge_prefix = prefix + "/e" + std::to_string(e.input) + "_" +
                                        std::to_string(n + CellSpec::kInputNodes);
        append_op_params(net.spec_, edge_prefix + "/" + op_name(e.op), e.op, c_cur);
      }
    }
    c_prev_prev = c_prev;
    c_prev = CellSpec::kIntermediateNodes * c_cur;
  }
  append_classifier_params(net.spec_, c_prev, cfg.classes);
  return net;
}

std::int64_t FullNet::param_count() const {
  std::int64_t n = 0;
  for (const ParamInfo& info : spec_) n += shape_numel(info.shape);
  return n;
}

bool FullNet::is_reduce(int cell) const { return reduce_flags_[static_cast<size_t>(cell)]; }

ParamSet FullNet::init_params(std::uint64_t seed) const {
  ParamSet p = init_params_from_spec(spec_, seed, 0.05);
  p.scales.clear();  // the committed network is trained with point weights
  return p;
}

Var FullNet::forward(const VarStore& params, Var x, int resolution) const {
  const HeadSpec* head = nullptr;
  for (const HeadSpec& h : cfg_.heads) {
    if (h.resolution == resolution) head = &h;
  }
  if (head == nullptr) {
    throw ConfigError("full net: no head registered for resolution " + std::to_string(resolution));
  }
  Var stem = stem_forward(params, "head" + std::to_string(head->resolution), x, head->stride);
  Var s0 = stem;
  Var s1 = stem;
  for (int cell = 0; cell < cfg_.cells; ++cell) {
    const std::string prefix = "cell" + std::to_string(cell);
    const int channels = cell_channels_[static_cast<size_t>(cell)];
    const bool reduce = reduce_flags_[static_cast<size_t>(cell)];
    const int pre0_stride = s0.value().dim(2) != s1.value().dim(2) ? 2 : 1;
    Var in0 = relu_conv_bn(params, prefix + "/pre0", s0, pre0_stride, 0);
    Var in1 = relu_conv_bn(params, prefix + "/pre1", s1, 1, 0);

    const GenotypeCell& gc = reduce ? genotype_.reduce : genotype_.normal;
    std::vector<Var> nodes(CellSpec::kTotalNodes);
    nodes[0] = in0;
    nodes[1] = in1;
    for (int n = 0; n < CellSpec::kIntermediateNodes; ++n) {
      const int dst = n + CellSpec::kInputNodes;
      Var acc{};
      for (const GenotypeEdge& e : gc.nodes[static_cast<size_t>(n)]) {
        const int stride = (reduce && e.input < CellSpec::kInputNodes) ? 2 : 1;
        const std::string edge_prefix =
            prefix + "/e" + std::to_string(e.input) + "_" + std::to_string(dst);
        Var term = build_op(params, edge_prefix + "/" + op_name(e.op), e.op,
                            nodes[static_cast<size_t>(e.input)], channels, stride);
        acc = acc.defined() ? add(acc, term) : term;
      }
      nodes[static_cast<size_t>(dst)] = acc;
    }
    std::vector<Var> outs(nodes.begin() + CellSpec::kInputNodes, nodes.end());
    Var out = concat_channels(outs);
    s0 = s1;
    s1 = out;
  }
  return classifier_forward(params, s1);
}

namespace {

std::vector<int> predict(const Tensor& logits) {
  const int n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < k; ++j) {
      if (logits.at2(i, j) > logits.at2(i, best)) best = j;  // ties: lowest class
    }
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

Tensor slice_batch(const Tensor& x, std::int64_t from, std::int64_t to) {
  const std::int64_t img = x.numel() / x.dim(0);
  Tensor out = Tensor::zeros({static_cast<int>(to - from), x.dim(1), x.dim(2), x.dim(3)});
  std::copy(x.data.begin() + from * img, x.data.begin() + to * img, out.data.begin());
  return out;
}

template <typename ForwardFn>
double batched_accuracy(const Tensor& x, const std::vector<int>& y, int batch_size,
                        ForwardFn forward) {
  const std::int64_t n = x.dim(0);
  std::int64_t correct = 0;
  for (std::int64_t at = 0; at < n; at += batch_size) {
    const std::int64_t end = std::min<std::int64_t>(n, at + batch_size);
    Tensor logits = forward(slice_batch(x, at, end));
    const std::vector<int> pred = predict(logits);
    for (std::int64_t i = at; i < end; ++i) {
      if (pred[static_cast<size_t>(i - at)] == y[static_cast<size_t>(i)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

VarStore constant_store(Tape& tape, const ParamStore& params) {
  VarStore store;
  for (const auto& [name, t] : params) store.put(name, tape.constant(t));
  return store;
}

}  // namespace

double full_net_accuracy(const FullNet& net, const ParamSet& params, const Tensor& x,
                         const std::vector<int>& y, int resolution, int batch_size) {
  return batched_accuracy(x, y, batch_size, [&](const Tensor& xb) {
    Tape tape;
    VarStore store = constant_store(tape, params.values);
    return net.forward(store, tape.constant(xb), resolution).value();
  });
}

double supernet_accuracy(const SuperNet& net, const ParamSet& params, const Tensor& x,
                         const std::vector<int>& y, int resolution, int batch_size) {
  return batched_accuracy(x, y, batch_size, [&](const Tensor& xb) {
    Tape tape;
    VarStore store = constant_store(tape, params.values);
    Var z_n = softmax_rows(store.get(SuperNet::kArchNormal));
    Var z_r = softmax_rows(store.get(SuperNet::kArchReduce));
    return net.forward(store, z_n, z_r, tape.constant(xb), resolution).value();
  });
}

TrainTrace train_full(const FullNet& net, ParamSet& params, const TaskData& data,
                      const TrainSchedule& schedule) {
  TrainTrace trace;
  const std::int64_t n_train = data.train_x.dim(0);
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    const double t = schedule.epochs > 1
                         ? static_cast<double>(epoch) / static_cast<double>(schedule.epochs - 1)
                         : 0.0;
    const double lr =
        schedule.lr_min + 0.5 * (schedule.lr - schedule.lr_min) * (1.0 + std::cos(M_PI * t));
    RngStream batch_rng = make_stream(schedule.seed, "full-batch", static_cast<std::uint64_t>(epoch));
    double loss_acc = 0.0;
    int steps = 0;
    try {
      for (const auto& idx : epoch_batches(n_train, schedule.batch_size, batch_rng)) {
        const Batch batch = make_batch(data, idx);
        Tape tape;
        VarStore store;
        std::vector<Var> leaves;
        std::vector<std::string> names;
        for (const auto& [name, tensor] : params.values) {
          Var v = tape.leaf(tensor);
          store.put(name, v);
          leaves.push_back(v);
          names.push_back(name);
        }
        Var logits = net.forward(store, tape.constant(batch.x), batch.resolution);
        Var loss = softmax_cross_entropy(logits, batch.labels);
        loss_acc += loss.value().scalar_value();
        ++steps;
        std::vector<Tensor> grads = tape.gradient_values(loss, leaves);
        GradSet gset;
        for (size_t i = 0; i < names.size(); ++i) gset.values.emplace(names[i], std::move(grads[i]));
        params = sgd_step(params, gset, lr);
      }
    } catch (const NumericFault& e) {
      throw NumericFault("train_full: epoch " + std::to_string(epoch) + ": " + e.what());
    }
    trace.train_loss.push_back(steps > 0 ? loss_acc / steps : 0.0);
    trace.train_accuracy.push_back(full_net_accuracy(net, params, data.train_x, data.train_y,
                                                     data.resolution, schedule.batch_size));
    trace.val_accuracy.push_back(full_net_accuracy(net, params, data.val_x, data.val_y,
                                                   data.resolution, schedule.batch_size));
  }
  return trace;
}

FastAdaptArm fast_adapt_arm_from_string(const std::string& name) {
  if (name == "adapt") return FastAdaptArm::kAdapt;
  if (name == "freeze-arch") return FastAdaptArm::kFreezeArch;
  if (name == "scratch") return FastAdaptArm::kScratch;
  throw ConfigError("unknown fast-adapt arm: " + name);
}

const char* fast_adapt_arm_name(FastAdaptArm arm) {
  switch (arm) {
    case FastAdaptArm::kAdapt:
      return "adapt";
    case FastAdaptArm::kFreezeArch:
      return "freeze-arch";
    case FastAdaptArm::kScratch:
      return "scratch";
  }
  return "?";
}

std::vector<FastAdaptCurve> fast_adapt_experiment(const SuperNet& net, const ParamSet& meta,
                                                  const Corpus& corpus, const TaskSpec& task,
                                                  const std::vector<FastAdaptArm>& arms,
                                                  const FastAdaptConfig& cfg) {
  const TaskData data = materialize_task(corpus, task);
  std::vector<FastAdaptCurve> curves;
  for (const FastAdaptArm arm : arms) {
    ParamSet post = arm == FastAdaptArm::kScratch
                        ? net.init_params(mix_u64(cfg.seed, hash_label("scratch-init")),
                                          cfg.adapt.variational.init_sigma)
                        : meta;
    FastAdaptCurve curve;
    curve.arm = arm;
    curve.val_accuracy.push_back(supernet_accuracy(net, post, data.val_x, data.val_y,
                                                   data.resolution, cfg.adapt.batch_size));
    RngStream batch_rng = make_stream(cfg.seed, "fast-adapt-batch", static_cast<std::uint64_t>(arm));
    RngStream eps_rng = make_stream(cfg.seed, "fast-adapt-eps", static_cast<std::uint64_t>(arm));
    RngStream xi_rng = make_stream(cfg.seed, "fast-adapt-xi", static_cast<std::uint64_t>(arm));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (const auto& idx : epoch_batches(data.train_x.dim(0), cfg.adapt.batch_size, batch_rng)) {
        const Batch batch = make_batch(data, idx);
        Tape tape;
        PosteriorVars pv = make_posterior_leaves(tape, post);
        PriorVars prior = make_prior_constants(tape, net, meta);
        ElboTerms terms =
            elbo_loss(tape, net, pv, prior, batch, cfg.adapt.variational, cfg.tau, eps_rng, xi_rng);
        std::vector<Var> leaves;
        std::vector<std::string> names;
        for (const auto& [name, var] : pv.values.all()) {
          if (arm == FastAdaptArm::kFreezeArch &&
              (name == SuperNet::kArchNormal || name == SuperNet::kArchReduce)) {
            continue;  // frozen logits receive no update
          }
          leaves.push_back(var);
          names.push_back(name);
        }
        std::vector<Tensor> grads = tape.gradient_values(terms.loss, leaves);
        GradSet gset;
        for (size_t i = 0; i < names.size(); ++i) gset.values.emplace(names[i], std::move(grads[i]));
        post = sgd_step(post, gset, cfg.adapt.inner_lr);
      }
      curve.val_accuracy.push_back(supernet_accuracy(net, post, data.val_x, data.val_y,
                                                     data.resolution, cfg.adapt.batch_size));
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

Tensor genotype_one_hot_z(const GenotypeCell& cell) {
  Tensor z = Tensor::zeros({cell_edge_count(), kNumOps});
  for (int e = 0; e < cell_edge_count(); ++e) z.at2(e, static_cast<int>(OpKind::kNone)) = 1.0;
  for (int n = 0; n < CellSpec::kIntermediateNodes; ++n) {
    const int dst = n + CellSpec::kInputNodes;
    for (const GenotypeEdge& e : cell.nodes[static_cast<size_t>(n)]) {
      const int idx = cell_edge_index(e.input, dst);
      z.at2(idx, static_cast<int>(OpKind::kNone)) = 0.0;
      z.at2(idx, static_cast<int>(e.op)) = 1.0;
    }
  }
  return z;
}

}  // namespace metanas
