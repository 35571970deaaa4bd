#include "metanas/variational.hpp"

#include <algorithm>
#include <cmath>

#include "metanas/errors.hpp"

namespace metanas {

WeightMode weight_mode_from_string(const std::string& s) {
  if (s == "point") return WeightMode::kPoint;
  if (s == "gaussian") return WeightMode::kGaussian;
  throw ConfigError("unknown weight mode: " + s);
}

const char* weight_mode_name(WeightMode m) {
  return m == WeightMode::kPoint ? "point" : "gaussian";
}

double temperature(const VariationalConfig& cfg, std::int64_t step) {
  if (step < 0) throw ConfigError("temperature: negative step");
  return std::max(cfg.tau_min, cfg.tau0 * std::exp(-cfg.tau_decay * static_cast<double>(step)));
}

namespace {

double softplus_value(double x) {
  return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

bool is_arch_key(const std::string& name) {
  return name == SuperNet::kArchNormal || name == SuperNet::kArchReduce;
}

}  // namespace

std::vector<std::string> gaussian_keys(const ParamSet& params) {
  std::vector<std::string> keys;
  keys.reserve(params.scales.size());
  for (const auto& [name, t] : params.scales) keys.push_back(name);
  return keys;
}

ParamStore sample_weights(const ParamSet& post, const std::map<std::string, Tensor>& noise,
                          WeightMode mode) {
  ParamStore theta = post.values;
  if (mode == WeightMode::kPoint) return theta;
  for (const auto& [name, raw] : post.scales) {
    auto nit = noise.find(name);
    if (nit == noise.end()) {
      throw ShapeError("sample_weights: missing noise for " + name);
    }
    check_same_shape("sample_weights", raw, nit->second);
    Tensor& mu = theta.at(name);
    check_same_shape("sample_weights", mu, raw);
    for (size_t i = 0; i < mu.data.size(); ++i) {
      mu.data[i] += nit->second.data[i] * softplus_value(raw.data[i]);
    }
  }
  return theta;
}

Tensor sample_arch(const Tensor& phi, const Tensor& gumbel, double tau) {
  if (tau <= 0.0) throw ConfigError("sample_arch: tau must be positive");
  check_same_shape("sample_arch", phi, gumbel);
  const int cols = phi.rank() == 2 ? phi.dim(1) : phi.dim(0);
  const int rows = phi.rank() == 2 ? phi.dim(0) : 1;
  Tensor z = Tensor::zeros(phi.shape);
  for (int r = 0; r < rows; ++r) {
    const double* p = phi.data.data() + static_cast<std::int64_t>(r) * cols;
    const double* g = gumbel.data.data() + static_cast<std::int64_t>(r) * cols;
    double* out = z.data.data() + static_cast<std::int64_t>(r) * cols;
    double m = -1e300;
    for (int j = 0; j < cols; ++j) m = std::max(m, (p[j] + g[j]) / tau);
    double denom = 0.0;
    for (int j = 0; j < cols; ++j) {
      out[j] = std::exp((p[j] + g[j]) / tau - m);
      denom += out[j];
    }
    for (int j = 0; j < cols; ++j) out[j] /= denom;
  }
  return z;
}

double gumbel_softmax_log_density(const std::vector<double>& z, const std::vector<double>& phi,
                                  double tau) {
  if (tau <= 0.0) throw ConfigError("gumbel_softmax_log_density: tau must be positive");
  const size_t J = z.size();
  if (J != phi.size() || J < 2) {
    throw ShapeError("gumbel_softmax_log_density: z and phi must share length >= 2");
  }
  double sum = 0.0;
  for (double v : z) {
    if (v <= 0.0 || v >= 1.0) {
      throw NumericFault("gumbel_softmax_log_density: z on the simplex boundary");
    }
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-6) {
    throw ShapeError("gumbel_softmax_log_density: z sums to " + std::to_string(sum));
  }

  double phi_lse = -1e300;
  for (double p : phi) phi_lse = std::max(phi_lse, p);
  double acc = 0.0;
  for (double p : phi) acc += std::exp(p - phi_lse);
  phi_lse += std::log(acc);

  // log q(z) = log((J-1)!) + (J-1) log tau
  //          + sum_j [log pi_j - (tau+1) log z_j] - J * logsumexp_j(a_j),
  // a_j = log pi_j - tau * log z_j.
  double out = std::lgamma(static_cast<double>(J)) +
               (static_cast<double>(J) - 1.0) * std::log(tau);
  double a_max = -1e300;
  std::vector<double> a(J);
  for (size_t j = 0; j < J; ++j) {
    const double log_pi = phi[j] - phi_lse;
    const double log_z = std::log(z[j]);
    out += log_pi - (tau + 1.0) * log_z;
    a[j] = log_pi - tau * log_z;
    a_max = std::max(a_max, a[j]);
  }
  double a_acc = 0.0;
  for (size_t j = 0; j < J; ++j) a_acc += std::exp(a[j] - a_max);
  out -= static_cast<double>(J) * (a_max + std::log(a_acc));
  return out;
}

double gaussian_kl(const Tensor& mu_q, const Tensor& sigma_q, const Tensor& mu_p,
                   const Tensor& sigma_p) {
  check_same_shape("gaussian_kl", mu_q, sigma_q);
  check_same_shape("gaussian_kl", mu_q, mu_p);
  check_same_shape("gaussian_kl", mu_q, sigma_p);
  double kl = 0.0;
  for (size_t i = 0; i < mu_q.data.size(); ++i) {
    const double sq = sigma_q.data[i], sp = sigma_p.data[i];
    if (sq <= 0.0 || sp <= 0.0) {
      throw NumericFault("gaussian_kl: non-positive scale");
    }
    const double dm = mu_q.data[i] - mu_p.data[i];
    kl += std::log(sp / sq) + (sq * sq + dm * dm) / (2.0 * sp * sp) - 0.5;
  }
  return kl;
}

PosteriorVars make_posterior_leaves(Tape& tape, const ParamSet& post) {
  PosteriorVars out;
  for (const auto& [name, t] : post.values) out.values.put(name, tape.leaf(t));
  for (const auto& [name, t] : post.scales) out.scales.put(name, tape.leaf(t));
  return out;
}

namespace {

PriorVars make_prior_vars(Tape& tape, const ParamSet& prior, bool as_leaves) {
  PriorVars out;
  auto materialize = [&](const Tensor& t) { return as_leaves ? tape.leaf(t) : tape.constant(t); };
  for (const auto& [name, t] : prior.scales) {
    out.values.put(name, materialize(prior.values.at(name)));
    out.scales.put(name, materialize(t));
  }
  out.values.put(SuperNet::kArchNormal, materialize(prior.values.at(SuperNet::kArchNormal)));
  out.values.put(SuperNet::kArchReduce, materialize(prior.values.at(SuperNet::kArchReduce)));
  return out;
}

}  // namespace

PriorVars make_prior_constants(Tape& tape, const SuperNet&, const ParamSet& prior) {
  return make_prior_vars(tape, prior, false);
}

PriorVars make_prior_leaves(Tape& tape, const SuperNet&, const ParamSet& prior) {
  return make_prior_vars(tape, prior, true);
}

ElboDraws draw_elbo_noise(const SuperNet& net, const ParamSet& post, WeightMode mode,
                          RngStream& weight_rng, RngStream& arch_rng) {
  ElboDraws d;
  if (mode == WeightMode::kGaussian) {
    for (const auto& [name, t] : post.scales) {
      Tensor eps = Tensor::zeros(t.shape);
      for (double& v : eps.data) v = weight_rng.normal();
      d.eps.emplace(name, std::move(eps));
    }
  }
  const Shape z_shape{net.arch_edge_count(), kNumOps};
  d.xi_normal = Tensor::zeros(z_shape);
  for (double& v : d.xi_normal.data) v = arch_rng.gumbel();
  d.xi_reduce = Tensor::zeros(z_shape);
  for (double& v : d.xi_reduce.data) v = arch_rng.gumbel();
  return d;
}

VarStore make_theta(Tape& tape, const SuperNet&, const PosteriorVars& post, WeightMode mode,
                    const std::map<std::string, Tensor>& eps) {
  VarStore theta;
  for (const auto& [name, var] : post.values.all()) {
    if (is_arch_key(name)) continue;
    if (mode == WeightMode::kGaussian && post.scales.contains(name)) {
      auto it = eps.find(name);
      if (it == eps.end()) throw ShapeError("make_theta: missing eps draw for " + name);
      Var noise = tape.constant(it->second);
      theta.put(name, add(var, mul(noise, softplus(post.scales.get(name)))));
    } else {
      theta.put(name, var);
    }
  }
  return theta;
}

Var make_z(Tape& tape, Var phi_logits, const Tensor& xi, double tau) {
  if (tau <= 0.0) throw ConfigError("make_z: tau must be positive");
  check_same_shape("make_z", phi_logits.value(), xi);
  Var noisy = scale(add(phi_logits, tape.constant(xi)), 1.0 / tau);
  return softmax_rows(noisy);
}

Var concrete_log_density_rows(Var z_block, Var logits, double tau) {
  const Tensor& zv = z_block.value();
  if (zv.rank() != 2 || !logits.value().same_shape(zv)) {
    throw ShapeError("concrete_log_density_rows: z and logits must be matching matrices");
  }
  const int J = zv.dim(1);
  Var log_pi = sub(logits, bcast_cols(logsumexp_rows(logits), J));
  Var log_z = log_op(z_block);
  Var a = sub(log_pi, scale(log_z, tau));
  const double c0 = std::lgamma(static_cast<double>(J)) +
                    (static_cast<double>(J) - 1.0) * std::log(tau);
  Var per_row = sub(sub(sum_over_cols(log_pi), scale(sum_over_cols(log_z), tau + 1.0)),
                    scale(logsumexp_rows(a), static_cast<double>(J)));
  return add_const(sum_all(per_row), c0 * zv.dim(0));
}

ElboTerms elbo_loss(Tape& tape, const SuperNet& net, const PosteriorVars& post,
                    const PriorVars& prior, const Batch& batch, const VariationalConfig& cfg,
                    double tau, const std::vector<ElboDraws>& draws) {
  if (batch.labels.empty()) throw ConfigError("elbo_loss: empty batch");
  if (draws.empty()) throw ConfigError("elbo_loss: need at least one Monte Carlo draw");
  for (int y : batch.labels) {
    if (y < 0 || y >= net.config().classes) {
      throw ConfigError("elbo_loss: label " + std::to_string(y) + " outside the net's " +
                        std::to_string(net.config().classes) + " classes");
    }
  }
  const double beta_eff =
      cfg.beta / (cfg.beta_scale_by_dataset ? static_cast<double>(std::max<std::int64_t>(
                                                  1, batch.dataset_size))
                                            : 1.0);

  Var x = tape.constant(batch.x);
  Var phi_n = post.values.get(SuperNet::kArchNormal);
  Var phi_r = post.values.get(SuperNet::kArchReduce);

  Var ce_acc{};
  Var arch_acc{};
  for (const ElboDraws& d : draws) {
    VarStore theta = make_theta(tape, net, post, cfg.weight_mode, d.eps);
    Var z_n = make_z(tape, phi_n, d.xi_normal, tau);
    Var z_r = make_z(tape, phi_r, d.xi_reduce, tau);
    Var logits = net.forward(theta, z_n, z_r, x, batch.resolution);
    Var ce = softmax_cross_entropy(logits, batch.labels);
    ce_acc = ce_acc.defined() ? add(ce_acc, ce) : ce;

    if (beta_eff != 0.0) {
      Var term = sub(concrete_log_density_rows(z_n, phi_n, tau),
                     concrete_log_density_rows(z_n, prior.values.get(SuperNet::kArchNormal), tau));
      term = add(term, sub(concrete_log_density_rows(z_r, phi_r, tau),
                           concrete_log_density_rows(
                               z_r, prior.values.get(SuperNet::kArchReduce), tau)));
      arch_acc = arch_acc.defined() ? add(arch_acc, term) : term;
    }
  }
  const double inv_s = 1.0 / static_cast<double>(draws.size());
  ElboTerms out;
  out.cross_entropy = scale(ce_acc, inv_s);
  out.beta_effective = beta_eff;

  if (beta_eff == 0.0) {
    out.divergence = tape.constant(Tensor::scalar(0.0));
    out.loss = out.cross_entropy;
    return out;
  }

  Var div = scale(arch_acc, inv_s);
  if (cfg.weight_mode == WeightMode::kGaussian) {
    Var kl_acc{};
    for (const auto& [name, raw_q] : post.scales.all()) {
      Var mu_q = post.values.get(name);
      Var mu_p = prior.values.get(name);
      Var sig_q = softplus(raw_q);
      Var sig_p = softplus(prior.scales.get(name));
      Var dm = sub(mu_q, mu_p);
      Var elem = add(sub(log_op(sig_p), log_op(sig_q)),
                     divide(add(mul(sig_q, sig_q), mul(dm, dm)), scale(mul(sig_p, sig_p), 2.0)));
      Var kl = sum_all(add_const(elem, -0.5));
      kl_acc = kl_acc.defined() ? add(kl_acc, kl) : kl;
    }
    if (kl_acc.defined()) div = add(div, kl_acc);
  }
  out.divergence = div;
  out.loss = add(out.cross_entropy, scale(div, beta_eff));
  return out;
}

ElboTerms elbo_loss(Tape& tape, const SuperNet& net, const PosteriorVars& post,
                    const PriorVars& prior, const Batch& batch, const VariationalConfig& cfg,
                    double tau, RngStream& weight_rng, RngStream& arch_rng) {
  std::vector<ElboDraws> draws;
  draws.reserve(static_cast<size_t>(cfg.mc_samples));
  ParamSet post_shapes;  // shapes only, for noise drawing
  for (const auto& [name, var] : post.values.all()) post_shapes.values.emplace(name, var.value());
  for (const auto& [name, var] : post.scales.all()) post_shapes.scales.emplace(name, var.value());
  for (int s = 0; s < cfg.mc_samples; ++s) {
    draws.push_back(draw_elbo_noise(net, post_shapes, cfg.weight_mode, weight_rng, arch_rng));
  }
  return elbo_loss(tape, net, post, prior, batch, cfg, tau, draws);
}

}  // namespace metanas
