#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "metanas/batch.hpp"
#include "metanas/params.hpp"
#include "metanas/rng.hpp"
#include "metanas/supernet.hpp"
#include "metanas/tape.hpp"

namespace metanas {

enum class WeightMode { kPoint, kGaussian };

WeightMode weight_mode_from_string(const std::string& s);
const char* weight_mode_name(WeightMode m);

struct VariationalConfig {
  double tau0 = 5.0;
  double tau_min = 0.5;
  double tau_decay = 0.0;  // exponential decay rate per step
  double beta = 1e-3;
  bool beta_scale_by_dataset = true;
  WeightMode weight_mode = WeightMode::kPoint;
  int mc_samples = 1;
  double init_sigma = 0.05;
};

// tau(step) = max(tau_min, tau0 * exp(-decay * step)); monotone non-increasing.
double temperature(const VariationalConfig& cfg, std::int64_t step);

// --- Tensor-level distribution primitives -----------------------------------

// Gaussian reparameterization: gaussian -> mu + eps * softplus(raw_scale),
// point -> mu exactly (noise ignored).
ParamStore sample_weights(const ParamSet& post, const std::map<std::string, Tensor>& noise,
                          WeightMode mode);

// Gumbel-softmax rows: z[e, j] = softmax_j((phi[e, j] + xi[e, j]) / tau).
Tensor sample_arch(const Tensor& phi, const Tensor& gumbel, double tau);

// Standard Concrete (Gumbel-softmax) log-density of one simplex point z
// under logits phi at temperature tau. z must be strictly interior.
double gumbel_softmax_log_density(const std::vector<double>& z, const std::vector<double>& phi,
                                  double tau);

// Closed-form KL of diagonal Gaussians, summed over elements; >= 0,
// exactly 0 iff the distributions coincide.
double gaussian_kl(const Tensor& mu_q, const Tensor& sigma_q, const Tensor& mu_p,
                   const Tensor& sigma_p);

// --- Graph-level ELBO --------------------------------------------------------

// Posterior parameters materialized as tape vars. Entries of `values` /
// `scales` may be leaves (inner SGD) or derived expressions (unrolled
// meta-gradients); the sampling transforms below consume either.
struct PosteriorVars {
  VarStore values;
  VarStore scales;  // gaussian subset only
};

// Prior side of the divergence terms. Constants during inner adaptation;
// leaves when outer gradients must reach the prior (few-shot search).
struct PriorVars {
  VarStore values;  // gaussian means + arch logits (alpha-hat)
  VarStore scales;
};

PosteriorVars make_posterior_leaves(Tape& tape, const ParamSet& post);
PriorVars make_prior_constants(Tape& tape, const SuperNet& net, const ParamSet& prior);
PriorVars make_prior_leaves(Tape& tape, const SuperNet& net, const ParamSet& prior);

// Frozen noise draws for one Monte Carlo sample.
struct ElboDraws {
  std::map<std::string, Tensor> eps;  // per gaussian weight tensor (gaussian mode)
  Tensor xi_normal;                   // (edges, J) Gumbel draws
  Tensor xi_reduce;
};

ElboDraws draw_elbo_noise(const SuperNet& net, const ParamSet& post, WeightMode mode,
                          RngStream& weight_rng, RngStream& arch_rng);

// Weight vars the network consumes, built from posterior vars and frozen eps.
VarStore make_theta(Tape& tape, const SuperNet& net, const PosteriorVars& post, WeightMode mode,
                    const std::map<std::string, Tensor>& eps);

// Differentiable z sample for one cell type.
Var make_z(Tape& tape, Var phi_logits, const Tensor& xi, double tau);

// Concrete log-density summed over the rows of a z block; differentiable in
// both z and the logits.
Var concrete_log_density_rows(Var z_block, Var logits, double tau);

struct ElboTerms {
  Var loss;             // full objective
  Var cross_entropy;    // MC mean of the task loss
  Var divergence;       // unweighted divergence (arch log-ratio + weight KL)
  double beta_effective = 0.0;
};

// Per-batch objective: mean over MC samples of the cross-entropy at sampled
// (theta, z) plus beta * [log q(z|phi) - log p(z|alpha) + KL(q(theta)||p(theta))].
// The architecture term is a single-sample estimate at the z drawn for the
// forward pass. Point mode carries no weight KL.
ElboTerms elbo_loss(Tape& tape, const SuperNet& net, const PosteriorVars& post,
                    const PriorVars& prior, const Batch& batch, const VariationalConfig& cfg,
                    double tau, const std::vector<ElboDraws>& draws);

// Convenience wrapper drawing `cfg.mc_samples` noise sets from the streams.
ElboTerms elbo_loss(Tape& tape, const SuperNet& net, const PosteriorVars& post,
                    const PriorVars& prior, const Batch& batch, const VariationalConfig& cfg,
                    double tau, RngStream& weight_rng, RngStream& arch_rng);

// Gaussian-subset key list of a parameter set (ordered).
std::vector<std::string> gaussian_keys(const ParamSet& params);

}  // namespace metanas
