#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "metanas/rng.hpp"
#include "metanas/tape.hpp"
#include "metanas/tensor.hpp"

namespace metanas::testing {

inline bool grad_close(double analytic, double numeric, double rel_tol = 1e-4,
                       double abs_floor = 1e-7) {
  const double mag = std::max(std::fabs(analytic), std::fabs(numeric));
  if (mag < abs_floor) return std::fabs(analytic - numeric) < abs_floor;
  return std::fabs(analytic - numeric) / mag < rel_tol;
}

inline Tensor random_tensor(const Shape& shape, RngStream& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t = Tensor::zeros(shape);
  for (double& v : t.data) v = lo + (hi - lo) * rng.uniform();
  return t;
}

// Builds the graph via `fn`, projects the output against fixed random
// weights, and checks every input coordinate of every input tensor against
// central finite differences.
using OpFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckFailure {
  std::string detail;
};

inline void check_gradients(const std::string& name, const OpFn& fn, std::vector<Tensor> inputs,
                            double h = 1e-6, double rel_tol = 1e-4, double abs_floor = 1e-6) {
  RngStream proj_rng = make_stream(0xC0FFEE, "grad-proj");
  Tensor projection;

  auto project = [&](const std::vector<Tensor>& ins) -> double {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : ins) vars.push_back(tape.leaf(t));
    Var out = fn(tape, vars);
    const Tensor& ov = out.value();
    if (projection.data.empty()) projection = random_tensor(ov.shape, proj_rng, 0.1, 1.0);
    double acc = 0.0;
    for (size_t i = 0; i < ov.data.size(); ++i) acc += ov.data[i] * projection.data[i];
    return acc;
  };

  // Analytic gradients of the projected output.
  std::vector<Tensor> analytic;
  {
    (void)project(inputs);  // fixes the projection
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(tape.leaf(t));
    Var out = fn(tape, vars);
    Var loss = sum_all(mul(out, tape.constant(projection)));
    analytic = tape.gradient_values(loss, vars);
  }

  for (size_t which = 0; which < inputs.size(); ++which) {
    for (size_t i = 0; i < inputs[which].data.size(); ++i) {
      const double orig = inputs[which].data[i];
      inputs[which].data[i] = orig + h;
      const double up = project(inputs);
      inputs[which].data[i] = orig - h;
      const double down = project(inputs);
      inputs[which].data[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[which].data[i];
      if (!grad_close(a, numeric, rel_tol, abs_floor)) {
        throw GradCheckFailure{name + ": input " + std::to_string(which) + " coord " +
                               std::to_string(i) + ": analytic " + std::to_string(a) +
                               " vs numeric " + std::to_string(numeric)};
      }
    }
  }
}

}  // namespace metanas::testing
