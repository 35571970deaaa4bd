#include "metanas/errors.hpp"
#include "metanas/tape.hpp"

// Composite layers assembled from primitives; they inherit exact gradients
// (to any order) from the primitive rules.

namespace metanas {

// Training-mode batch norm: per-channel batch statistics with affine
// gain/bias, eps = 1e-5 by default. Running statistics are deliberately
// not tracked; batch statistics are used for adaptation and evaluation.
Var batch_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) {
    throw ShapeError("batch_norm: expected rank-4 input, got " + shape_str(xv.shape));
  }
  const int C = xv.dim(1);
  if (gain.value().shape != Shape{C} || bias.value().shape != Shape{C}) {
    throw ShapeError("batch_norm: affine params must be (" + std::to_string(C) + ")");
  }
  const double inv_count = 1.0 / (static_cast<double>(xv.dim(0)) * xv.dim(2) * xv.dim(3));
  Var mean = scale(channel_sum(x), inv_count);
  Var centered = sub(x, channel_bcast(mean, xv.shape));
  Var var = scale(channel_sum(mul(centered, centered)), inv_count);
  Var inv_std = divide(x.tape->constant(Tensor::full({C}, 1.0)), sqrt_op(add_const(var, eps)));
  Var normalized = mul(centered, channel_bcast(inv_std, xv.shape));
  return add(mul(normalized, channel_bcast(gain, xv.shape)), channel_bcast(bias, xv.shape));
}

Var linear(Var x, Var w, Var b) {
  const int n = x.value().dim(0);
  return add(matmul(x, w), bcast_rows(b, n));
}

Var logsumexp_rows(Var logits) {
  const int cols = logits.value().dim(1);
  Var m = rowmax(logits);  // constant shift; exact for all derivative orders
  Var shifted = sub(logits, bcast_cols(m, cols));
  return add(log_op(sum_over_cols(exp_op(shifted))), m);
}

Var softmax_rows(Var logits) {
  const int cols = logits.value().dim(1);
  Var m = rowmax(logits);
  Var e = exp_op(sub(logits, bcast_cols(m, cols)));
  return divide(e, bcast_cols(sum_over_cols(e), cols));
}

// Mean over the batch of (logsumexp(logits) - logit[label]).
Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
  const Tensor& lv = logits.value();
  if (lv.rank() != 2) {
    throw ShapeError("softmax_cross_entropy: expected (batch, classes) logits, got " +
                     shape_str(lv.shape));
  }
  if (static_cast<int>(labels.size()) != lv.dim(0)) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for batch " + std::to_string(lv.dim(0)));
  }
  Var per_row = sub(logsumexp_rows(logits), gather_labels(logits, labels));
  return scale(sum_all(per_row), 1.0 / lv.dim(0));
}

}  // namespace metanas
