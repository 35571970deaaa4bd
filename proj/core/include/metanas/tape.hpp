#pragma once

#include <functional>
#include <vector>

#include "metanas/tensor.hpp"

namespace metanas {

class Tape;

// Lightweight handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool defined() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
  bool requires_grad() const;
};

// Recorded computation graph for reverse-mode differentiation.
//
// Every op appends one node; nodes are created in topological order by
// construction. Backward rules are themselves expressed as tape ops, so
// gradients() returns differentiable Vars and gradients-of-gradients
// (unrolled inner loops, second-order meta updates) need no special casing.
// A tape instance is single-threaded; independent tapes may run on
// independent threads.
class Tape {
 public:
  using BackwardFn = std::function<void(const Var& grad_out, std::vector<Var>& parent_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Trainable input (participates in gradients).
  Var leaf(Tensor value);
  // Non-trainable input (data, frozen draws, masks).
  Var constant(Tensor value);

  // Records one op. `parent_grads` passed to `backward` is parallel to
  // `parents`; undefined entries mean "no gradient to this input".
  // The output is checked for NaN/Inf and the op named on failure.
  Var emit(const char* name, Tensor value, const std::vector<Var>& parents, BackwardFn backward);

  // Reverse sweep from `loss` (must be scalar). Returns one Var per `wrt`
  // entry; undefined where the loss does not depend on that node. The
  // returned Vars live on this tape and are differentiable again.
  std::vector<Var> gradients(const Var& loss, const std::vector<Var>& wrt);

  // Convenience: gradient values, zeros where undefined.
  std::vector<Tensor> gradient_values(const Var& loss, const std::vector<Var>& wrt);

  const Tensor& value_of(const Var& v) const;
  bool requires_grad_of(const Var& v) const;
  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<int> parents;
    BackwardFn backward;
    bool requires_grad = false;
    const char* name = "";
  };

  void check_var(const Var& v) const;

  std::vector<Node> nodes_;
};

// Elementwise / scalar ------------------------------------------------------
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var divide(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var add_const(Var a, double c);
Var exp_op(Var a);
Var log_op(Var a);
Var sqrt_op(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
// tensor * broadcast scalar (scalar is a rank-0 Var)
Var mul_scalar(Var tensor, Var scalar);

// Reductions / reshaping ----------------------------------------------------
Var sum_all(Var a);
Var broadcast_all(Var scalar, const Shape& shape);
Var mean_all(Var a);
Var reshape(Var a, const Shape& shape);
// v[i] = a[i] for flat index; scalar result.
Var take(Var a, std::int64_t index);

// Matrix (rank 2) -----------------------------------------------------------
Var matmul(Var a, Var b);
Var transpose(Var a);
Var bcast_rows(Var v, int rows);      // (K) -> (rows, K)
Var sum_over_rows(Var m);             // (N, K) -> (K)
Var bcast_cols(Var v, int cols);      // (N) -> (N, cols)
Var sum_over_cols(Var m);             // (N, K) -> (N)
Var rowmax(Var m);                    // (N, K) -> (N), no gradient
Var gather_labels(Var m, const std::vector<int>& labels);  // (N,K)->(N)
Var slice_rows(Var m, int from, int to);  // (N,K) -> (to-from, K)

// 4-D (N, C, H, W) ----------------------------------------------------------
struct Conv2dAttrs {
  int stride = 1;
  int pad_h = 0;
  int pad_w = 0;
  int dilation = 1;
  int groups = 1;

  static Conv2dAttrs padded(int stride, int pad, int dilation = 1, int groups = 1) {
    return Conv2dAttrs{stride, pad, pad, dilation, groups};
  }
};
Var conv2d(Var x, Var w, const Conv2dAttrs& attrs);
Var max_pool3(Var x, int stride);
Var avg_pool3(Var x, int stride);
Var subsample2(Var x);                      // x[:, :, ::2, ::2]
Var global_avg_pool(Var x);                 // (N,C,H,W) -> (N,C)
Var channel_sum(Var x);                     // (N,C,H,W) -> (C)
Var channel_bcast(Var v, const Shape& like);// (C) -> (N,C,H,W)
Var concat_channels(const std::vector<Var>& xs);
Var slice_channels(Var x, int from, int to);

// Composites ----------------------------------------------------------------
Var batch_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var linear(Var x, Var w, Var b);            // (N,D)x(D,K)+(K)
Var softmax_rows(Var logits);
Var logsumexp_rows(Var logits);
Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);

// Reference kernels (direct nested loops) for oracle comparisons.
namespace reference {
Tensor conv2d_direct(const Tensor& x, const Tensor& w, const Conv2dAttrs& attrs);
}

// Raw forward kernel used by the recorded op (im2col + GEMM path).
namespace kernels {
Tensor conv2d_value(const Tensor& x, const Tensor& w, const Conv2dAttrs& attrs);
}

}  // namespace metanas
