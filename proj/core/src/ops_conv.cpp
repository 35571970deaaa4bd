#include <vector>

#include "metanas/errors.hpp"
#include "metanas/tape.hpp"

// Convolution forward plus its two adjoint kernels (input grad, weight
// grad). The three ops reference each other in their backward rules, so
// the family is closed under differentiation: unrolled meta-gradients can
// differentiate through a conv backward pass like any other op.

namespace metanas {

namespace {

struct ConvDims {
  int N, Ci, H, W;
  int Co, Cig, kh, kw;
  int groups, Cog;
  int Ho, Wo;
};

ConvDims conv_dims(const char* op, const Shape& x_shape, const Shape& w_shape,
                   const Conv2dAttrs& a) {
  if (x_shape.size() != 4 || w_shape.size() != 4) {
    throw ShapeError(std::string(op) + ": expected rank-4 input and kernel, got " +
                     shape_str(x_shape) + " and " + shape_str(w_shape));
  }
  ConvDims d;
  d.N = x_shape[0];
  d.Ci = x_shape[1];
  d.H = x_shape[2];
  d.W = x_shape[3];
  d.Co = w_shape[0];
  d.Cig = w_shape[1];
  d.kh = w_shape[2];
  d.kw = w_shape[3];
  d.groups = a.groups;
  if (d.groups < 1 || d.Ci % d.groups != 0 || d.Co % d.groups != 0 || d.Cig != d.Ci / d.groups) {
    throw ShapeError(std::string(op) + ": group mismatch, input " + shape_str(x_shape) +
                     " kernel " + shape_str(w_shape) + " groups " + std::to_string(d.groups));
  }
  d.Cog = d.Co / d.groups;
  d.Ho = (d.H + 2 * a.pad_h - a.dilation * (d.kh - 1) - 1) / a.stride + 1;
  d.Wo = (d.W + 2 * a.pad_w - a.dilation * (d.kw - 1) - 1) / a.stride + 1;
  if (d.Ho < 1 || d.Wo < 1) {
    throw ShapeError(std::string(op) + ": empty output for input " + shape_str(x_shape));
  }
  return d;
}

// cols is (Cig*kh*kw) x (Ho*Wo) for one (image, group) slice.
void im2col(const Tensor& x, int n, int g, const ConvDims& d, const Conv2dAttrs& a, double* cols) {
  const int OHW = d.Ho * d.Wo;
  for (int ci = 0; ci < d.Cig; ++ci) {
    const double* src = x.data.data() +
                        ((static_cast<std::int64_t>(n) * d.Ci + g * d.Cig + ci) * d.H) * d.W;
    for (int u = 0; u < d.kh; ++u) {
      for (int v = 0; v < d.kw; ++v) {
        double* row = cols + (static_cast<std::int64_t>(ci) * d.kh * d.kw + u * d.kw + v) * OHW;
        for (int oh = 0; oh < d.Ho; ++oh) {
          const int ih = oh * a.stride - a.pad_h + u * a.dilation;
          for (int ow = 0; ow < d.Wo; ++ow) {
            const int iw = ow * a.stride - a.pad_w + v * a.dilation;
            row[oh * d.Wo + ow] = (ih >= 0 && ih < d.H && iw >= 0 && iw < d.W)
                                      ? src[ih * d.W + iw]
                                      : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, int n, int g, const ConvDims& d, const Conv2dAttrs& a,
                Tensor& dx) {
  const int OHW = d.Ho * d.Wo;
  for (int ci = 0; ci < d.Cig; ++ci) {
    double* dst = dx.data.data() +
                  ((static_cast<std::int64_t>(n) * d.Ci + g * d.Cig + ci) * d.H) * d.W;
    for (int u = 0; u < d.kh; ++u) {
      for (int v = 0; v < d.kw; ++v) {
        const double* row = cols + (static_cast<std::int64_t>(ci) * d.kh * d.kw + u * d.kw + v) * OHW;
        for (int oh = 0; oh < d.Ho; ++oh) {
          const int ih = oh * a.stride - a.pad_h + u * a.dilation;
          if (ih < 0 || ih >= d.H) continue;
          for (int ow = 0; ow < d.Wo; ++ow) {
            const int iw = ow * a.stride - a.pad_w + v * a.dilation;
            if (iw < 0 || iw >= d.W) continue;
            dst[ih * d.W + iw] += row[oh * d.Wo + ow];
          }
        }
      }
    }
  }
}

// C(MxN) += A(MxK) * B(KxN), row-major, fixed ascending-k summation order.
void gemm_acc(const double* A, const double* B, double* C, int M, int K, int N) {
  for (int i = 0; i < M; ++i) {
    for (int k = 0; k < K; ++k) {
      const double a = A[static_cast<std::int64_t>(i) * K + k];
      const double* brow = B + static_cast<std::int64_t>(k) * N;
      double* crow = C + static_cast<std::int64_t>(i) * N;
      for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
    }
  }
}

// C(MxK2) += A(MxO) * B(K2xO)^T, i.e. dot products of rows.
void gemm_abt_acc(const double* A, const double* B, double* C, int M, int O, int K2) {
  for (int i = 0; i < M; ++i) {
    const double* arow = A + static_cast<std::int64_t>(i) * O;
    for (int j = 0; j < K2; ++j) {
      const double* brow = B + static_cast<std::int64_t>(j) * O;
      double acc = 0.0;
      for (int o = 0; o < O; ++o) acc += arow[o] * brow[o];
      C[static_cast<std::int64_t>(i) * K2 + j] += acc;
    }
  }
}

Tensor conv2d_input_grad_value(const Tensor& dy, const Tensor& w, const Shape& x_shape,
                               const Conv2dAttrs& a) {
  const ConvDims d = conv_dims("conv2d_input_grad", x_shape, w.shape, a);
  const int K = d.Cig * d.kh * d.kw;
  const int OHW = d.Ho * d.Wo;
  Tensor dx = Tensor::zeros(x_shape);
  std::vector<double> wt(static_cast<size_t>(K) * d.Cog);
  std::vector<double> dcols(static_cast<size_t>(K) * OHW);
  for (int g = 0; g < d.groups; ++g) {
    const double* wg = w.data.data() + static_cast<std::int64_t>(g) * d.Cog * K;
    for (int co = 0; co < d.Cog; ++co)
      for (int k = 0; k < K; ++k) wt[static_cast<size_t>(k) * d.Cog + co] = wg[static_cast<std::int64_t>(co) * K + k];
    for (int n = 0; n < d.N; ++n) {
      const double* dyg = dy.data.data() +
                          ((static_cast<std::int64_t>(n) * d.Co + g * d.Cog) * d.Ho) * d.Wo;
      std::fill(dcols.begin(), dcols.end(), 0.0);
      gemm_acc(wt.data(), dyg, dcols.data(), K, d.Cog, OHW);
      col2im_add(dcols.data(), n, g, d, a, dx);
    }
  }
  return dx;
}

Tensor conv2d_weight_grad_value(const Tensor& x, const Tensor& dy, const Shape& w_shape,
                                const Conv2dAttrs& a) {
  const ConvDims d = conv_dims("conv2d_weight_grad", x.shape, w_shape, a);
  const int K = d.Cig * d.kh * d.kw;
  const int OHW = d.Ho * d.Wo;
  Tensor dw = Tensor::zeros(w_shape);
  std::vector<double> cols(static_cast<size_t>(K) * OHW);
  for (int g = 0; g < d.groups; ++g) {
    double* dwg = dw.data.data() + static_cast<std::int64_t>(g) * d.Cog * K;
    for (int n = 0; n < d.N; ++n) {
      im2col(x, n, g, d, a, cols.data());
      const double* dyg = dy.data.data() +
                          ((static_cast<std::int64_t>(n) * d.Co + g * d.Cog) * d.Ho) * d.Wo;
      gemm_abt_acc(dyg, cols.data(), dwg, d.Cog, OHW, K);
    }
  }
  return dw;
}

Var conv2d_input_grad_op(Var dy, Var w, const Shape& x_shape, const Conv2dAttrs& a);
Var conv2d_weight_grad_op(Var x, Var dy, const Shape& w_shape, const Conv2dAttrs& a);

Var conv2d_input_grad_op(Var dy, Var w, const Shape& x_shape, const Conv2dAttrs& a) {
  Tensor dx = conv2d_input_grad_value(dy.value(), w.value(), x_shape, a);
  const Shape w_shape = w.value().shape;
  return dy.tape->emit("conv2d_input_grad", std::move(dx), {dy, w},
                       [dy, w, w_shape, a](const Var& d, std::vector<Var>& pg) {
                         pg[0] = conv2d(d, w, a);
                         pg[1] = conv2d_weight_grad_op(d, dy, w_shape, a);
                       });
}

Var conv2d_weight_grad_op(Var x, Var dy, const Shape& w_shape, const Conv2dAttrs& a) {
  Tensor dw = conv2d_weight_grad_value(x.value(), dy.value(), w_shape, a);
  const Shape x_shape = x.value().shape;
  return x.tape->emit("conv2d_weight_grad", std::move(dw), {x, dy},
                      [x, dy, x_shape, a](const Var& d, std::vector<Var>& pg) {
                        pg[0] = conv2d_input_grad_op(dy, d, x_shape, a);
                        pg[1] = conv2d(x, d, a);
                      });
}

}  // namespace

namespace kernels {

Tensor conv2d_value(const Tensor& x, const Tensor& w, const Conv2dAttrs& a) {
  const ConvDims d = conv_dims("conv2d", x.shape, w.shape, a);
  const int K = d.Cig * d.kh * d.kw;
  const int OHW = d.Ho * d.Wo;
  Tensor y = Tensor::zeros({d.N, d.Co, d.Ho, d.Wo});
  std::vector<double> cols(static_cast<size_t>(K) * OHW);
  for (int n = 0; n < d.N; ++n) {
    for (int g = 0; g < d.groups; ++g) {
      im2col(x, n, g, d, a, cols.data());
      const double* wg = w.data.data() + static_cast<std::int64_t>(g) * d.Cog * K;
      double* yg = y.data.data() + ((static_cast<std::int64_t>(n) * d.Co + g * d.Cog) * d.Ho) * d.Wo;
      gemm_acc(wg, cols.data(), yg, d.Cog, K, OHW);
    }
  }
  return y;
}

}  // namespace kernels

namespace reference {

Tensor conv2d_direct(const Tensor& x, const Tensor& w, const Conv2dAttrs& a) {
  const ConvDims d = conv_dims("conv2d_direct", x.shape, w.shape, a);
  Tensor y = Tensor::zeros({d.N, d.Co, d.Ho, d.Wo});
  for (int n = 0; n < d.N; ++n)
    for (int g = 0; g < d.groups; ++g)
      for (int co = 0; co < d.Cog; ++co)
        for (int oh = 0; oh < d.Ho; ++oh)
          for (int ow = 0; ow < d.Wo; ++ow) {
            double acc = 0.0;
            for (int ci = 0; ci < d.Cig; ++ci)
              for (int u = 0; u < d.kh; ++u)
                for (int v = 0; v < d.kw; ++v) {
                  const int ih = oh * a.stride - a.pad_h + u * a.dilation;
                  const int iw = ow * a.stride - a.pad_w + v * a.dilation;
                  if (ih < 0 || ih >= d.H || iw < 0 || iw >= d.W) continue;
                  acc += x.at4(n, g * d.Cig + ci, ih, iw) * w.at4(g * d.Cog + co, ci, u, v);
                }
            y.at4(n, g * d.Cog + co, oh, ow) = acc;
          }
  return y;
}

}  // namespace reference

Var conv2d(Var x, Var w, const Conv2dAttrs& a) {
  Tensor y = kernels::conv2d_value(x.value(), w.value(), a);
  const Shape x_shape = x.value().shape;
  const Shape w_shape = w.value().shape;
  return x.tape->emit("conv2d", std::move(y), {x, w},
                      [x, w, x_shape, w_shape, a](const Var& d, std::vector<Var>& pg) {
                        pg[0] = conv2d_input_grad_op(d, w, x_shape, a);
                        pg[1] = conv2d_weight_grad_op(x, d, w_shape, a);
                      });
}

}  // namespace metanas
