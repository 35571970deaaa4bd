#include <cstdint>
#include <memory>
#include <vector>

#include "metanas/errors.hpp"
#include "metanas/tape.hpp"

// Pooling and spatial/channel rearrangement. Each linear op is paired with
// its adjoint so backward rules stay inside the op library.

namespace metanas {

namespace {

void require_rank4(const char* op, const Tensor& t) {
  if (t.rank() != 4) {
    throw ShapeError(std::string(op) + ": expected rank-4 input, got " + shape_str(t.shape));
  }
}

int out_extent3(int in, int stride) { return (in + 2 - 3) / stride + 1; }  // k=3, pad=1

using IndexVec = std::vector<std::int64_t>;

Var pool_scatter(Var v, std::shared_ptr<const IndexVec> idx, const Shape& x_shape);

// out[o] = t[idx[o]] (t is input-shaped, out is pooled-shaped).
Var pool_gather(Var t, std::shared_ptr<const IndexVec> idx, const Shape& pooled_shape) {
  const Tensor& tv = t.value();
  Tensor out = Tensor::zeros(pooled_shape);
  for (size_t o = 0; o < out.data.size(); ++o) out.data[o] = tv.data[static_cast<size_t>((*idx)[o])];
  const Shape x_shape = tv.shape;
  return t.tape->emit("pool_gather", std::move(out), {t},
                      [idx, x_shape](const Var& d, std::vector<Var>& pg) {
                        pg[0] = pool_scatter(d, idx, x_shape);
                      });
}

Var pool_scatter(Var v, std::shared_ptr<const IndexVec> idx, const Shape& x_shape) {
  const Tensor& vv = v.value();
  Tensor out = Tensor::zeros(x_shape);
  for (size_t o = 0; o < vv.data.size(); ++o) out.data[static_cast<size_t>((*idx)[o])] += vv.data[o];
  const Shape pooled_shape = vv.shape;
  return v.tape->emit("pool_scatter", std::move(out), {v},
                      [idx, pooled_shape](const Var& d, std::vector<Var>& pg) {
                        pg[0] = pool_gather(d, idx, pooled_shape);
                      });
}

Var avg_unpool3(Var v, const Shape& x_shape, int stride);

Tensor avg_pool3_value(const Tensor& x, int stride) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = out_extent3(H, stride), Wo = out_extent3(W, stride);
  Tensor y = Tensor::zeros({N, C, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          double acc = 0.0;
          int cnt = 0;
          for (int u = 0; u < 3; ++u)
            for (int v = 0; v < 3; ++v) {
              const int ih = oh * stride - 1 + u, iw = ow * stride - 1 + v;
              if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
              acc += x.at4(n, c, ih, iw);
              ++cnt;
            }
          y.at4(n, c, oh, ow) = acc / cnt;  // padding cells excluded from the mean
        }
  return y;
}

Tensor avg_unpool3_value(const Tensor& v, const Shape& x_shape, int stride) {
  const int N = x_shape[0], C = x_shape[1], H = x_shape[2], W = x_shape[3];
  const int Ho = v.dim(2), Wo = v.dim(3);
  Tensor out = Tensor::zeros(x_shape);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          int cnt = 0;
          for (int u = 0; u < 3; ++u)
            for (int vv = 0; vv < 3; ++vv) {
              const int ih = oh * stride - 1 + u, iw = ow * stride - 1 + vv;
              if (ih >= 0 && ih < H && iw >= 0 && iw < W) ++cnt;
            }
          const double share = v.at4(n, c, oh, ow) / cnt;
          for (int u = 0; u < 3; ++u)
            for (int vv = 0; vv < 3; ++vv) {
              const int ih = oh * stride - 1 + u, iw = ow * stride - 1 + vv;
              if (ih >= 0 && ih < H && iw >= 0 && iw < W) out.at4(n, c, ih, iw) += share;
            }
        }
  return out;
}

Var avg_unpool3(Var v, const Shape& x_shape, int stride) {
  Tensor out = avg_unpool3_value(v.value(), x_shape, stride);
  return v.tape->emit("avg_unpool3", std::move(out), {v},
                      [stride](const Var& d, std::vector<Var>& pg) {
                        pg[0] = avg_pool3(d, stride);
                      });
}

Var upsample_zeros(Var v, const Shape& x_shape);

Tensor subsample2_value(const Tensor& x) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = (H + 1) / 2, Wo = (W + 1) / 2;
  Tensor y = Tensor::zeros({N, C, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) y.at4(n, c, oh, ow) = x.at4(n, c, 2 * oh, 2 * ow);
  return y;
}

Var upsample_zeros(Var v, const Shape& x_shape) {
  const Tensor& vv = v.value();
  Tensor out = Tensor::zeros(x_shape);
  const int N = x_shape[0], C = x_shape[1];
  const int Ho = vv.dim(2), Wo = vv.dim(3);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) out.at4(n, c, 2 * oh, 2 * ow) = vv.at4(n, c, oh, ow);
  return v.tape->emit("upsample_zeros", std::move(out), {v},
                      [](const Var& d, std::vector<Var>& pg) { pg[0] = subsample2(d); });
}

Var gap_expand(Var v, int H, int W);

Tensor gap_value(const Tensor& x) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor y = Tensor::zeros({N, C});
  const double inv = 1.0 / (static_cast<double>(H) * W);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) acc += x.at4(n, c, h, w);
      y.at2(n, c) = acc * inv;
    }
  return y;
}

Var gap_expand(Var v, int H, int W) {
  const Tensor& vv = v.value();
  const int N = vv.dim(0), C = vv.dim(1);
  Tensor out = Tensor::zeros({N, C, H, W});
  const double inv = 1.0 / (static_cast<double>(H) * W);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double val = vv.at2(n, c) * inv;
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) out.at4(n, c, h, w) = val;
    }
  return v.tape->emit("gap_expand", std::move(out), {v},
                      [](const Var& d, std::vector<Var>& pg) { pg[0] = global_avg_pool(d); });
}

Var channel_pad(Var v, int channels, int from);

}  // namespace

Var max_pool3(Var x, int stride) {
  const Tensor& xv = x.value();
  require_rank4("max_pool3", xv);
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const int Ho = out_extent3(H, stride), Wo = out_extent3(W, stride);
  Tensor y = Tensor::zeros({N, C, Ho, Wo});
  auto idx = std::make_shared<IndexVec>(y.data.size());
  size_t o = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow, ++o) {
          double best = 0.0;
          std::int64_t best_i = -1;
          for (int u = 0; u < 3; ++u)
            for (int v = 0; v < 3; ++v) {
              const int ih = oh * stride - 1 + u, iw = ow * stride - 1 + v;
              if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
              const std::int64_t flat = ((static_cast<std::int64_t>(n) * C + c) * H + ih) * W + iw;
              const double val = xv.data[static_cast<size_t>(flat)];
              if (best_i < 0 || val > best) {  // ties: first cell in scan order wins
                best = val;
                best_i = flat;
              }
            }
          y.data[o] = best;
          (*idx)[o] = best_i;
        }
  const Shape x_shape = xv.shape;
  return x.tape->emit("max_pool3", std::move(y), {x},
                      [idx, x_shape](const Var& d, std::vector<Var>& pg) {
                        pg[0] = pool_scatter(d, idx, x_shape);
                      });
}

Var avg_pool3(Var x, int stride) {
  require_rank4("avg_pool3", x.value());
  Tensor y = avg_pool3_value(x.value(), stride);
  const Shape x_shape = x.value().shape;
  return x.tape->emit("avg_pool3", std::move(y), {x},
                      [x_shape, stride](const Var& d, std::vector<Var>& pg) {
                        pg[0] = avg_unpool3(d, x_shape, stride);
                      });
}

Var subsample2(Var x) {
  require_rank4("subsample2", x.value());
  Tensor y = subsample2_value(x.value());
  const Shape x_shape = x.value().shape;
  return x.tape->emit("subsample2", std::move(y), {x},
                      [x_shape](const Var& d, std::vector<Var>& pg) {
                        pg[0] = upsample_zeros(d, x_shape);
                      });
}

Var global_avg_pool(Var x) {
  require_rank4("global_avg_pool", x.value());
  Tensor y = gap_value(x.value());
  const int H = x.value().dim(2), W = x.value().dim(3);
  return x.tape->emit("global_avg_pool", std::move(y), {x},
                      [H, W](const Var& d, std::vector<Var>& pg) { pg[0] = gap_expand(d, H, W); });
}

Var channel_sum(Var x) {
  require_rank4("channel_sum", x.value());
  const Tensor& xv = x.value();
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  Tensor y = Tensor::zeros({C});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) acc += xv.at4(n, c, h, w);
      y.data[static_cast<size_t>(c)] += acc;
    }
  const Shape like = xv.shape;
  return x.tape->emit("channel_sum", std::move(y), {x},
                      [like](const Var& d, std::vector<Var>& pg) {
                        pg[0] = channel_bcast(d, like);
                      });
}

Var channel_bcast(Var v, const Shape& like) {
  if (like.size() != 4 || v.value().rank() != 1 || v.value().dim(0) != like[1]) {
    throw ShapeError("channel_bcast: vector " + shape_str(v.value().shape) +
                     " does not match channels of " + shape_str(like));
  }
  const Tensor& vv = v.value();
  Tensor out = Tensor::zeros(like);
  const int N = like[0], C = like[1], H = like[2], W = like[3];
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double val = vv.data[static_cast<size_t>(c)];
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) out.at4(n, c, h, w) = val;
    }
  return v.tape->emit("channel_bcast", std::move(out), {v},
                      [](const Var& d, std::vector<Var>& pg) { pg[0] = channel_sum(d); });
}

namespace {

Var channel_pad(Var v, int channels, int from) {
  const Tensor& vv = v.value();
  const int N = vv.dim(0), C = vv.dim(1), H = vv.dim(2), W = vv.dim(3);
  Tensor out = Tensor::zeros({N, channels, H, W});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) out.at4(n, from + c, h, w) = vv.at4(n, c, h, w);
  const int to = from + C;
  return v.tape->emit("channel_pad", std::move(out), {v},
                      [from, to](const Var& d, std::vector<Var>& pg) {
                        pg[0] = slice_channels(d, from, to);
                      });
}

}  // namespace

Var slice_channels(Var x, int from, int to) {
  const Tensor& xv = x.value();
  require_rank4("slice_channels", xv);
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  if (from < 0 || to > C || from >= to) {
    throw ShapeError("slice_channels: range [" + std::to_string(from) + "," + std::to_string(to) +
                     ") invalid for " + std::to_string(C) + " channels");
  }
  Tensor out = Tensor::zeros({N, to - from, H, W});
  for (int n = 0; n < N; ++n)
    for (int c = from; c < to; ++c)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) out.at4(n, c - from, h, w) = xv.at4(n, c, h, w);
  return x.tape->emit("slice_channels", std::move(out), {x},
                      [C, from](const Var& d, std::vector<Var>& pg) {
                        pg[0] = channel_pad(d, C, from);
                      });
}

Var concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: empty input list");
  const Tensor& first = xs[0].value();
  require_rank4("concat_channels", first);
  const int N = first.dim(0), H = first.dim(2), W = first.dim(3);
  int C = 0;
  for (const Var& x : xs) {
    const Tensor& xv = x.value();
    require_rank4("concat_channels", xv);
    if (xv.dim(0) != N || xv.dim(2) != H || xv.dim(3) != W) {
      throw ShapeError("concat_channels: mismatched shapes " + shape_str(first.shape) + " vs " +
                       shape_str(xv.shape));
    }
    C += xv.dim(1);
  }
  Tensor out = Tensor::zeros({N, C, H, W});
  int at = 0;
  std::vector<int> offsets;
  std::vector<int> widths;
  for (const Var& x : xs) {
    const Tensor& xv = x.value();
    const int c0 = xv.dim(1);
    offsets.push_back(at);
    widths.push_back(c0);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < c0; ++c)
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) out.at4(n, at + c, h, w) = xv.at4(n, c, h, w);
    at += c0;
  }
  return xs[0].tape->emit("concat_channels", std::move(out), xs,
                          [offsets, widths](const Var& d, std::vector<Var>& pg) {
                            for (size_t i = 0; i < offsets.size(); ++i) {
                              pg[i] = slice_channels(d, offsets[i], offsets[i] + widths[i]);
                            }
                          });
}

}  // namespace metanas
