#include <algorithm>

#include "metanas/errors.hpp"
#include "metanas/tape.hpp"

// Rank-2 ops. Broadcast/sum pairs are mutual adjoints, so every backward
// rule is again a library op and higher-order gradients come for free.

namespace metanas {

namespace {

void require_rank(const char* op, const Tensor& t, int rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_str(t.shape));
  }
}

Var scatter_labels(Var v, const std::vector<int>& labels, int cols);

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank("matmul", av, 2);
  require_rank("matmul", bv, 2);
  if (av.dim(1) != bv.dim(0)) {
    throw ShapeError("matmul: inner dims disagree, " + shape_str(av.shape) + " x " + shape_str(bv.shape));
  }
  const int m = av.dim(0), k = av.dim(1), n = bv.dim(0) ? bv.dim(1) : 0;
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i) {
    for (int kk = 0; kk < k; ++kk) {
      const double x = av.data[static_cast<size_t>(i) * k + kk];
      const double* brow = bv.data.data() + static_cast<size_t>(kk) * n;
      double* crow = out.data.data() + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += x * brow[j];
    }
  }
  return a.tape->emit("matmul", std::move(out), {a, b}, [a, b](const Var& d, std::vector<Var>& pg) {
    pg[0] = matmul(d, transpose(b));
    pg[1] = matmul(transpose(a), d);
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  require_rank("transpose", av, 2);
  const int r = av.dim(0), c = av.dim(1);
  Tensor out = Tensor::zeros({c, r});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at2(j, i) = av.at2(i, j);
  return a.tape->emit("transpose", std::move(out), {a},
                      [](const Var& d, std::vector<Var>& pg) { pg[0] = transpose(d); });
}

Var bcast_rows(Var v, int rows) {
  const Tensor& vv = v.value();
  require_rank("bcast_rows", vv, 1);
  const int k = vv.dim(0);
  Tensor out = Tensor::zeros({rows, k});
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < k; ++j) out.at2(i, j) = vv.data[static_cast<size_t>(j)];
  return v.tape->emit("bcast_rows", std::move(out), {v},
                      [](const Var& d, std::vector<Var>& pg) { pg[0] = sum_over_rows(d); });
}

Var sum_over_rows(Var m) {
  const Tensor& mv = m.value();
  require_rank("sum_over_rows", mv, 2);
  const int r = mv.dim(0), c = mv.dim(1);
  Tensor out = Tensor::zeros({c});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.data[static_cast<size_t>(j)] += mv.at2(i, j);
  return m.tape->emit("sum_over_rows", std::move(out), {m},
                      [r](const Var& d, std::vector<Var>& pg) { pg[0] = bcast_rows(d, r); });
}

Var bcast_cols(Var v, int cols) {
  const Tensor& vv = v.value();
  require_rank("bcast_cols", vv, 1);
  const int n = vv.dim(0);
  Tensor out = Tensor::zeros({n, cols});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < cols; ++j) out.at2(i, j) = vv.data[static_cast<size_t>(i)];
  return v.tape->emit("bcast_cols", std::move(out), {v},
                      [](const Var& d, std::vector<Var>& pg) { pg[0] = sum_over_cols(d); });
}

Var sum_over_cols(Var m) {
  const Tensor& mv = m.value();
  require_rank("sum_over_cols", mv, 2);
  const int r = mv.dim(0), c = mv.dim(1);
  Tensor out = Tensor::zeros({r});
  for (int i = 0; i < r; ++i) {
    double acc = 0.0;
    for (int j = 0; j < c; ++j) acc += mv.at2(i, j);
    out.data[static_cast<size_t>(i)] = acc;
  }
  return m.tape->emit("sum_over_cols", std::move(out), {m},
                      [c](const Var& d, std::vector<Var>& pg) { pg[0] = bcast_cols(d, c); });
}

Var rowmax(Var m) {
  const Tensor& mv = m.value();
  require_rank("rowmax", mv, 2);
  const int r = mv.dim(0), c = mv.dim(1);
  Tensor out = Tensor::zeros({r});
  for (int i = 0; i < r; ++i) {
    double best = mv.at2(i, 0);
    for (int j = 1; j < c; ++j) best = std::max(best, mv.at2(i, j));
    out.data[static_cast<size_t>(i)] = best;
  }
  // Used as a shift inside logsumexp; locally constant, carries no gradient.
  return m.tape->constant(std::move(out));
}

namespace {

Var scatter_labels(Var v, const std::vector<int>& labels, int cols) {
  const Tensor& vv = v.value();
  require_rank("scatter_labels", vv, 1);
  const int n = vv.dim(0);
  Tensor out = Tensor::zeros({n, cols});
  for (int i = 0; i < n; ++i) out.at2(i, labels[static_cast<size_t>(i)]) = vv.data[static_cast<size_t>(i)];
  return v.tape->emit("scatter_labels", std::move(out), {v},
                      [labels](const Var& d, std::vector<Var>& pg) {
                        pg[0] = gather_labels(d, labels);
                      });
}

}  // namespace

namespace {

Var pad_rows(Var v, int rows, int from) {
  const Tensor& vv = v.value();
  const int r = vv.dim(0), c = vv.dim(1);
  Tensor out = Tensor::zeros({rows, c});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at2(from + i, j) = vv.at2(i, j);
  const int to = from + r;
  return v.tape->emit("pad_rows", std::move(out), {v},
                      [from, to](const Var& d, std::vector<Var>& pg) {
                        pg[0] = slice_rows(d, from, to);
                      });
}

}  // namespace

Var slice_rows(Var m, int from, int to) {
  const Tensor& mv = m.value();
  require_rank("slice_rows", mv, 2);
  const int r = mv.dim(0), c = mv.dim(1);
  if (from < 0 || to > r || from >= to) {
    throw ShapeError("slice_rows: range [" + std::to_string(from) + "," + std::to_string(to) +
                     ") invalid for " + std::to_string(r) + " rows");
  }
  Tensor out = Tensor::zeros({to - from, c});
  for (int i = from; i < to; ++i)
    for (int j = 0; j < c; ++j) out.at2(i - from, j) = mv.at2(i, j);
  return m.tape->emit("slice_rows", std::move(out), {m},
                      [r, from](const Var& d, std::vector<Var>& pg) {
                        pg[0] = pad_rows(d, r, from);
                      });
}

Var gather_labels(Var m, const std::vector<int>& labels) {
  const Tensor& mv = m.value();
  require_rank("gather_labels", mv, 2);
  const int n = mv.dim(0), c = mv.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    throw ShapeError("gather_labels: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  }
  Tensor out = Tensor::zeros({n});
  for (int i = 0; i < n; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= c) {
      throw ShapeError("gather_labels: label " + std::to_string(y) + " out of range for " +
                       std::to_string(c) + " classes");
    }
    out.data[static_cast<size_t>(i)] = mv.at2(i, y);
  }
  return m.tape->emit("gather_labels", std::move(out), {m},
                      [labels, c](const Var& d, std::vector<Var>& pg) {
                        pg[0] = scatter_labels(d, labels, c);
                      });
}

}  // namespace metanas
