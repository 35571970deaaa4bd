#include "metanas/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metanas/errors.hpp"

namespace metanas {

void symmetric_eigen(const Tensor& matrix, std::vector<double>& eigenvalues, Tensor& eigenvectors) {
  const int n = matrix.dim(0);
  if (matrix.rank() != 2 || matrix.dim(1) != n) {
    throw ShapeError("symmetric_eigen: matrix must be square, got " + shape_str(matrix.shape));
  }
  Tensor a = matrix;
  Tensor v = Tensor::zeros({n, n});
  for (int i = 0; i < n; ++i) v.at2(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a.at2(p, q) * a.at2(p, q);
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a.at2(p, q);
        if (std::fabs(apq) < 1e-300) continue;
        const double theta = (a.at2(q, q) - a.at2(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < n; ++i) {
          const double aip = a.at2(i, p), aiq = a.at2(i, q);
          a.at2(i, p) = c * aip - s * aiq;
          a.at2(i, q) = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = a.at2(p, i), aqi = a.at2(q, i);
          a.at2(p, i) = c * api - s * aqi;
          a.at2(q, i) = s * api + c * aqi;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = v.at2(i, p), viq = v.at2(i, q);
          v.at2(i, p) = c * vip - s * viq;
          v.at2(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return a.at2(i, i) > a.at2(j, j); });
  eigenvalues.assign(static_cast<size_t>(n), 0.0);
  eigenvectors = Tensor::zeros({n, n});
  for (int k = 0; k < n; ++k) {
    eigenvalues[static_cast<size_t>(k)] = a.at2(order[static_cast<size_t>(k)],
                                                order[static_cast<size_t>(k)]);
    for (int i = 0; i < n; ++i) {
      eigenvectors.at2(i, k) = v.at2(i, order[static_cast<size_t>(k)]);
    }
  }
}

PcaResult pca(const std::vector<std::vector<double>>& samples, int k) {
  const int n = static_cast<int>(samples.size());
  if (n < 2) throw ConfigError("pca: need at least k+1 >= 2 samples");
  const int d = static_cast<int>(samples[0].size());
  for (const auto& s : samples) {
    if (static_cast<int>(s.size()) != d) throw ShapeError("pca: samples have unequal lengths");
  }
  if (k < 1 || k > std::min(n - 1, d)) {
    if (k < 1) throw ConfigError("pca: k must be >= 1");
  }

  PcaResult result;
  result.requested_k = k;
  result.mean.assign(static_cast<size_t>(d), 0.0);
  for (const auto& s : samples)
    for (int j = 0; j < d; ++j) result.mean[static_cast<size_t>(j)] += s[static_cast<size_t>(j)];
  for (double& m : result.mean) m /= n;

  Tensor centered = Tensor::zeros({n, d});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      centered.at2(i, j) = samples[static_cast<size_t>(i)][static_cast<size_t>(j)] -
                           result.mean[static_cast<size_t>(j)];
    }

  const double norm = 1.0 / (n - 1);
  double total_variance = 0.0;
  for (double v : centered.data) total_variance += v * v;
  total_variance *= norm;

  std::vector<double> eigenvalues;
  Tensor components;  // rows
  if (d <= n) {
    Tensor cov = Tensor::zeros({d, d});
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < d; ++p) {
        const double xp = centered.at2(i, p);
        if (xp == 0.0) continue;
        for (int q = 0; q < d; ++q) cov.at2(p, q) += xp * centered.at2(i, q) * norm;
      }
    Tensor vecs;
    symmetric_eigen(cov, eigenvalues, vecs);
    components = Tensor::zeros({d, d});
    for (int c = 0; c < d; ++c)
      for (int j = 0; j < d; ++j) components.at2(c, j) = vecs.at2(j, c);
  } else {
    // Dual form: eigenvectors of the Gram matrix map to components.
    Tensor gram = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int p = 0; p < d; ++p) acc += centered.at2(i, p) * centered.at2(j, p);
        gram.at2(i, j) = acc * norm;
      }
    Tensor vecs;
    symmetric_eigen(gram, eigenvalues, vecs);
    components = Tensor::zeros({n, d});
    for (int c = 0; c < n; ++c) {
      double sq = 0.0;
      for (int p = 0; p < d; ++p) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += centered.at2(i, p) * vecs.at2(i, c);
        components.at2(c, p) = acc;
        sq += acc * acc;
      }
      if (sq > 0.0) {
        const double inv = 1.0 / std::sqrt(sq);
        for (int p = 0; p < d; ++p) components.at2(c, p) *= inv;
      }
    }
  }

  const double rank_tol = 1e-12 * std::max(1.0, eigenvalues.empty() ? 0.0 : eigenvalues[0]);
  int rank = 0;
  for (double ev : eigenvalues) {
    if (ev > rank_tol) ++rank;
  }
  result.effective_k = std::min(k, rank);
  if (result.effective_k < 1) throw ConfigError("pca: data has zero variance");

  const int ke = result.effective_k;
  result.eigenvalues.assign(eigenvalues.begin(), eigenvalues.begin() + ke);
  result.explained_ratio.resize(static_cast<size_t>(ke));
  for (int i = 0; i < ke; ++i) {
    result.explained_ratio[static_cast<size_t>(i)] =
        total_variance > 0.0 ? result.eigenvalues[static_cast<size_t>(i)] / total_variance : 0.0;
  }
  result.components = Tensor::zeros({ke, d});
  for (int c = 0; c < ke; ++c)
    for (int p = 0; p < d; ++p) result.components.at2(c, p) = components.at2(c, p);

  result.coordinates = Tensor::zeros({n, ke});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < ke; ++c) {
      double acc = 0.0;
      for (int p = 0; p < d; ++p) acc += centered.at2(i, p) * result.components.at2(c, p);
      result.coordinates.at2(i, c) = acc;
    }
  return result;
}

}  // namespace metanas
