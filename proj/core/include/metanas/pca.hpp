#pragma once

#include <string>
#include <vector>

#include "metanas/tensor.hpp"

namespace metanas {

struct PcaResult {
  Tensor coordinates;                 // (n, k_eff) projections
  Tensor components;                  // (k_eff, d) orthonormal rows
  std::vector<double> mean;           // (d)
  std::vector<double> eigenvalues;    // descending, length k_eff
  std::vector<double> explained_ratio;
  int requested_k = 0;
  int effective_k = 0;                // < requested_k when rank-deficient
};

// Mean-centered PCA via eigendecomposition of the covariance (dual Gram
// form when dimensions exceed the sample count). Components are ordered by
// descending variance; k is reduced to the numerical rank when necessary.
PcaResult pca(const std::vector<std::vector<double>>& samples, int k);

// Symmetric eigendecomposition (cyclic Jacobi), eigenvalues descending.
void symmetric_eigen(const Tensor& matrix, std::vector<double>& eigenvalues,
                     Tensor& eigenvectors /* columns */);

}  // namespace metanas
