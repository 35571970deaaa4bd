#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace metanas {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense row-major array of 64-bit floats. Rank 0 (empty shape) is a scalar.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> d);
  static Tensor zeros(const Shape& s);
  static Tensor full(const Shape& s, double v);
  static Tensor scalar(double v);

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool is_scalar() const { return numel() == 1 && shape.empty(); }

  double scalar_value() const;

  // 4-D accessors for (N, C, H, W) activations.
  double& at4(int n, int c, int h, int w);
  double at4(int n, int c, int h, int w) const;
  // 2-D accessors for (rows, cols) matrices.
  double& at2(int r, int c);
  double at2(int r, int c) const;

  bool all_finite() const;
};

// Throws ShapeError with the op name when shapes disagree.
void check_same_shape(const char* op, const Tensor& a, const Tensor& b);
// Throws NumericFault naming `op` if t contains NaN/Inf.
void check_finite(const char* op, const Tensor& t);

}  // namespace metanas
