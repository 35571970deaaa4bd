#include "metanas/tensor.hpp"

#include <cmath>
#include <sstream>

#include "metanas/errors.hpp"

namespace metanas {

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << ")";
  return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  for (int e : shape) {
    if (e <= 0) throw ShapeError("tensor: non-positive extent in shape " + shape_str(shape));
  }
}

Tensor Tensor::zeros(const Shape& s) {
  return Tensor(s, std::vector<double>(static_cast<size_t>(shape_numel(s)), 0.0));
}

Tensor Tensor::full(const Shape& s, double v) {
  return Tensor(s, std::vector<double>(static_cast<size_t>(shape_numel(s)), v));
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

double Tensor::scalar_value() const {
  if (numel() != 1) throw ShapeError("scalar_value: tensor has " + std::to_string(numel()) + " elements");
  return data[0];
}

double& Tensor::at4(int n, int c, int h, int w) {
  return data[static_cast<size_t>(((static_cast<std::int64_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w)];
}

double Tensor::at4(int n, int c, int h, int w) const {
  return data[static_cast<size_t>(((static_cast<std::int64_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w)];
}

double& Tensor::at2(int r, int c) { return data[static_cast<size_t>(static_cast<std::int64_t>(r) * shape[1] + c)]; }

double Tensor::at2(int r, int c) const {
  return data[static_cast<size_t>(static_cast<std::int64_t>(r) * shape[1] + c)];
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": expected shape " + shape_str(a.shape) + ", got " +
                     shape_str(b.shape));
  }
}

void check_finite(const char* op, const Tensor& t) {
  if (!t.all_finite()) {
    throw NumericFault(std::string(op) + ": non-finite value in output");
  }
}

}  // namespace metanas
