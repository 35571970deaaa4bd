#include <cmath>

#include "metanas/errors.hpp"
#include "metanas/tape.hpp"

// Elementwise ops, scalar arithmetic, and whole-tensor reductions.

namespace metanas {

namespace {

Var scatter_one(Var grad_scalar, std::int64_t index, const Shape& shape);

template <typename F>
Tensor map1(const Tensor& a, F f) {
  Tensor out = a;
  for (double& v : out.data) v = f(v);
  return out;
}

template <typename F>
Tensor map2(const char* op, const Tensor& a, const Tensor& b, F f) {
  check_same_shape(op, a, b);
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = f(a.data[i], b.data[i]);
  return out;
}

}  // namespace

Var add(Var a, Var b) {
  Tensor v = map2("add", a.value(), b.value(), [](double x, double y) { return x + y; });
  return a.tape->emit("add", std::move(v), {a, b}, [](const Var& d, std::vector<Var>& pg) {
    pg[0] = d;
    pg[1] = d;
  });
}

Var sub(Var a, Var b) {
  Tensor v = map2("sub", a.value(), b.value(), [](double x, double y) { return x - y; });
  return a.tape->emit("sub", std::move(v), {a, b}, [](const Var& d, std::vector<Var>& pg) {
    pg[0] = d;
    pg[1] = neg(d);
  });
}

Var mul(Var a, Var b) {
  Tensor v = map2("mul", a.value(), b.value(), [](double x, double y) { return x * y; });
  return a.tape->emit("mul", std::move(v), {a, b}, [a, b](const Var& d, std::vector<Var>& pg) {
    pg[0] = mul(d, b);
    pg[1] = mul(d, a);
  });
}

Var divide(Var a, Var b) {
  Tensor v = map2("div", a.value(), b.value(), [](double x, double y) { return x / y; });
  // Backward rules recompute forward values as ops (never cached constants)
  // so gradients of gradients stay exact.
  return a.tape->emit("div", std::move(v), {a, b}, [a, b](const Var& d, std::vector<Var>& pg) {
    pg[0] = divide(d, b);
    pg[1] = neg(divide(mul(d, a), mul(b, b)));
  });
}

Var neg(Var a) {
  Tensor v = map1(a.value(), [](double x) { return -x; });
  return a.tape->emit("neg", std::move(v), {a},
                      [](const Var& d, std::vector<Var>& pg) { pg[0] = neg(d); });
}

Var scale(Var a, double c) {
  Tensor v = map1(a.value(), [c](double x) { return c * x; });
  return a.tape->emit("scale", std::move(v), {a},
                      [c](const Var& d, std::vector<Var>& pg) { pg[0] = scale(d, c); });
}

Var add_const(Var a, double c) {
  Tensor v = map1(a.value(), [c](double x) { return x + c; });
  return a.tape->emit("add_const", std::move(v), {a},
                      [](const Var& d, std::vector<Var>& pg) { pg[0] = d; });
}

Var exp_op(Var a) {
  Tensor v = map1(a.value(), [](double x) { return std::exp(x); });
  return a.tape->emit("exp", std::move(v), {a}, [a](const Var& d, std::vector<Var>& pg) {
    pg[0] = mul(d, exp_op(a));
  });
}

Var log_op(Var a) {
  Tensor v = map1(a.value(), [](double x) { return std::log(x); });
  return a.tape->emit("log", std::move(v), {a},
                      [a](const Var& d, std::vector<Var>& pg) { pg[0] = divide(d, a); });
}

Var sqrt_op(Var a) {
  Tensor v = map1(a.value(), [](double x) { return std::sqrt(x); });
  return a.tape->emit("sqrt", std::move(v), {a}, [a](const Var& d, std::vector<Var>& pg) {
    pg[0] = divide(scale(d, 0.5), sqrt_op(a));
  });
}

Var relu(Var a) {
  const Tensor& av = a.value();
  Tensor v = map1(av, [](double x) { return x > 0.0 ? x : 0.0; });
  Tensor mask = map1(av, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
  Var mask_var = a.tape->constant(std::move(mask));
  return a.tape->emit("relu", std::move(v), {a}, [mask_var](const Var& d, std::vector<Var>& pg) {
    pg[0] = mul(d, mask_var);
  });
}

Var sigmoid(Var a) {
  Tensor v = map1(a.value(), [](double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  return a.tape->emit("sigmoid", std::move(v), {a}, [a](const Var& d, std::vector<Var>& pg) {
    Var s = sigmoid(a);
    pg[0] = mul(d, mul(s, add_const(neg(s), 1.0)));
  });
}

Var softplus(Var a) {
  Tensor v = map1(a.value(), [](double x) {
    // max(x,0) + log1p(exp(-|x|)): stable for large |x|.
    return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x)));
  });
  return a.tape->emit("softplus", std::move(v), {a}, [a](const Var& d, std::vector<Var>& pg) {
    pg[0] = mul(d, sigmoid(a));
  });
}

Var mul_scalar(Var tensor, Var scalar) {
  if (scalar.value().numel() != 1) {
    throw ShapeError("mul_scalar: scalar operand has shape " + shape_str(scalar.value().shape));
  }
  const double s = scalar.value().data[0];
  Tensor v = map1(tensor.value(), [s](double x) { return s * x; });
  return tensor.tape->emit(
      "mul_scalar", std::move(v), {tensor, scalar},
      [tensor, scalar](const Var& d, std::vector<Var>& pg) {
        pg[0] = mul_scalar(d, scalar);
        pg[1] = reshape(sum_all(mul(d, tensor)), scalar.value().shape);
      });
}

Var sum_all(Var a) {
  double acc = 0.0;
  for (double v : a.value().data) acc += v;
  const Shape in_shape = a.value().shape;
  return a.tape->emit("sum_all", Tensor::scalar(acc), {a},
                      [in_shape](const Var& d, std::vector<Var>& pg) {
                        pg[0] = broadcast_all(d, in_shape);
                      });
}

Var broadcast_all(Var scalar, const Shape& shape) {
  if (scalar.value().numel() != 1) {
    throw ShapeError("broadcast_all: operand has shape " + shape_str(scalar.value().shape));
  }
  Tensor v = Tensor::full(shape, scalar.value().data[0]);
  const Shape s_shape = scalar.value().shape;
  return scalar.tape->emit("broadcast_all", std::move(v), {scalar},
                           [s_shape](const Var& d, std::vector<Var>& pg) {
                             pg[0] = reshape(sum_all(d), s_shape);
                           });
}

Var mean_all(Var a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.value().numel())); }

Var reshape(Var a, const Shape& shape) {
  if (shape_numel(shape) != a.value().numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.value().shape) + " as " + shape_str(shape));
  }
  if (a.value().shape == shape) return a;
  Tensor v(shape, a.value().data);
  const Shape in_shape = a.value().shape;
  return a.tape->emit("reshape", std::move(v), {a}, [in_shape](const Var& d, std::vector<Var>& pg) {
    pg[0] = reshape(d, in_shape);
  });
}

namespace {

Var scatter_one(Var grad_scalar, std::int64_t index, const Shape& shape) {
  Tensor v = Tensor::zeros(shape);
  v.data[static_cast<size_t>(index)] = grad_scalar.value().data[0];
  return grad_scalar.tape->emit("scatter_one", std::move(v), {grad_scalar},
                                [index](const Var& d, std::vector<Var>& pg) {
                                  pg[0] = take(d, index);
                                });
}

}  // namespace

Var take(Var a, std::int64_t index) {
  if (index < 0 || index >= a.value().numel()) {
    throw ShapeError("take: index " + std::to_string(index) + " out of range for " +
                     shape_str(a.value().shape));
  }
  Tensor v = Tensor::scalar(a.value().data[static_cast<size_t>(index)]);
  const Shape in_shape = a.value().shape;
  return a.tape->emit("take", std::move(v), {a},
                      [index, in_shape](const Var& d, std::vector<Var>& pg) {
                        pg[0] = scatter_one(d, index, in_shape);
                      });
}

}  // namespace metanas
