#include <doctest.h>

#include "metanas/errors.hpp"
#include "metanas/rng.hpp"
#include "metanas/tape.hpp"
#include "metanas/tensor.hpp"
#include "test_util.hpp"

using namespace metanas;

TEST_CASE("tensor shape/data invariant enforced") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(Tensor({0}, {}), ShapeError);
  Tensor t = Tensor::zeros({2, 3});
  CHECK(t.numel() == 6);
}

TEST_CASE("backward of sum is all ones") {
  Tape tape;
  RngStream rng = make_stream(1, "t");
  Tensor x = testing::random_tensor({3, 4}, rng);
  Var xv = tape.leaf(x);
  Var loss = sum_all(xv);
  auto grads = tape.gradient_values(loss, {xv});
  for (double g : grads[0].data) CHECK(g == 1.0);
}

TEST_CASE("backward of sum(x*x)/2 equals x") {
  Tape tape;
  RngStream rng = make_stream(2, "t");
  Tensor x = testing::random_tensor({5}, rng);
  Var xv = tape.leaf(x);
  Var loss = scale(sum_all(mul(xv, xv)), 0.5);
  auto grads = tape.gradient_values(loss, {xv});
  for (size_t i = 0; i < x.data.size(); ++i) CHECK(grads[0].data[i] == doctest::Approx(x.data[i]));
}

TEST_CASE("diamond graph accumulates both paths") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(3.0));
  Var a = scale(x, 2.0);
  Var b = mul(x, x);
  Var loss = add(a, b);  // 2x + x^2, d/dx = 2 + 2x = 8
  auto grads = tape.gradient_values(loss, {x});
  CHECK(grads[0].data[0] == doctest::Approx(8.0));
}

TEST_CASE("untouched parameters get zero gradients") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(1.0));
  Var unused = tape.leaf(Tensor::zeros({2, 2}));
  Var loss = mul(x, x);
  auto grads = tape.gradient_values(loss, {x, unused});
  CHECK(grads[1].shape == Shape{2, 2});
  for (double g : grads[1].data) CHECK(g == 0.0);
}

TEST_CASE("backward requires scalar loss") {
  Tape tape;
  Var x = tape.leaf(Tensor::zeros({2}));
  CHECK_THROWS_AS(tape.gradient_values(add(x, x), {x}), ShapeError);
}

TEST_CASE("vars cannot cross tapes") {
  Tape a;
  Tape b;
  Var xa = a.leaf(Tensor::scalar(1.0));
  Var xb = b.leaf(Tensor::scalar(1.0));
  CHECK_THROWS_AS(add(xa, xb), Error);
}

TEST_CASE("non-finite forward output raises a numeric fault naming the op") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(-1.0));
  try {
    (void)log_op(x);
    FAIL("expected NumericFault");
  } catch (const NumericFault& e) {
    CHECK(std::string(e.what()).find("log") != std::string::npos);
  }
}

TEST_CASE("tape replay: identical runs produce bitwise-identical gradients") {
  auto run = [] {
    Tape tape;
    RngStream rng = make_stream(7, "replay");
    Tensor x = testing::random_tensor({4, 4}, rng);
    Var xv = tape.leaf(x);
    Var loss = sum_all(mul(relu(xv), exp_op(scale(xv, 0.1))));
    return tape.gradient_values(loss, {xv})[0];
  };
  Tensor g1 = run();
  Tensor g2 = run();
  REQUIRE(g1.data.size() == g2.data.size());
  for (size_t i = 0; i < g1.data.size(); ++i) CHECK(g1.data[i] == g2.data[i]);
}

TEST_CASE("second-order gradients flow through gradients()") {
  // f(x) = x^3; f' = 3x^2; f'' = 6x.
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(2.0));
  Var f = mul(x, mul(x, x));
  auto g1 = tape.gradients(f, {x});
  REQUIRE(g1[0].defined());
  CHECK(g1[0].value().data[0] == doctest::Approx(12.0));
  auto g2 = tape.gradients(g1[0], {x});
  REQUIRE(g2[0].defined());
  CHECK(g2[0].value().data[0] == doctest::Approx(12.0128).epsilon(0.5));  // 6x = 12
  CHECK(g2[0].value().data[0] == doctest::Approx(12.0));
}
