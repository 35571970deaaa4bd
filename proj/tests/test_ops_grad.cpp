#include <doctest.h>

#include <cmath>

#include "metanas/rng.hpp"
#include "metanas/tape.hpp"
#include "test_util.hpp"

// Finite-difference checks: every primitive's analytic gradient against
// central differences on random small inputs, plus forward oracles against
// nested-loop references.

using namespace metanas;
using metanas::testing::check_gradients;
using metanas::testing::random_tensor;

namespace {

void expect_grad_ok(const std::string& name, const testing::OpFn& fn, std::vector<Tensor> inputs,
                    double h = 1e-6, double rel_tol = 1e-4) {
  try {
    check_gradients(name, fn, std::move(inputs), h, rel_tol);
  } catch (const testing::GradCheckFailure& f) {
    FAIL(f.detail);
  }
}

}  // namespace

TEST_CASE("elementwise and scalar op gradients") {
  RngStream rng = make_stream(11, "elem");
  Tensor a = random_tensor({3, 4}, rng, 0.3, 2.0);
  Tensor b = random_tensor({3, 4}, rng, 0.5, 1.5);

  expect_grad_ok("add", [](Tape&, const std::vector<Var>& v) { return add(v[0], v[1]); }, {a, b});
  expect_grad_ok("sub", [](Tape&, const std::vector<Var>& v) { return sub(v[0], v[1]); }, {a, b});
  expect_grad_ok("mul", [](Tape&, const std::vector<Var>& v) { return mul(v[0], v[1]); }, {a, b});
  expect_grad_ok("div", [](Tape&, const std::vector<Var>& v) { return divide(v[0], v[1]); }, {a, b});
  expect_grad_ok("neg", [](Tape&, const std::vector<Var>& v) { return neg(v[0]); }, {a});
  expect_grad_ok("scale", [](Tape&, const std::vector<Var>& v) { return scale(v[0], -1.7); }, {a});
  expect_grad_ok("add_const", [](Tape&, const std::vector<Var>& v) { return add_const(v[0], 3.0); }, {a});
  expect_grad_ok("exp", [](Tape&, const std::vector<Var>& v) { return exp_op(v[0]); }, {a});
  expect_grad_ok("log", [](Tape&, const std::vector<Var>& v) { return log_op(v[0]); }, {a});
  expect_grad_ok("sqrt", [](Tape&, const std::vector<Var>& v) { return sqrt_op(v[0]); }, {a});
  expect_grad_ok("sigmoid", [](Tape&, const std::vector<Var>& v) { return sigmoid(v[0]); }, {a});
  expect_grad_ok("softplus", [](Tape&, const std::vector<Var>& v) { return softplus(v[0]); }, {a});
  expect_grad_ok("mul_scalar",
                 [](Tape&, const std::vector<Var>& v) { return mul_scalar(v[0], v[1]); },
                 {a, Tensor::scalar(0.7)});
  expect_grad_ok("take", [](Tape&, const std::vector<Var>& v) { return take(v[0], 5); }, {a});
  expect_grad_ok("reshape+sum",
                 [](Tape&, const std::vector<Var>& v) { return sum_all(reshape(v[0], {12})); }, {a});
}

TEST_CASE("relu gradient away from the kink") {
  RngStream rng = make_stream(12, "relu");
  Tensor a = random_tensor({4, 4}, rng, 0.2, 1.0);
  for (size_t i = 0; i < a.data.size(); i += 2) a.data[i] = -a.data[i];
  expect_grad_ok("relu", [](Tape&, const std::vector<Var>& v) { return relu(v[0]); }, {a});
}

TEST_CASE("matrix op gradients") {
  RngStream rng = make_stream(13, "mat");
  Tensor m = random_tensor({3, 5}, rng);
  Tensor n = random_tensor({5, 2}, rng);
  Tensor v5 = random_tensor({5}, rng);
  Tensor v3 = random_tensor({3}, rng);

  expect_grad_ok("matmul", [](Tape&, const std::vector<Var>& v) { return matmul(v[0], v[1]); }, {m, n});
  expect_grad_ok("transpose", [](Tape&, const std::vector<Var>& v) { return transpose(v[0]); }, {m});
  expect_grad_ok("bcast_rows", [](Tape&, const std::vector<Var>& v) { return bcast_rows(v[0], 4); }, {v5});
  expect_grad_ok("sum_over_rows", [](Tape&, const std::vector<Var>& v) { return sum_over_rows(v[0]); }, {m});
  expect_grad_ok("bcast_cols", [](Tape&, const std::vector<Var>& v) { return bcast_cols(v[0], 6); }, {v3});
  expect_grad_ok("sum_over_cols", [](Tape&, const std::vector<Var>& v) { return sum_over_cols(v[0]); }, {m});
  expect_grad_ok("slice_rows", [](Tape&, const std::vector<Var>& v) { return slice_rows(v[0], 1, 3); }, {m});
  expect_grad_ok("gather_labels",
                 [](Tape&, const std::vector<Var>& v) { return gather_labels(v[0], {1, 0, 4}); }, {m});
  expect_grad_ok("logsumexp_rows",
                 [](Tape&, const std::vector<Var>& v) { return logsumexp_rows(v[0]); }, {m});
  expect_grad_ok("softmax_rows", [](Tape&, const std::vector<Var>& v) { return softmax_rows(v[0]); }, {m});
}

TEST_CASE("conv2d gradients across stride/dilation/groups") {
  RngStream rng = make_stream(14, "conv");
  struct Case {
    Shape x, w;
    Conv2dAttrs attrs;
    const char* name;
  };
  const Case cases[] = {
      {{2, 3, 5, 5}, {4, 3, 3, 3}, Conv2dAttrs::padded(1, 1), "conv3x3"},
      {{1, 2, 6, 6}, {2, 2, 1, 1}, Conv2dAttrs::padded(1, 0), "conv1x1"},
      {{1, 3, 5, 5}, {6, 3, 3, 3}, Conv2dAttrs::padded(2, 1), "conv3x3s2"},
      {{1, 4, 6, 6}, {4, 1, 3, 3}, Conv2dAttrs::padded(1, 1, 1, 4), "dwconv3x3"},
      {{1, 4, 6, 6}, {4, 1, 3, 3}, Conv2dAttrs::padded(2, 1, 1, 4), "dwconv3x3s2"},
      {{1, 2, 7, 7}, {2, 1, 3, 3}, Conv2dAttrs::padded(1, 2, 2, 2), "dw-dilated"},
      {{1, 1, 6, 6}, {2, 1, 5, 5}, Conv2dAttrs::padded(2, 4, 2, 1), "dilated5s2"},
      {{1, 1, 8, 8}, {1, 1, 1, 7}, Conv2dAttrs{1, 0, 3, 1, 1}, "conv1x7"},
      {{1, 1, 8, 8}, {1, 1, 7, 1}, Conv2dAttrs{1, 3, 0, 1, 1}, "conv7x1"},
  };
  for (const Case& c : cases) {
    Tensor x = random_tensor(c.x, rng);
    Tensor w = random_tensor(c.w, rng, -0.5, 0.5);
    expect_grad_ok(c.name,
                   [attrs = c.attrs](Tape&, const std::vector<Var>& v) {
                     return conv2d(v[0], v[1], attrs);
                   },
                   {x, w});
  }
}

TEST_CASE("conv2d matches the nested-loop reference on random inputs") {
  RngStream rng = make_stream(15, "convref");
  for (int trial = 0; trial < 4; ++trial) {
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    Tensor w = random_tensor({6, 3, 3, 3}, rng);
    const Conv2dAttrs attrs = Conv2dAttrs::padded(trial % 2 + 1, 1);
    Tensor fast = kernels::conv2d_value(x, w, attrs);
    Tensor slow = reference::conv2d_direct(x, w, attrs);
    REQUIRE(fast.shape == slow.shape);
    for (size_t i = 0; i < fast.data.size(); ++i) {
      const double denom = std::max(1.0, std::fabs(slow.data[i]));
      CHECK(std::fabs(fast.data[i] - slow.data[i]) / denom < 1e-10);
    }
  }
}

TEST_CASE("conv2d with a centered delta kernel is the identity") {
  RngStream rng = make_stream(16, "delta");
  Tensor x = random_tensor({1, 1, 5, 5}, rng);
  Tensor w = Tensor::zeros({1, 1, 3, 3});
  w.at4(0, 0, 1, 1) = 1.0;
  Tape tape;
  Var y = conv2d(tape.constant(x), tape.constant(w), Conv2dAttrs::padded(1, 1));
  for (size_t i = 0; i < x.data.size(); ++i) CHECK(y.value().data[i] == doctest::Approx(x.data[i]));
}

TEST_CASE("1x7-then-7x1 composite conv preserves shape and differentiates") {
  RngStream rng = make_stream(17, "conv17");
  Tensor x = random_tensor({1, 2, 8, 8}, rng);
  Tensor w1 = random_tensor({2, 2, 1, 7}, rng, -0.3, 0.3);
  Tensor w2 = random_tensor({2, 2, 7, 1}, rng, -0.3, 0.3);
  expect_grad_ok("conv_1x7_7x1",
                 [](Tape&, const std::vector<Var>& v) {
                   Var h = conv2d(v[0], v[1], Conv2dAttrs{1, 0, 3, 1, 1});
                   return conv2d(h, v[2], Conv2dAttrs{1, 3, 0, 1, 1});
                 },
                 {x, w1, w2});
  Tape tape;
  Var h = conv2d(tape.constant(x), tape.constant(w1), Conv2dAttrs{1, 0, 3, 1, 1});
  Var y = conv2d(h, tape.constant(w2), Conv2dAttrs{1, 3, 0, 1, 1});
  CHECK(y.value().shape == x.shape);
}

TEST_CASE("pooling and spatial op gradients") {
  RngStream rng = make_stream(18, "pool");
  Tensor x = random_tensor({2, 3, 6, 6}, rng);
  for (int stride : {1, 2}) {
    expect_grad_ok("max_pool3",
                   [stride](Tape&, const std::vector<Var>& v) { return max_pool3(v[0], stride); }, {x});
    expect_grad_ok("avg_pool3",
                   [stride](Tape&, const std::vector<Var>& v) { return avg_pool3(v[0], stride); }, {x});
  }
  expect_grad_ok("subsample2", [](Tape&, const std::vector<Var>& v) { return subsample2(v[0]); }, {x});
  expect_grad_ok("global_avg_pool",
                 [](Tape&, const std::vector<Var>& v) { return global_avg_pool(v[0]); }, {x});
  expect_grad_ok("channel_sum", [](Tape&, const std::vector<Var>& v) { return channel_sum(v[0]); }, {x});
  expect_grad_ok("channel_bcast",
                 [&](Tape&, const std::vector<Var>& v) { return channel_bcast(v[0], {2, 3, 6, 6}); },
                 {random_tensor({3}, rng)});
  expect_grad_ok("slice_channels",
                 [](Tape&, const std::vector<Var>& v) { return slice_channels(v[0], 1, 3); }, {x});
  expect_grad_ok("concat_channels",
                 [](Tape&, const std::vector<Var>& v) { return concat_channels({v[0], v[1]}); },
                 {x, random_tensor({2, 2, 6, 6}, rng)});
}

TEST_CASE("max_pool3 forward matches a direct window scan") {
  RngStream rng = make_stream(19, "poolref");
  Tensor x = random_tensor({1, 2, 5, 5}, rng);
  Tape tape;
  Var y = max_pool3(tape.constant(x), 1);
  for (int c = 0; c < 2; ++c)
    for (int oh = 0; oh < 5; ++oh)
      for (int ow = 0; ow < 5; ++ow) {
        double best = -1e300;
        for (int u = -1; u <= 1; ++u)
          for (int v = -1; v <= 1; ++v) {
            const int ih = oh + u, iw = ow + v;
            if (ih < 0 || ih >= 5 || iw < 0 || iw >= 5) continue;
            best = std::max(best, x.at4(0, c, ih, iw));
          }
        CHECK(y.value().at4(0, c, oh, ow) == doctest::Approx(best));
      }
}

TEST_CASE("batch norm: zero mean, unit variance, affine, gradients") {
  RngStream rng = make_stream(20, "bn");
  Tensor x = random_tensor({3, 2, 4, 4}, rng, -2.0, 2.0);
  Tensor g = random_tensor({2}, rng, 0.5, 1.5);
  Tensor b = random_tensor({2}, rng);

  Tape tape;
  Var y = batch_norm(tape.constant(x), tape.constant(Tensor::full({2}, 1.0)),
                     tape.constant(Tensor::zeros({2})));
  for (int c = 0; c < 2; ++c) {
    double mean = 0.0;
    for (int n = 0; n < 3; ++n)
      for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 4; ++w) mean += y.value().at4(n, c, h, w);
    mean /= 48.0;
    CHECK(std::fabs(mean) < 1e-12);
  }
  expect_grad_ok("batch_norm",
                 [](Tape&, const std::vector<Var>& v) { return batch_norm(v[0], v[1], v[2]); },
                 {x, g, b}, 1e-6, 2e-4);
}

TEST_CASE("linear layer gradients") {
  RngStream rng = make_stream(21, "lin");
  expect_grad_ok("linear",
                 [](Tape&, const std::vector<Var>& v) { return linear(v[0], v[1], v[2]); },
                 {random_tensor({4, 3}, rng), random_tensor({3, 5}, rng), random_tensor({5}, rng)});
}

TEST_CASE("softmax cross entropy: uniform logits give ln(K)") {
  Tape tape;
  Var logits = tape.constant(Tensor::zeros({3, 10}));
  Var loss = softmax_cross_entropy(logits, {0, 5, 9});
  CHECK(loss.value().scalar_value() == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("softmax cross entropy gradients") {
  RngStream rng = make_stream(22, "ce");
  expect_grad_ok("softmax_cross_entropy",
                 [](Tape&, const std::vector<Var>& v) {
                   return softmax_cross_entropy(v[0], {2, 0, 1, 3});
                 },
                 {random_tensor({4, 5}, rng, -2.0, 2.0)});
}
