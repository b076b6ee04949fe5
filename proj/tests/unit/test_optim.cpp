#include <doctest.h>

#include <cmath>

#include "bbkd/optim.hpp"
#include "test_support.hpp"

using namespace bbkd;
using bbkd::testing::error_kind_of;
using bbkd::testing::random_tensor;

TEST_CASE("adam with zero gradients leaves parameters and moments unchanged") {
  Rng rng(1);
  ParamMap params{{"w", random_tensor(rng, {3, 3})}, {"b", random_tensor(rng, {3})}};
  const ParamMap before = params;
  GradientMap grads{{"w", Tensor({3, 3})}, {"b", Tensor({3})}};
  AdamState state;
  adam_step(params, grads, state, {0.01});
  adam_step(params, grads, state, {0.01});
  CHECK(params == before);
  CHECK(state.step == 2);
  CHECK(state.m.at("w") == Tensor({3, 3}));
  CHECK(state.v.at("b") == Tensor({3}));
}

TEST_CASE("first adam step moves by lr * g / (|g| + eps)") {
  // Step 1: m = (1-b1) g, v = (1-b2) g^2, so the bias-corrected ratio is
  // g / (|g| + eps).
  for (double g : {0.5, -3.0, 1e-3}) {
    ParamMap params{{"x", Tensor::scalar(1.0)}};
    AdamState state;
    adam_step(params, {{"x", Tensor::scalar(g)}}, state, {0.01, 0.9, 0.999, 1e-8});
    const double expected = 1.0 - 0.01 * g / (std::abs(g) + 1e-8);
    CHECK(params.at("x").item() == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(1.0 - params.at("x").item()) == doctest::Approx(0.01).epsilon(1e-4));
  }
}

TEST_CASE("adam is deterministic") {
  auto run = [] {
    Rng rng(9);
    ParamMap params{{"w", random_tensor(rng, {4, 2})}};
    AdamState state;
    for (int i = 0; i < 20; ++i) adam_step(params, {{"w", random_tensor(rng, {4, 2})}}, state, {0.05});
    return params;
  };
  CHECK(run() == run());
}

TEST_CASE("adam step counter increases by one per step") {
  ParamMap params{{"x", Tensor::scalar(0.0)}};
  AdamState state;
  for (std::uint64_t i = 1; i <= 5; ++i) {
    adam_step(params, {{"x", Tensor::scalar(1.0)}}, state);
    CHECK(state.step == i);
  }
}

TEST_CASE("adam rejects shape mismatches and missing gradients") {
  ParamMap params{{"w", Tensor({2, 2})}};
  AdamState state;
  CHECK(error_kind_of([&] { adam_step(params, {{"w", Tensor({4})}}, state); }) == ErrorKind::ShapeMismatch);
  CHECK(error_kind_of([&] { adam_step(params, {}, state); }) == ErrorKind::ShapeMismatch);
  CHECK(error_kind_of([&] { adam_step(params, {{"w", Tensor({2, 2})}}, state, {0.0}); }) ==
        ErrorKind::InvalidArgument);
  CHECK(state.step == 0);
}
