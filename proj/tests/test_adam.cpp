#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "nmc/adam.hpp"
#include "nmc/layers.hpp"

using namespace nmc;

namespace {

struct FlatParams {
  std::vector<double> value;
  std::vector<double> grad;

  FlatParams(std::size_t n, double v0) : value(n, v0), grad(n, 0.0) {}

  std::vector<ParamView> views() {
    return {{"p", value.data(), grad.data(), value.size()}};
  }
};

}  // namespace

TEST_CASE("adam first step moves by about lr against the gradient sign") {
  FlatParams p(3, 1.0);
  Adam adam(p.views(), {0.001, 0.9, 0.999, 1e-8});
  for (double& g : p.grad) g = 1.0;
  adam.step();
  for (double v : p.value) {
    CHECK(v < 1.0);
    CHECK(v == Catch::Approx(1.0 - 0.001).epsilon(1e-4));
  }
  CHECK(adam.step_count() == 1);
}

TEST_CASE("adam leaves parameters alone when gradients are zero") {
  FlatParams p(4, 2.5);
  Adam adam(p.views(), {});
  for (int i = 0; i < 10; ++i) adam.step();
  for (double v : p.value) CHECK(v == 2.5);
}

TEST_CASE("adam with lr = 0 never changes parameters") {
  FlatParams p(4, -1.25);
  Adam adam(p.views(), {0.0, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < p.grad.size(); ++j)
      p.grad[j] = static_cast<double>(j) - 1.5;
    adam.step();
  }
  for (double v : p.value) CHECK(v == -1.25);
}

TEST_CASE("adam is deterministic for a fixed gradient sequence") {
  auto run = [] {
    FlatParams p(8, 0.5);
    Adam adam(p.views(), {0.01, 0.9, 0.999, 1e-8});
    Rng rng(77);
    for (int i = 0; i < 25; ++i) {
      for (double& g : p.grad) g = rng.normal();
      adam.step();
    }
    return p.value;
  };
  CHECK(run() == run());
}

TEST_CASE("adam rejects non-finite gradients") {
  FlatParams p(2, 0.0);
  Adam adam(p.views(), {});
  p.grad[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam.step(), numeric_error);
}

TEST_CASE("adam rejects invalid hyperparameters") {
  FlatParams p(1, 0.0);
  CHECK_THROWS_AS(Adam(p.views(), {0.001, 1.0, 0.999, 1e-8}), config_error);
  CHECK_THROWS_AS(Adam(p.views(), {0.001, 0.9, 0.0, 1e-8}), config_error);
  CHECK_THROWS_AS(Adam(p.views(), {-0.1, 0.9, 0.999, 1e-8}), config_error);
}
