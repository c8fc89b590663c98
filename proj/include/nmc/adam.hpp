#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "nmc/error.hpp"
#include "nmc/layers.hpp"

namespace nmc {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a fixed list of parameter views. Moment
// buffers are laid out once at construction; the view list must stay stable
// for the optimizer's lifetime.
class Adam {
 public:
  Adam(std::vector<ParamView> params, AdamConfig cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    if (cfg_.lr < 0.0) throw config_error("adam: lr must be >= 0");
    if (cfg_.beta1 <= 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 <= 0.0 ||
        cfg_.beta2 >= 1.0)
      throw config_error("adam: betas must be in (0, 1)");
    std::size_t total = 0;
    for (const auto& p : params_) total += p.size;
    m_.assign(total, 0.0);
    v_.assign(total, 0.0);
  }

  // One update from the gradients currently held in the views.
  void step() {
    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    std::size_t off = 0;
    for (const auto& p : params_) {
      for (std::size_t i = 0; i < p.size; ++i) {
        double g = p.grad[i];
        if (!std::isfinite(g))
          throw numeric_error("adam: non-finite gradient in " + p.name);
        double& m = m_[off + i];
        double& v = v_[off + i];
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
        double mhat = m / bc1;
        double vhat = v / bc2;
        p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
      off += p.size;
    }
  }

  std::size_t step_count() const { return step_; }

 private:
  std::vector<ParamView> params_;
  AdamConfig cfg_;
  std::size_t step_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace nmc
