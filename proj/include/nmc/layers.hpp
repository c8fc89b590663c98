#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "nmc/error.hpp"
#include "nmc/rng.hpp"
#include "nmc/tensor.hpp"

namespace nmc {

enum class Mode { train, infer };

// A named window onto one flat parameter (or running-statistics) array.
// Optimizers walk these; so do the checkpoint writer and the grad checker.
struct ParamView {
  std::string name;
  double* value = nullptr;
  double* grad = nullptr;  // null for non-trainable state
  std::size_t size = 0;
};

// He-normal weights: zero-mean Gaussian with stddev sqrt(2 / fan_in).
inline void he_init(std::vector<double>& w, std::size_t fan_in, Rng& rng) {
  double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (double& x : w) x = rng.normal(0.0, sd);
}

class Layer {
 public:
  virtual ~Layer() = default;

  // Forward over a batch; caches whatever backward needs.
  virtual Tensor2 forward(const Tensor2& x, Mode mode, Rng& rng) = 0;

  // Gradient of the loss w.r.t. this layer's input, given the gradient
  // w.r.t. its output. Accumulates parameter gradients.
  virtual Tensor2 backward(const Tensor2& grad_out) = 0;

  // Trainable parameters, in serialization order.
  virtual void collect_params(std::vector<ParamView>&) {}

  // Non-trainable state that still belongs in checkpoints (BN running stats).
  virtual void collect_state(std::vector<ParamView>&) {}

  virtual std::size_t output_len(std::size_t input_len) const = 0;

  void zero_grad() {
    std::vector<ParamView> views;
    collect_params(views);
    for (auto& v : views)
      for (std::size_t i = 0; i < v.size; ++i) v.grad[i] = 0.0;
  }
};

// y = x W^T + b, W is (out x in).
class DenseLayer : public Layer {
 public:
  DenseLayer(std::size_t in, std::size_t out, Rng& rng)
      : in_(in), out_(out), w_(out * in), b_(out, 0.0),
        gw_(out * in, 0.0), gb_(out, 0.0) {
    he_init(w_, in, rng);
  }

  Tensor2 forward(const Tensor2& x, Mode, Rng&) override {
    if (x.cols != in_)
      throw shape_error("dense: input has " + std::to_string(x.cols) +
                        " features, layer expects " + std::to_string(in_));
    x_ = x;
    Tensor2 y(x.rows, out_);
    parallel_for(x.rows, [&](std::size_t r) {
      const double* xr = &x.data[r * in_];
      double* yr = &y.data[r * out_];
      for (std::size_t o = 0; o < out_; ++o) {
        const double* wo = &w_[o * in_];
        double acc = b_[o];
        for (std::size_t i = 0; i < in_; ++i) acc += wo[i] * xr[i];
        yr[o] = acc;
      }
    });
    return y;
  }

  Tensor2 backward(const Tensor2& gy) override {
    if (gy.rows != x_.rows || gy.cols != out_)
      throw shape_error("dense backward: gradient shape mismatch");
    Tensor2 gx(x_.rows, in_);
    parallel_for(x_.rows, [&](std::size_t r) {
      const double* gr = &gy.data[r * out_];
      double* gxr = &gx.data[r * in_];
      for (std::size_t o = 0; o < out_; ++o) {
        const double* wo = &w_[o * in_];
        double g = gr[o];
        for (std::size_t i = 0; i < in_; ++i) gxr[i] += g * wo[i];
      }
    });
    parallel_for(out_, [&](std::size_t o) {
      double* gwo = &gw_[o * in_];
      double gbo = 0.0;
      for (std::size_t r = 0; r < x_.rows; ++r) {
        double g = gy.data[r * out_ + o];
        gbo += g;
        const double* xr = &x_.data[r * in_];
        for (std::size_t i = 0; i < in_; ++i) gwo[i] += g * xr[i];
      }
      gb_[o] += gbo;
    });
    return gx;
  }

  void collect_params(std::vector<ParamView>& out) override {
    out.push_back({"dense.W", w_.data(), gw_.data(), w_.size()});
    out.push_back({"dense.b", b_.data(), gb_.data(), b_.size()});
  }

  std::size_t output_len(std::size_t input_len) const override {
    if (input_len != in_) throw shape_error("dense: bad input length");
    return out_;
  }

  std::size_t in_size() const { return in_; }
  std::size_t out_size() const { return out_; }

 private:
  std::size_t in_, out_;
  std::vector<double> w_, b_, gw_, gb_;
  Tensor2 x_;
};

// Per-feature batch normalization with affine and running statistics.
// Train mode uses biased batch moments and updates the running averages;
// infer mode normalizes with the running averages only.
class BatchNormLayer : public Layer {
 public:
  BatchNormLayer(std::size_t features, double momentum = 0.1,
                 double epsilon = 1e-5)
      : n_(features), momentum_(momentum), eps_(epsilon),
        gamma_(features, 1.0), beta_(features, 0.0),
        run_mean_(features, 0.0), run_var_(features, 1.0),
        ggamma_(features, 0.0), gbeta_(features, 0.0) {
    if (epsilon <= 0.0) throw config_error("batchnorm: epsilon must be > 0");
    if (momentum <= 0.0 || momentum >= 1.0)
      throw config_error("batchnorm: momentum must be in (0,1)");
  }

  Tensor2 forward(const Tensor2& x, Mode mode, Rng&) override {
    if (x.cols != n_) throw shape_error("batchnorm: feature count mismatch");
    mode_ = mode;
    Tensor2 y(x.rows, n_);
    if (mode == Mode::train) {
      if (x.rows < 2)
        throw shape_error("batchnorm: train mode needs batch size >= 2, got " +
                          std::to_string(x.rows));
      double inv_n = 1.0 / static_cast<double>(x.rows);
      xhat_ = Tensor2(x.rows, n_);
      inv_std_.assign(n_, 0.0);
      for (std::size_t j = 0; j < n_; ++j) {
        double mean = 0.0;
        for (std::size_t r = 0; r < x.rows; ++r) mean += x(r, j);
        mean *= inv_n;
        double var = 0.0;
        for (std::size_t r = 0; r < x.rows; ++r) {
          double d = x(r, j) - mean;
          var += d * d;
        }
        var *= inv_n;
        double is = 1.0 / std::sqrt(var + eps_);
        inv_std_[j] = is;
        for (std::size_t r = 0; r < x.rows; ++r) {
          double xh = (x(r, j) - mean) * is;
          xhat_(r, j) = xh;
          y(r, j) = gamma_[j] * xh + beta_[j];
        }
        run_mean_[j] = (1.0 - momentum_) * run_mean_[j] + momentum_ * mean;
        run_var_[j] = (1.0 - momentum_) * run_var_[j] + momentum_ * var;
      }
    } else {
      xhat_ = Tensor2(x.rows, n_);
      for (std::size_t j = 0; j < n_; ++j) {
        double is = 1.0 / std::sqrt(run_var_[j] + eps_);
        for (std::size_t r = 0; r < x.rows; ++r) {
          double xh = (x(r, j) - run_mean_[j]) * is;
          xhat_(r, j) = xh;
          y(r, j) = gamma_[j] * xh + beta_[j];
        }
      }
    }
    return y;
  }

  Tensor2 backward(const Tensor2& gy) override {
    if (gy.rows != xhat_.rows || gy.cols != n_)
      throw shape_error("batchnorm backward: gradient shape mismatch");
    std::size_t nb = gy.rows;
    Tensor2 gx(nb, n_);
    if (mode_ == Mode::train) {
      double inv_n = 1.0 / static_cast<double>(nb);
      for (std::size_t j = 0; j < n_; ++j) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t r = 0; r < nb; ++r) {
          double g = gy(r, j);
          sum_g += g;
          sum_gx += g * xhat_(r, j);
        }
        ggamma_[j] += sum_gx;
        gbeta_[j] += sum_g;
        double k = gamma_[j] * inv_std_[j];
        for (std::size_t r = 0; r < nb; ++r) {
          gx(r, j) = k * (gy(r, j) - inv_n * sum_g -
                          xhat_(r, j) * inv_n * sum_gx);
        }
      }
    } else {
      for (std::size_t j = 0; j < n_; ++j) {
        double is = 1.0 / std::sqrt(run_var_[j] + eps_);
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t r = 0; r < nb; ++r) {
          double g = gy(r, j);
          sum_g += g;
          sum_gx += g * xhat_(r, j);
          gx(r, j) = g * gamma_[j] * is;
        }
        ggamma_[j] += sum_gx;
        gbeta_[j] += sum_g;
      }
    }
    return gx;
  }

  void collect_params(std::vector<ParamView>& out) override {
    out.push_back({"bn.gamma", gamma_.data(), ggamma_.data(), n_});
    out.push_back({"bn.beta", beta_.data(), gbeta_.data(), n_});
  }

  void collect_state(std::vector<ParamView>& out) override {
    out.push_back({"bn.run_mean", run_mean_.data(), nullptr, n_});
    out.push_back({"bn.run_var", run_var_.data(), nullptr, n_});
  }

  std::size_t output_len(std::size_t input_len) const override {
    if (input_len != n_) throw shape_error("batchnorm: bad input length");
    return n_;
  }

 private:
  std::size_t n_;
  double momentum_, eps_;
  std::vector<double> gamma_, beta_, run_mean_, run_var_, ggamma_, gbeta_;
  Tensor2 xhat_;
  std::vector<double> inv_std_;
  Mode mode_ = Mode::infer;
};

// Elementwise max(0, x). The subgradient at exactly 0 is taken as 0.
class ReluLayer : public Layer {
 public:
  Tensor2 forward(const Tensor2& x, Mode, Rng&) override {
    x_ = x;
    Tensor2 y = x;
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
  }

  Tensor2 backward(const Tensor2& gy) override {
    if (gy.rows != x_.rows || gy.cols != x_.cols)
      throw shape_error("relu backward: gradient shape mismatch");
    Tensor2 gx = gy;
    for (std::size_t i = 0; i < gx.data.size(); ++i)
      if (x_.data[i] <= 0.0) gx.data[i] = 0.0;
    return gx;
  }

  std::size_t output_len(std::size_t input_len) const override {
    return input_len;
  }

 private:
  Tensor2 x_;
};

// Inverted dropout: train mode zeroes each element with probability p and
// scales survivors by 1/(1-p); infer mode is the identity.
class DropoutLayer : public Layer {
 public:
  explicit DropoutLayer(double p) : p_(p) {
    if (p < 0.0 || p >= 1.0)
      throw config_error("dropout: p must be in [0, 1)");
  }

  Tensor2 forward(const Tensor2& x, Mode mode, Rng& rng) override {
    if (mode == Mode::infer || p_ == 0.0) {
      active_ = false;
      return x;
    }
    active_ = true;
    double keep_scale = 1.0 / (1.0 - p_);
    mask_ = Tensor2(x.rows, x.cols);
    Tensor2 y(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      double m = rng.bernoulli(p_) ? 0.0 : keep_scale;
      mask_.data[i] = m;
      y.data[i] = x.data[i] * m;
    }
    return y;
  }

  Tensor2 backward(const Tensor2& gy) override {
    if (!active_) return gy;
    if (gy.rows != mask_.rows || gy.cols != mask_.cols)
      throw shape_error("dropout backward: gradient shape mismatch");
    Tensor2 gx = gy;
    for (std::size_t i = 0; i < gx.data.size(); ++i)
      gx.data[i] *= mask_.data[i];
    return gx;
  }

  std::size_t output_len(std::size_t input_len) const override {
    return input_len;
  }

  double p() const { return p_; }
  // Mask applied by the last train-mode forward (values are 0 or 1/(1-p)).
  const Tensor2& last_mask() const { return mask_; }

 private:
  double p_;
  bool active_ = false;
  Tensor2 mask_;
};

// Valid (no padding) strided 1D convolution over single-channel signals.
// Output is flattened filter-major: y[f * L_out + t].
class Conv1dLayer : public Layer {
 public:
  Conv1dLayer(std::size_t filters, std::size_t kernel, std::size_t stride,
              Rng& rng)
      : f_(filters), k_(kernel), s_(stride),
        w_(filters * kernel), b_(filters, 0.0),
        gw_(filters * kernel, 0.0), gb_(filters, 0.0) {
    if (filters < 1 || kernel < 1 || stride < 1)
      throw config_error("conv1d: filters, kernel, stride must all be >= 1");
    he_init(w_, kernel, rng);
  }

  static std::size_t out_windows(std::size_t input_len, std::size_t kernel,
                                 std::size_t stride) {
    if (input_len < kernel)
      throw shape_error("conv1d: input length " + std::to_string(input_len) +
                        " shorter than kernel " + std::to_string(kernel));
    return (input_len - kernel) / stride + 1;
  }

  Tensor2 forward(const Tensor2& x, Mode, Rng&) override {
    x_ = x;
    lout_ = out_windows(x.cols, k_, s_);
    Tensor2 y(x.rows, f_ * lout_);
    parallel_for(x.rows, [&](std::size_t r) {
      const double* xr = &x.data[r * x.cols];
      double* yr = &y.data[r * f_ * lout_];
      for (std::size_t f = 0; f < f_; ++f) {
        const double* wf = &w_[f * k_];
        for (std::size_t t = 0; t < lout_; ++t) {
          double acc = b_[f];
          const double* xw = xr + t * s_;
          for (std::size_t u = 0; u < k_; ++u) acc += wf[u] * xw[u];
          yr[f * lout_ + t] = acc;
        }
      }
    });
    return y;
  }

  Tensor2 backward(const Tensor2& gy) override {
    if (gy.rows != x_.rows || gy.cols != f_ * lout_)
      throw shape_error("conv1d backward: gradient shape mismatch");
    Tensor2 gx(x_.rows, x_.cols);
    parallel_for(x_.rows, [&](std::size_t r) {
      const double* gr = &gy.data[r * f_ * lout_];
      double* gxr = &gx.data[r * x_.cols];
      for (std::size_t f = 0; f < f_; ++f) {
        const double* wf = &w_[f * k_];
        for (std::size_t t = 0; t < lout_; ++t) {
          double g = gr[f * lout_ + t];
          double* xw = gxr + t * s_;
          for (std::size_t u = 0; u < k_; ++u) xw[u] += g * wf[u];
        }
      }
    });
    parallel_for(f_, [&](std::size_t f) {
      double* gwf = &gw_[f * k_];
      double gbf = 0.0;
      for (std::size_t r = 0; r < x_.rows; ++r) {
        const double* xr = &x_.data[r * x_.cols];
        const double* gr = &gy.data[r * f_ * lout_];
        for (std::size_t t = 0; t < lout_; ++t) {
          double g = gr[f * lout_ + t];
          gbf += g;
          const double* xw = xr + t * s_;
          for (std::size_t u = 0; u < k_; ++u) gwf[u] += g * xw[u];
        }
      }
      gb_[f] += gbf;
    });
    return gx;
  }

  void collect_params(std::vector<ParamView>& out) override {
    out.push_back({"conv1d.W", w_.data(), gw_.data(), w_.size()});
    out.push_back({"conv1d.b", b_.data(), gb_.data(), b_.size()});
  }

  std::size_t output_len(std::size_t input_len) const override {
    return f_ * out_windows(input_len, k_, s_);
  }

  std::size_t filters() const { return f_; }
  std::size_t kernel() const { return k_; }
  std::size_t stride() const { return s_; }

 private:
  std::size_t f_, k_, s_;
  std::vector<double> w_, b_, gw_, gb_;
  Tensor2 x_;
  std::size_t lout_ = 0;
};

}  // namespace nmc
