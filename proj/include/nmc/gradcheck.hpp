#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "nmc/layers.hpp"
#include "nmc/model.hpp"
#include "nmc/rng.hpp"
#include "nmc/tensor.hpp"

namespace nmc {

// |a - n| / max(1e-8, |a| + |n|), with differences below central-difference
// measurement noise treated as exact. Coordinates whose true gradient is
// structurally zero (a bias feeding batch norm) read as ~1e-12 FD noise
// against a ~1e-16 analytic value; no real defect produces a discrepancy
// anywhere near 1e-8.
inline double grad_rel_err(double analytic, double numeric) {
  double diff = std::abs(analytic - numeric);
  if (diff <= 1e-8) return 0.0;
  return diff / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

// Central difference of a scalar function w.r.t. one coordinate.
template <class F>
double central_diff(F&& f, double& coord, double h) {
  double orig = coord;
  coord = orig + h;
  double fp = f();
  coord = orig - h;
  double fm = f();
  coord = orig;
  return (fp - fm) / (2.0 * h);
}

// Checks one layer's backward pass against central differences: the scalar
// under test is sum(forward(x) * proj) for a fixed random projection, so its
// analytic input gradient is backward(proj) and the parameter gradients land
// in the layer's views. Covers every input and parameter coordinate; returns
// the max relative error. Dropout must be inactive and batch-norm mode fixed.
inline double grad_check_layer(Layer& layer, Tensor2 x, Mode mode, double h,
                               std::uint64_t proj_seed = 12345) {
  Rng unused(0);
  Tensor2 y0 = layer.forward(x, mode, unused);
  Tensor2 proj(y0.rows, y0.cols);
  Rng prng(proj_seed);
  for (double& v : proj.data) v = prng.normal();

  auto scalar = [&]() {
    Rng r(0);
    Tensor2 y = layer.forward(x, mode, r);
    double s = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * proj.data[i];
    return s;
  };

  scalar();  // prime caches with the unperturbed input
  layer.zero_grad();
  Tensor2 gx = layer.backward(proj);

  double worst = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    double num = central_diff(scalar, x.data[i], h);
    worst = std::max(worst, grad_rel_err(gx.data[i], num));
  }
  std::vector<ParamView> views;
  layer.collect_params(views);
  for (auto& v : views) {
    for (std::size_t i = 0; i < v.size; ++i) {
      double num = central_diff(scalar, v.value[i], h);
      worst = std::max(worst, grad_rel_err(v.grad[i], num));
    }
  }
  return worst;
}

// End-to-end check of the two-branch model through the cosine head and MSE
// loss: central differences over every trainable parameter and every input
// coordinate of the batch. The model must carry no active dropout (p = 0) so
// repeated forwards see the same function.
inline double grad_check_model(NmcModel& model, PairBatch& batch,
                               double h = 1e-5) {
  Rng rng(0);
  model.zero_grad();
  LossGrads lg = model.loss_and_grads(batch, rng);

  struct Saved {
    ParamView view;
    std::vector<double> grads;
  };
  std::vector<Saved> saved;
  for (auto& v : model.trainable_views())
    saved.push_back({v, std::vector<double>(v.grad, v.grad + v.size)});

  auto loss_only = [&]() {
    Rng r(0);
    return model.loss_and_grads(batch, r, /*backprop=*/false).loss;
  };

  double worst = 0.0;
  for (auto& s : saved)
    for (std::size_t i = 0; i < s.view.size; ++i) {
      double num = central_diff(loss_only, s.view.value[i], h);
      worst = std::max(worst, grad_rel_err(s.grads[i], num));
    }
  for (std::size_t i = 0; i < batch.rows.data.size(); ++i) {
    double num = central_diff(loss_only, batch.rows.data[i], h);
    worst = std::max(worst, grad_rel_err(lg.d_rows.data[i], num));
  }
  for (std::size_t i = 0; i < batch.cols.data.size(); ++i) {
    double num = central_diff(loss_only, batch.cols.data[i], h);
    worst = std::max(worst, grad_rel_err(lg.d_cols.data[i], num));
  }
  return worst;
}

}  // namespace nmc
