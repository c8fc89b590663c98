#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nmc/error.hpp"
#include "nmc/model.hpp"
#include "nmc/ratings.hpp"
#include "nmc/rng.hpp"
#include "nmc/split.hpp"

namespace nmc {

// Index-tied reference predictors. They are fit on the observed entries of
// area (I) using permuted positions as user/item indices, so they can only
// carry per-index information inside that area; outside it they fall back to
// whatever bias terms still apply. This is the contrast the extendability
// protocol measures the neural model against.

// The observed area-(I) entries in permuted coordinates.
struct BaselineTrainSet {
  std::vector<std::uint32_t> user;  // permuted row position, < n_I
  std::vector<std::uint32_t> item;  // permuted col position, < m_I
  std::vector<double> value;
  std::size_t n_users = 0;
  std::size_t n_items = 0;
};

inline BaselineTrainSet baseline_train_set(const SparseRatings& data,
                                           const AreaSplit& split) {
  check_split_matches(data, split);
  BaselineTrainSet ts;
  ts.n_users = split.n_I;
  ts.n_items = split.m_I;
  for (std::uint32_t k = 0; k < split.assignment.size(); ++k) {
    if (split.assignment[k].area != Area::I ||
        split.assignment[k].role != Role::observed)
      continue;
    const RatingEntry& e = data.entries[k];
    ts.user.push_back(split.row_pos[e.row]);
    ts.item.push_back(split.col_pos[e.col]);
    ts.value.push_back(e.value);
  }
  if (ts.value.empty())
    throw config_error("baseline: no observed entries in area (I)");
  return ts;
}

// Predicts the global training mean everywhere.
class MeanBaseline {
 public:
  explicit MeanBaseline(const BaselineTrainSet& ts) {
    double s = 0.0;
    for (double v : ts.value) s += v;
    mu_ = s / static_cast<double>(ts.value.size());
  }

  double predict(std::size_t, std::size_t) const { return mu_; }
  double mu() const { return mu_; }

 private:
  double mu_ = 0.0;
};

// mu + b_user + b_item with biases fit by regularized alternating means.
// Indices outside area (I) contribute bias 0.
class BiasBaseline {
 public:
  BiasBaseline(const BaselineTrainSet& ts, double reg, std::size_t sweeps = 20)
      : mu_(MeanBaseline(ts).mu()),
        b_user_(ts.n_users, 0.0), b_item_(ts.n_items, 0.0) {
    if (reg < 0.0) throw config_error("bias baseline: reg must be >= 0");
    std::vector<double> sum(std::max(ts.n_users, ts.n_items));
    std::vector<std::size_t> cnt(sum.size());
    for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
      std::fill(sum.begin(), sum.end(), 0.0);
      std::fill(cnt.begin(), cnt.end(), 0);
      for (std::size_t k = 0; k < ts.value.size(); ++k) {
        sum[ts.user[k]] += ts.value[k] - mu_ - b_item_[ts.item[k]];
        ++cnt[ts.user[k]];
      }
      for (std::size_t u = 0; u < ts.n_users; ++u)
        b_user_[u] = cnt[u] ? sum[u] / (reg + static_cast<double>(cnt[u])) : 0.0;
      std::fill(sum.begin(), sum.end(), 0.0);
      std::fill(cnt.begin(), cnt.end(), 0);
      for (std::size_t k = 0; k < ts.value.size(); ++k) {
        sum[ts.item[k]] += ts.value[k] - mu_ - b_user_[ts.user[k]];
        ++cnt[ts.item[k]];
      }
      for (std::size_t i = 0; i < ts.n_items; ++i)
        b_item_[i] = cnt[i] ? sum[i] / (reg + static_cast<double>(cnt[i])) : 0.0;
    }
  }

  // (user_pos, item_pos) in permuted coordinates; out-of-area indices get
  // zero bias.
  double predict(std::size_t user_pos, std::size_t item_pos) const {
    double bu = user_pos < b_user_.size() ? b_user_[user_pos] : 0.0;
    double bi = item_pos < b_item_.size() ? b_item_[item_pos] : 0.0;
    return mu_ + bu + bi;
  }

  double mu() const { return mu_; }

 private:
  double mu_;
  std::vector<double> b_user_, b_item_;
};

struct MfConfig {
  std::size_t rank = 3;
  double reg = 0.02;
  double lr = 0.01;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  double init_sd = 0.1;
};

// Rank-r factorization mu + b_u + b_i + P_u . Q_i fit by SGD on squared
// error with L2 regularization.
class MfModel {
 public:
  MfModel(const BaselineTrainSet& ts, const MfConfig& cfg)
      : rank_(cfg.rank), reg_(cfg.reg), mu_(MeanBaseline(ts).mu()),
        p_(ts.n_users * cfg.rank), q_(ts.n_items * cfg.rank),
        b_user_(ts.n_users, 0.0), b_item_(ts.n_items, 0.0) {
    if (cfg.rank < 1) throw config_error("mf: rank must be >= 1");
    Rng rng(cfg.seed);
    for (double& v : p_) v = rng.normal(0.0, cfg.init_sd);
    for (double& v : q_) v = rng.normal(0.0, cfg.init_sd);

    std::vector<std::uint32_t> order(ts.value.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> pu_old(rank_);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      rng.shuffle(order);
      for (std::uint32_t k : order) {
        std::size_t u = ts.user[k], i = ts.item[k];
        double* pu = &p_[u * rank_];
        double* qi = &q_[i * rank_];
        double dot = 0.0;
        for (std::size_t f = 0; f < rank_; ++f) dot += pu[f] * qi[f];
        double err = ts.value[k] - (mu_ + b_user_[u] + b_item_[i] + dot);
        if (!std::isfinite(err))
          throw numeric_error("mf: training diverged at epoch " +
                              std::to_string(epoch + 1));
        b_user_[u] += cfg.lr * (err - reg_ * b_user_[u]);
        b_item_[i] += cfg.lr * (err - reg_ * b_item_[i]);
        std::copy(pu, pu + rank_, pu_old.begin());
        for (std::size_t f = 0; f < rank_; ++f) {
          pu[f] += cfg.lr * (err * qi[f] - reg_ * pu[f]);
          qi[f] += cfg.lr * (err * pu_old[f] - reg_ * qi[f]);
        }
      }
    }
  }

  // Factor term only inside area (I); bias terms wherever the index exists.
  double predict(std::size_t user_pos, std::size_t item_pos) const {
    double out = mu_;
    bool has_u = user_pos < b_user_.size();
    bool has_i = item_pos < b_item_.size();
    if (has_u) out += b_user_[user_pos];
    if (has_i) out += b_item_[item_pos];
    if (has_u && has_i) {
      const double* pu = &p_[user_pos * rank_];
      const double* qi = &q_[item_pos * rank_];
      for (std::size_t f = 0; f < rank_; ++f) out += pu[f] * qi[f];
    }
    return out;
  }

  // Training RMSE on the set the model was fit to.
  double train_rmse(const BaselineTrainSet& ts) const {
    double s = 0.0;
    for (std::size_t k = 0; k < ts.value.size(); ++k) {
      double d = ts.value[k] - predict(ts.user[k], ts.item[k]);
      s += d * d;
    }
    return std::sqrt(s / static_cast<double>(ts.value.size()));
  }

  double mu() const { return mu_; }

 private:
  std::size_t rank_;
  double reg_;
  double mu_;
  std::vector<double> p_, q_;
  std::vector<double> b_user_, b_item_;
};

// Cell-level predictor on original (row, col) indices, clipped to the rating
// scale, for use with evaluate_predictor.
template <class B>
std::function<double(std::size_t, std::size_t)> baseline_cell_predictor(
    const B& baseline, const SparseRatings& data, const AreaSplit& split) {
  return [&baseline, &data, &split](std::size_t row, std::size_t col) {
    double raw = baseline.predict(split.row_pos[row], split.col_pos[col]);
    return clip_rating(raw, data.alpha, data.beta);
  };
}

}  // namespace nmc
