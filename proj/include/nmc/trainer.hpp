#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "nmc/adam.hpp"
#include "nmc/error.hpp"
#include "nmc/evaluator.hpp"
#include "nmc/model.hpp"
#include "nmc/ratings.hpp"
#include "nmc/rng.hpp"
#include "nmc/split.hpp"

namespace nmc {

struct TrainConfig {
  std::size_t batch_size = 512;
  std::size_t max_epochs = 200;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double val_frac = 0.05;  // share of area-(I) training entries held for validation
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  std::string checkpoint_path;  // best-so-far checkpoint, written when non-empty
  bool verbose = false;

  void validate() const {
    if (batch_size < 2) throw config_error("train: batch_size must be >= 2");
    if (val_frac < 0.0 || val_frac >= 0.5)
      throw config_error("train: val_frac must be in [0, 0.5)");
    if (patience < 1) throw config_error("train: patience must be >= 1");
    if (max_epochs < 1) throw config_error("train: max_epochs must be >= 1");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;       // 1-based
  double train_loss = 0.0;     // mean scaled-domain MSE, batch-size weighted
  double val_rmse = 0.0;       // rating-scale; NaN when no validation split
  double wall_time_s = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write history file: " + path);
    out << "epoch,train_loss,val_rmse,wall_time_s\n";
    char buf[96];
    for (const auto& e : epochs) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.3f\n", e.epoch,
                    e.train_loss, e.val_rmse, e.wall_time_s);
      out << buf;
    }
    if (!out) throw io_error("failed while writing history file: " + path);
  }
};

// Seeded shuffle, then contiguous chunks of batch_size. A trailing chunk of
// size 1 is dropped (batch norm needs two samples); larger remainders stay.
inline std::vector<std::vector<std::uint32_t>> make_batches(
    std::vector<std::uint32_t> order, std::size_t batch_size, Rng& rng) {
  if (batch_size < 2) throw config_error("make_batches: batch_size must be >= 2");
  rng.shuffle(order);
  std::vector<std::vector<std::uint32_t>> batches;
  for (std::size_t lo = 0; lo < order.size(); lo += batch_size) {
    std::size_t hi = std::min(order.size(), lo + batch_size);
    if (hi - lo == 1) break;
    batches.emplace_back(order.begin() + lo, order.begin() + hi);
  }
  return batches;
}

// Seeded partition of Omega_tr (the observed entries of area (I)) into
// training and validation entry indices. Consumes one shuffle from rng.
struct TrainPlan {
  std::vector<std::uint32_t> train_entries;
  std::vector<std::uint32_t> val_entries;
};

inline TrainPlan make_train_plan(const AreaSplit& split, double val_frac,
                                 Rng& rng) {
  TrainPlan plan;
  for (std::uint32_t k = 0; k < split.assignment.size(); ++k)
    if (split.assignment[k].area == Area::I &&
        split.assignment[k].role == Role::observed)
      plan.train_entries.push_back(k);
  if (plan.train_entries.empty())
    throw config_error("train: no observed entries in area (I)");
  rng.shuffle(plan.train_entries);
  std::size_t n_val = round_half_up(
      val_frac * static_cast<double>(plan.train_entries.size()));
  if (n_val >= plan.train_entries.size())
    n_val = plan.train_entries.size() - 1;
  plan.val_entries.assign(plan.train_entries.begin(),
                          plan.train_entries.begin() + n_val);
  plan.train_entries.erase(plan.train_entries.begin(),
                           plan.train_entries.begin() + n_val);
  return plan;
}

// Mini-batch training over the observed entries of area (I). A seeded
// val_frac share of those entries is held out for validation and masked from
// every input vector, alongside all evaluation entries. Keeps the weights of
// the best-validation epoch and stops early after `patience` epochs without
// improvement.
inline TrainHistory train(NmcModel& model, const SparseRatings& data,
                          const AreaSplit& split, const TrainConfig& cfg) {
  cfg.validate();
  check_split_matches(data, split);
  if (model.row_config().input_len != split.m_I ||
      model.col_config().input_len != split.n_I)
    throw config_error(
        "model input lengths do not match the split's (m_I, n_I)");

  Rng rng(cfg.seed);
  TrainPlan plan = make_train_plan(split, cfg.val_frac, rng);
  std::vector<std::uint32_t>& train_entries = plan.train_entries;
  std::vector<std::uint32_t>& val_entries = plan.val_entries;

  // Inputs during training must not see evaluation or validation targets.
  ExcludeMask mask = heldout_mask(split);
  for (std::uint32_t k : val_entries) mask[k] = 1;

  Adam adam(model.trainable_views(), {cfg.lr, cfg.beta1, cfg.beta2, cfg.eps});

  auto validation_rmse = [&]() {
    if (val_entries.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> residuals(val_entries.size());
    for (std::size_t i = 0; i < val_entries.size(); ++i) {
      const RatingEntry& e = data.entries[val_entries[i]];
      residuals[i] = model.predict(data, split, e.row, e.col, mask) - e.value;
    }
    return rmse(residuals);
  };

  TrainHistory history;
  std::vector<double> best_weights = model.snapshot();
  double best_score = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    auto batches = make_batches(train_entries, cfg.batch_size, rng);
    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    for (const auto& batch : batches) {
      std::size_t b = batch.size();
      PairBatch pb;
      pb.rows = Tensor2(b, split.m_I);
      pb.cols = Tensor2(b, split.n_I);
      pb.targets.resize(b);
      for (std::size_t i = 0; i < b; ++i) {
        const RatingEntry& e = data.entries[batch[i]];
        row_input_into(data, split, e.row, mask, &pb.rows.data[i * split.m_I]);
        col_input_into(data, split, e.col, mask, &pb.cols.data[i * split.n_I]);
        pb.targets[i] = scale_rating(e.value, data.alpha, data.beta).value;
      }
      model.zero_grad();
      LossGrads lg = model.loss_and_grads(pb, rng);
      if (!std::isfinite(lg.loss))
        throw numeric_error("train: loss diverged at epoch " +
                            std::to_string(epoch));
      try {
        adam.step();
      } catch (const numeric_error& e) {
        throw numeric_error("train: diverged at epoch " +
                            std::to_string(epoch) + " (" + e.what() + ")");
      }
      loss_sum += lg.loss * static_cast<double>(b);
      loss_n += b;
    }
    double train_loss = loss_n > 0 ? loss_sum / static_cast<double>(loss_n) : 0.0;
    double val = validation_rmse();

    double score = val_entries.empty() ? train_loss : val;
    if (score < best_score) {
      best_score = score;
      best_weights = model.snapshot();
      epochs_since_best = 0;
      if (!cfg.checkpoint_path.empty()) save_model(model, cfg.checkpoint_path);
    } else {
      ++epochs_since_best;
    }

    auto t1 = std::chrono::steady_clock::now();
    double secs = std::chrono::duration<double>(t1 - t0).count();
    history.epochs.push_back({epoch, train_loss, val, secs});
    if (cfg.verbose) {
      std::printf("epoch %4zu  train_loss %.6f  val_rmse %.4f  (%.2fs)\n",
                  epoch, train_loss, val, secs);
      std::fflush(stdout);
    }

    if (epochs_since_best >= cfg.patience) break;
  }

  model.restore(best_weights);
  return history;
}

}  // namespace nmc
