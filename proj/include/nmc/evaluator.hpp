#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "nmc/error.hpp"
#include "nmc/model.hpp"
#include "nmc/ratings.hpp"
#include "nmc/split.hpp"
#include "nmc/tensor.hpp"

namespace nmc {

inline double rmse(const std::vector<double>& residuals) {
  if (residuals.empty()) throw config_error("rmse: no residuals");
  double s = 0.0;
  for (double r : residuals) s += r * r;
  return std::sqrt(s / static_cast<double>(residuals.size()));
}

inline double mae(const std::vector<double>& residuals) {
  if (residuals.empty()) throw config_error("mae: no residuals");
  double s = 0.0;
  for (double r : residuals) s += std::abs(r);
  return s / static_cast<double>(residuals.size());
}

// Rating-scale RMSE/MAE over the held-out entries of each area. Areas with
// no held-out entries report count 0 and NaN metrics.
struct AreaMetrics {
  struct One {
    double rmse = std::numeric_limits<double>::quiet_NaN();
    double mae = std::numeric_limits<double>::quiet_NaN();
    std::size_t count = 0;
  };
  std::array<One, 4> per_area;

  One& operator[](Area a) { return per_area[static_cast<std::size_t>(a) - 1]; }
  const One& operator[](Area a) const {
    return per_area[static_cast<std::size_t>(a) - 1];
  }

  void write_csv(std::ostream& out) const {
    out << "area,rmse,mae,count\n";
    static const Area order[4] = {Area::I, Area::II, Area::III, Area::IV};
    char buf[64];
    for (Area a : order) {
      const One& m = (*this)[a];
      out << area_name(a) << ",";
      if (m.count > 0) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", m.rmse, m.mae);
        out << buf;
      } else {
        out << ",";
      }
      out << "," << m.count << "\n";
    }
  }

  void print_table(std::ostream& out) const {
    out << "area      rmse      mae    count\n";
    static const Area order[4] = {Area::I, Area::II, Area::III, Area::IV};
    char buf[96];
    for (Area a : order) {
      const One& m = (*this)[a];
      if (m.count > 0)
        std::snprintf(buf, sizeof buf, "%-4s %9.4f %9.4f %8zu\n", area_name(a),
                      m.rmse, m.mae, m.count);
      else
        std::snprintf(buf, sizeof buf, "%-4s %9s %9s %8zu\n", area_name(a),
                      "-", "-", m.count);
      out << buf;
    }
  }
};

// Evaluates any cell-level predictor over every held-out entry, grouping
// residuals by area. The predictor sees (row, col) on the original index
// space and must already honor the evaluation exclusion rules.
inline AreaMetrics evaluate_predictor(
    const std::function<double(std::size_t, std::size_t)>& predict,
    const SparseRatings& data, const AreaSplit& split) {
  check_split_matches(data, split);
  std::vector<std::uint32_t> eval_entries;
  for (std::uint32_t k = 0; k < split.assignment.size(); ++k)
    if (split.assignment[k].role == Role::heldout) eval_entries.push_back(k);

  std::vector<double> residual(eval_entries.size());
  parallel_for(eval_entries.size(), [&](std::size_t i) {
    const RatingEntry& e = data.entries[eval_entries[i]];
    residual[i] = predict(e.row, e.col) - e.value;
  });

  std::array<std::vector<double>, 4> by_area;
  for (std::size_t i = 0; i < eval_entries.size(); ++i) {
    Area a = split.assignment[eval_entries[i]].area;
    by_area[static_cast<std::size_t>(a) - 1].push_back(residual[i]);
  }

  AreaMetrics metrics;
  for (std::size_t idx = 0; idx < 4; ++idx) {
    auto& m = metrics.per_area[idx];
    m.count = by_area[idx].size();
    if (m.count > 0) {
      m.rmse = rmse(by_area[idx]);
      m.mae = mae(by_area[idx]);
    }
  }
  return metrics;
}

// Protocol evaluation of the model: every held-out entry of every area is
// predicted with all held-out entries masked out of the input vectors.
// Layer forward passes cache activations, so parallel runs give each worker
// its own restored copy of the model; per-entry arithmetic is unchanged and
// results match the sequential run exactly.
inline AreaMetrics evaluate(NmcModel& model, const SparseRatings& data,
                            const AreaSplit& split) {
  if (model.row_config().input_len != split.m_I ||
      model.col_config().input_len != split.n_I)
    throw config_error(
        "model input lengths do not match the split's (m_I, n_I)");
  ExcludeMask mask = heldout_mask(split);
  if (num_threads() <= 1)
    return evaluate_predictor(
        [&](std::size_t row, std::size_t col) {
          return model.predict(data, split, row, col, mask);
        },
        data, split);

  check_split_matches(data, split);
  std::vector<std::uint32_t> eval_entries;
  for (std::uint32_t k = 0; k < split.assignment.size(); ++k)
    if (split.assignment[k].role == Role::heldout) eval_entries.push_back(k);
  std::size_t n = eval_entries.size();
  std::size_t nw = std::min<std::size_t>(num_threads(), n > 0 ? n : 1);

  std::vector<double> snap = model.snapshot();
  std::vector<NmcModel> clones;
  clones.reserve(nw);
  for (std::size_t w = 0; w < nw; ++w) {
    clones.emplace_back(model.row_config(), model.col_config(), model.alpha(),
                        model.beta(), 0, model.norm_floor(),
                        model.bn_momentum(), model.bn_eps());
    clones.back().restore(snap);
  }

  std::vector<double> residual(n);
  std::vector<std::thread> pool;
  std::size_t chunk = nw > 0 ? (n + nw - 1) / nw : 0;
  for (std::size_t w = 0; w < nw; ++w) {
    std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, w, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) {
        const RatingEntry& e = data.entries[eval_entries[i]];
        residual[i] = clones[w].predict(data, split, e.row, e.col, mask) -
                      e.value;
      }
    });
  }
  for (auto& t : pool) t.join();

  std::array<std::vector<double>, 4> by_area;
  for (std::size_t i = 0; i < n; ++i) {
    Area a = split.assignment[eval_entries[i]].area;
    by_area[static_cast<std::size_t>(a) - 1].push_back(residual[i]);
  }
  AreaMetrics metrics;
  for (std::size_t idx = 0; idx < 4; ++idx) {
    auto& m = metrics.per_area[idx];
    m.count = by_area[idx].size();
    if (m.count > 0) {
      m.rmse = rmse(by_area[idx]);
      m.mae = mae(by_area[idx]);
    }
  }
  return metrics;
}

}  // namespace nmc
