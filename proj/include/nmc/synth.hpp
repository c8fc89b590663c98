#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "nmc/error.hpp"
#include "nmc/ratings.hpp"
#include "nmc/rng.hpp"
#include "nmc/split.hpp"

namespace nmc {

struct SynthSpec {
  std::size_t n_rows = 100;
  std::size_t n_cols = 120;
  std::size_t rank = 3;
  double density = 0.4;   // fraction of cells that get an entry
  double noise_sd = 0.0;  // Gaussian noise added before rescaling
  std::uint64_t seed = 0;
  double alpha = 1.0;
  double beta = 5.0;

  void validate() const {
    if (n_rows < 1 || n_cols < 1) throw config_error("synth: empty matrix");
    if (rank < 1) throw config_error("synth: rank must be >= 1");
    if (density <= 0.0 || density > 1.0)
      throw config_error("synth: density must be in (0, 1]");
    if (noise_sd < 0.0) throw config_error("synth: noise_sd must be >= 0");
    if (alpha >= beta) throw config_error("synth: need alpha < beta");
  }
};

// Low-rank synthetic ratings: samples factor matrices from a unit Gaussian,
// keeps a seeded round(density * n * m) subset of cells, optionally adds
// noise, and maps the observed values linearly onto [alpha, beta] so the
// extremes land exactly on the bounds.
inline SparseRatings make_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  std::vector<double> p(spec.n_rows * spec.rank), q(spec.n_cols * spec.rank);
  for (double& v : p) v = rng.normal();
  for (double& v : q) v = rng.normal();

  std::size_t total = spec.n_rows * spec.n_cols;
  std::size_t keep = round_half_up(spec.density * static_cast<double>(total));
  if (keep < 1) keep = 1;
  std::vector<std::uint64_t> cells(total);
  for (std::uint64_t i = 0; i < total; ++i) cells[i] = i;
  rng.shuffle(cells);
  cells.resize(keep);

  std::vector<double> raw(keep);
  double lo = 0.0, hi = 0.0;
  for (std::size_t k = 0; k < keep; ++k) {
    std::size_t i = cells[k] / spec.n_cols;
    std::size_t j = cells[k] % spec.n_cols;
    double v = 0.0;
    for (std::size_t f = 0; f < spec.rank; ++f)
      v += p[i * spec.rank + f] * q[j * spec.rank + f];
    if (spec.noise_sd > 0.0) v += rng.normal(0.0, spec.noise_sd);
    raw[k] = v;
    if (k == 0 || v < lo) lo = v;
    if (k == 0 || v > hi) hi = v;
  }

  SparseRatings data;
  data.n_rows = spec.n_rows;
  data.n_cols = spec.n_cols;
  data.alpha = spec.alpha;
  data.beta = spec.beta;
  double span = hi - lo;
  for (std::size_t k = 0; k < keep; ++k) {
    double v = span > 0.0
                   ? spec.alpha + (spec.beta - spec.alpha) * (raw[k] - lo) / span
                   : rating_midpoint(spec.alpha, spec.beta);
    data.entries.push_back({static_cast<std::uint32_t>(cells[k] / spec.n_cols),
                            static_cast<std::uint32_t>(cells[k] % spec.n_cols),
                            v});
  }
  data.finalize();
  return data;
}

// CSV dump in the loader's generic format (user,item,rating).
inline void write_ratings_csv(const SparseRatings& data,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write ratings file: " + path);
  out << "user,item,rating\n";
  char buf[64];
  for (const auto& e : data.entries) {
    std::snprintf(buf, sizeof buf, "%u,%u,%.17g\n", e.row, e.col, e.value);
    out << buf;
  }
  if (!out) throw io_error("failed while writing ratings file: " + path);
}

}  // namespace nmc
