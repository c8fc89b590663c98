#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nmc/error.hpp"
#include "nmc/ratings.hpp"
#include "nmc/rng.hpp"

namespace nmc {

// Area of a cell after permuting rows and columns:
//   I   seen row,   seen column   (training region)
//   II  unseen row, seen column
//   III seen row,   unseen column
//   IV  unseen row, unseen column
enum class Area : std::uint8_t { I = 1, II = 2, III = 3, IV = 4 };

inline const char* area_name(Area a) {
  switch (a) {
    case Area::I: return "I";
    case Area::II: return "II";
    case Area::III: return "III";
    case Area::IV: return "IV";
  }
  return "?";
}

enum class Role : std::uint8_t { heldout = 0, observed = 1 };

struct SplitSpec {
  double row_frac = 0.8;      // fraction of rows assigned to area (I)
  double col_frac = 0.8;      // fraction of columns assigned to area (I)
  double observe_frac = 0.9;  // per-area fraction of entries marked observed
  std::uint64_t seed = 0;

  void validate() const {
    auto in_open_unit = [](double f) { return f > 0.0 && f < 1.0; };
    if (!in_open_unit(row_frac) || !in_open_unit(col_frac) ||
        !in_open_unit(observe_frac))
      throw config_error("split fractions must lie strictly in (0, 1)");
  }
};

inline std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

struct EntryAssignment {
  Area area;
  Role role;
};

// Row/column permutations plus the per-entry area and observed/held-out role.
// assignment[k] describes data.entries[k] of the SparseRatings the split was
// built from.
struct AreaSplit {
  std::vector<std::uint32_t> row_perm;  // permuted position -> original row
  std::vector<std::uint32_t> col_perm;
  std::vector<std::uint32_t> row_pos;   // original row -> permuted position
  std::vector<std::uint32_t> col_pos;
  std::size_t n_I = 0;  // permuted rows < n_I are the seen rows
  std::size_t m_I = 0;
  std::uint64_t seed = 0;
  std::vector<EntryAssignment> assignment;

  Area cell_area(std::size_t row, std::size_t col) const {
    bool seen_row = row_pos[row] < n_I;
    bool seen_col = col_pos[col] < m_I;
    if (seen_row && seen_col) return Area::I;
    if (!seen_row && seen_col) return Area::II;
    if (seen_row && !seen_col) return Area::III;
    return Area::IV;
  }

  void rebuild_inverse() {
    row_pos.assign(row_perm.size(), 0);
    col_pos.assign(col_perm.size(), 0);
    for (std::uint32_t p = 0; p < row_perm.size(); ++p) row_pos[row_perm[p]] = p;
    for (std::uint32_t p = 0; p < col_perm.size(); ++p) col_pos[col_perm[p]] = p;
  }
};

// Shuffles rows and columns with the spec's seed, draws the area-(I)
// boundary at (round(row_frac*n), round(col_frac*m)), then within each area
// marks a seeded round(observe_frac * count) subset of entries observed and
// reserves the rest for evaluation.
inline AreaSplit make_split(const SparseRatings& data, const SplitSpec& spec) {
  spec.validate();
  if (data.entries.empty()) throw config_error("cannot split an empty matrix");
  if (spec.row_frac * static_cast<double>(data.n_rows) < 1.0 ||
      spec.col_frac * static_cast<double>(data.n_cols) < 1.0)
    throw config_error("area (I) would contain no rows or no columns");

  AreaSplit split;
  split.seed = spec.seed;
  Rng rng(spec.seed);

  split.row_perm.resize(data.n_rows);
  split.col_perm.resize(data.n_cols);
  std::iota(split.row_perm.begin(), split.row_perm.end(), 0);
  std::iota(split.col_perm.begin(), split.col_perm.end(), 0);
  rng.shuffle(split.row_perm);
  rng.shuffle(split.col_perm);
  split.rebuild_inverse();

  split.n_I = round_half_up(spec.row_frac * static_cast<double>(data.n_rows));
  split.m_I = round_half_up(spec.col_frac * static_cast<double>(data.n_cols));

  split.assignment.resize(data.entries.size());
  std::array<std::vector<std::uint32_t>, 4> per_area;
  for (std::uint32_t k = 0; k < data.entries.size(); ++k) {
    Area a = split.cell_area(data.entries[k].row, data.entries[k].col);
    split.assignment[k].area = a;
    split.assignment[k].role = Role::heldout;
    per_area[static_cast<std::size_t>(a) - 1].push_back(k);
  }
  for (auto& members : per_area) {
    rng.shuffle(members);
    std::size_t n_obs =
        round_half_up(spec.observe_frac * static_cast<double>(members.size()));
    for (std::size_t i = 0; i < n_obs; ++i)
      split.assignment[members[i]].role = Role::observed;
  }

  bool area1_has_observed = false;
  for (std::uint32_t k : per_area[0])
    if (split.assignment[k].role == Role::observed) {
      area1_has_observed = true;
      break;
    }
  if (!area1_has_observed)
    throw config_error("unusable split: area (I) has no observed entries");
  return split;
}

// Throws unless the split was built for a matrix of this shape and entry count.
inline void check_split_matches(const SparseRatings& data,
                                const AreaSplit& split) {
  if (split.row_perm.size() != data.n_rows ||
      split.col_perm.size() != data.n_cols ||
      split.assignment.size() != data.entries.size())
    throw config_error(
        "split does not match the ratings matrix (rows/cols/entries differ)");
}

// Exclusion mask over entry indices; empty means nothing excluded.
using ExcludeMask = std::vector<std::uint8_t>;

inline ExcludeMask heldout_mask(const AreaSplit& split) {
  ExcludeMask mask(split.assignment.size(), 0);
  for (std::size_t k = 0; k < split.assignment.size(); ++k)
    if (split.assignment[k].role == Role::heldout) mask[k] = 1;
  return mask;
}

// Model input for one row: the first m_I coordinates in permuted column
// order, holding scaled ratings where the row has a non-excluded entry and
// 0 elsewhere. Works for seen and unseen rows alike.
inline void row_input_into(const SparseRatings& data, const AreaSplit& split,
                           std::size_t row, const ExcludeMask& exclude,
                           double* out) {
  for (std::size_t p = 0; p < split.m_I; ++p) out[p] = 0.0;
  auto [lo, hi] = data.row_range(row);
  for (const std::uint32_t* k = lo; k != hi; ++k) {
    if (!exclude.empty() && exclude[*k]) continue;
    const RatingEntry& e = data.entries[*k];
    std::uint32_t p = split.col_pos[e.col];
    if (p < split.m_I)
      out[p] = scale_rating(e.value, data.alpha, data.beta).value;
  }
}

inline std::vector<double> row_input(const SparseRatings& data,
                                     const AreaSplit& split, std::size_t row,
                                     const ExcludeMask& exclude = {}) {
  std::vector<double> out(split.m_I);
  row_input_into(data, split, row, exclude, out.data());
  return out;
}

// Mirror of row_input for one column: first n_I coordinates in permuted row
// order.
inline void col_input_into(const SparseRatings& data, const AreaSplit& split,
                           std::size_t col, const ExcludeMask& exclude,
                           double* out) {
  for (std::size_t p = 0; p < split.n_I; ++p) out[p] = 0.0;
  auto [lo, hi] = data.col_range(col);
  for (const std::uint32_t* k = lo; k != hi; ++k) {
    if (!exclude.empty() && exclude[*k]) continue;
    const RatingEntry& e = data.entries[*k];
    std::uint32_t p = split.row_pos[e.row];
    if (p < split.n_I)
      out[p] = scale_rating(e.value, data.alpha, data.beta).value;
  }
}

inline std::vector<double> col_input(const SparseRatings& data,
                                     const AreaSplit& split, std::size_t col,
                                     const ExcludeMask& exclude = {}) {
  std::vector<double> out(split.n_I);
  col_input_into(data, split, col, exclude, out.data());
  return out;
}

// ---- NMC-SPLIT v1 file format -------------------------------------------
//
//   NMC-SPLIT v1
//   n_I
//   m_I
//   seed
//   n_rows
//   <n_rows row_perm values, one per line>
//   n_cols
//   <n_cols col_perm values, one per line>
//   n_entries
//   <one "row col area role" record per line, in entry order>

inline void save_split(const AreaSplit& split, const SparseRatings& data,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write split file: " + path);
  out << "NMC-SPLIT v1\n";
  out << split.n_I << "\n" << split.m_I << "\n" << split.seed << "\n";
  out << split.row_perm.size() << "\n";
  for (auto v : split.row_perm) out << v << "\n";
  out << split.col_perm.size() << "\n";
  for (auto v : split.col_perm) out << v << "\n";
  out << split.assignment.size() << "\n";
  for (std::size_t k = 0; k < split.assignment.size(); ++k) {
    const auto& e = data.entries[k];
    out << e.row << " " << e.col << " "
        << static_cast<int>(split.assignment[k].area) << " "
        << static_cast<int>(split.assignment[k].role) << "\n";
  }
  if (!out) throw io_error("failed while writing split file: " + path);
}

inline AreaSplit load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open split file: " + path);
  std::string header;
  if (!std::getline(in, header) || header != "NMC-SPLIT v1")
    throw parse_error(path + ": not an NMC-SPLIT v1 file");

  auto read_u64 = [&](const char* what) {
    std::uint64_t v;
    if (!(in >> v))
      throw parse_error(path + ": truncated split file (while reading " +
                        std::string(what) + ")");
    return v;
  };

  AreaSplit split;
  split.n_I = read_u64("n_I");
  split.m_I = read_u64("m_I");
  split.seed = read_u64("seed");
  std::size_t n_rows = read_u64("row count");
  split.row_perm.resize(n_rows);
  for (auto& v : split.row_perm) {
    std::uint64_t raw = read_u64("row_perm");
    if (raw >= n_rows) throw parse_error(path + ": row_perm index out of range");
    v = static_cast<std::uint32_t>(raw);
  }
  std::size_t n_cols = read_u64("column count");
  split.col_perm.resize(n_cols);
  for (auto& v : split.col_perm) {
    std::uint64_t raw = read_u64("col_perm");
    if (raw >= n_cols) throw parse_error(path + ": col_perm index out of range");
    v = static_cast<std::uint32_t>(raw);
  }
  std::size_t n_entries = read_u64("entry count");
  split.assignment.resize(n_entries);
  std::vector<std::uint32_t> entry_rows(n_entries), entry_cols(n_entries);
  for (std::size_t k = 0; k < n_entries; ++k) {
    std::uint64_t row = read_u64("entry row");
    std::uint64_t col = read_u64("entry col");
    std::uint64_t area = read_u64("entry area");
    std::uint64_t role = read_u64("entry role");
    if (row >= n_rows || col >= n_cols || area < 1 || area > 4 || role > 1)
      throw parse_error(path + ": invalid assignment record " +
                        std::to_string(k));
    entry_rows[k] = static_cast<std::uint32_t>(row);
    entry_cols[k] = static_cast<std::uint32_t>(col);
    split.assignment[k].area = static_cast<Area>(area);
    split.assignment[k].role = static_cast<Role>(role);
  }
  // Permutations must be bijections.
  std::vector<bool> seen_row(n_rows, false), seen_col(n_cols, false);
  for (auto v : split.row_perm) {
    if (seen_row[v]) throw parse_error(path + ": row_perm repeats index");
    seen_row[v] = true;
  }
  for (auto v : split.col_perm) {
    if (seen_col[v]) throw parse_error(path + ": col_perm repeats index");
    seen_col[v] = true;
  }
  if (split.n_I > n_rows || split.m_I > n_cols)
    throw parse_error(path + ": area (I) boundary exceeds matrix shape");

  split.rebuild_inverse();
  for (std::size_t k = 0; k < n_entries; ++k)
    if (split.cell_area(entry_rows[k], entry_cols[k]) !=
        split.assignment[k].area)
      throw parse_error(path + ": assignment record " + std::to_string(k) +
                        " disagrees with the stored permutations");
  return split;
}

}  // namespace nmc
