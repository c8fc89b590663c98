#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "nmc/error.hpp"

namespace nmc {

// A matrix value mapped into [-1, 1]: v -> (v - mu) / (mu - alpha) with
// mu = (alpha + beta) / 2. This is the range the cosine head produces.
struct ScaledValue {
  double value = 0.0;
};

inline double rating_midpoint(double alpha, double beta) {
  return 0.5 * (alpha + beta);
}

inline ScaledValue scale_rating(double value, double alpha, double beta) {
  if (value < alpha || value > beta)
    throw config_error("rating " + std::to_string(value) + " outside [" +
                       std::to_string(alpha) + ", " + std::to_string(beta) + "]");
  double mu = rating_midpoint(alpha, beta);
  return {(value - mu) / (mu - alpha)};
}

inline double unscale_rating(ScaledValue s, double alpha, double beta) {
  double mu = rating_midpoint(alpha, beta);
  return s.value * (mu - alpha) + mu;
}

struct RatingEntry {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  double value = 0.0;
};

// A partially observed rating matrix as a coordinate list. Row/column
// indices are contiguous and 0-based; the raw IDs they were re-indexed
// from are kept alongside. Immutable once built (finalize() freezes the
// per-row/per-column entry indexes).
class SparseRatings {
 public:
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<RatingEntry> entries;
  double alpha = 1.0;
  double beta = 5.0;
  std::vector<std::string> row_ids;  // raw ID at each row index (may be empty)
  std::vector<std::string> col_ids;

  // Builds the per-row and per-column entry indexes and validates bounds,
  // value range, and (row, col) uniqueness.
  void finalize() {
    if (alpha >= beta) throw config_error("rating bounds need alpha < beta");
    row_start_.assign(n_rows + 1, 0);
    col_start_.assign(n_cols + 1, 0);
    for (const auto& e : entries) {
      if (e.row >= n_rows || e.col >= n_cols)
        throw config_error("rating entry index out of bounds");
      if (e.value < alpha || e.value > beta)
        throw config_error("rating value " + std::to_string(e.value) +
                           " outside [" + std::to_string(alpha) + ", " +
                           std::to_string(beta) + "]");
      ++row_start_[e.row + 1];
      ++col_start_[e.col + 1];
    }
    for (std::size_t i = 1; i <= n_rows; ++i) row_start_[i] += row_start_[i - 1];
    for (std::size_t j = 1; j <= n_cols; ++j) col_start_[j] += col_start_[j - 1];
    row_entry_.resize(entries.size());
    col_entry_.resize(entries.size());
    std::vector<std::uint32_t> rfill(row_start_.begin(), row_start_.end() - 1);
    std::vector<std::uint32_t> cfill(col_start_.begin(), col_start_.end() - 1);
    for (std::uint32_t k = 0; k < entries.size(); ++k) {
      row_entry_[rfill[entries[k].row]++] = k;
      col_entry_[cfill[entries[k].col]++] = k;
    }
    for (std::size_t i = 0; i < n_rows; ++i) {
      auto [lo, hi] = row_range_bounds(i);
      std::vector<bool> seen;  // duplicate check per row over its columns
      for (std::uint32_t k = lo; k < hi; ++k) {
        std::uint32_t c = entries[row_entry_[k]].col;
        if (seen.size() <= c) seen.resize(c + 1, false);
        if (seen[c])
          throw parse_error("duplicate entry at row " + std::to_string(i) +
                            ", col " + std::to_string(c));
        seen[c] = true;
      }
    }
  }

  // Entry indices of one row (into entries).
  std::pair<const std::uint32_t*, const std::uint32_t*> row_range(
      std::size_t row) const {
    auto [lo, hi] = row_range_bounds(row);
    return {row_entry_.data() + lo, row_entry_.data() + hi};
  }
  std::pair<const std::uint32_t*, const std::uint32_t*> col_range(
      std::size_t col) const {
    return {col_entry_.data() + col_start_[col],
            col_entry_.data() + col_start_[col + 1]};
  }

 private:
  std::pair<std::uint32_t, std::uint32_t> row_range_bounds(
      std::size_t row) const {
    return {row_start_[row], row_start_[row + 1]};
  }

  std::vector<std::uint32_t> row_start_, col_start_;
  std::vector<std::uint32_t> row_entry_, col_entry_;
};

enum class RatingsFormat { movielens_dat, csv };

inline RatingsFormat ratings_format_from_name(const std::string& name) {
  if (name == "movielens-dat") return RatingsFormat::movielens_dat;
  if (name == "csv") return RatingsFormat::csv;
  throw config_error("unknown ratings format '" + name +
                     "' (expected movielens-dat or csv)");
}

// Guesses from the file extension; ".dat" means MovieLens, anything else CSV.
inline RatingsFormat ratings_format_for_path(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".dat") == 0)
    return RatingsFormat::movielens_dat;
  return RatingsFormat::csv;
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line,
                                             const std::string& sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = line.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    while (used < s.size() && (s[used] == ' ' || s[used] == '\r')) ++used;
    return used == s.size() && !s.empty();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace detail

// Reads user/item/rating triples and re-indexes the raw IDs to contiguous
// 0-based indices in order of first appearance. MovieLens .dat lines are
// "UserID::MovieID::Rating::Timestamp"; CSV lines are
// "user,item,rating[,timestamp]" with an optional header row.
inline SparseRatings load_ratings(const std::string& path, RatingsFormat fmt,
                                  double alpha = 1.0, double beta = 5.0) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open ratings file: " + path);
  if (alpha >= beta) throw config_error("rating bounds need alpha < beta");

  SparseRatings data;
  data.alpha = alpha;
  data.beta = beta;
  std::unordered_map<std::string, std::uint32_t> row_index, col_index;
  std::unordered_map<std::uint64_t, std::size_t> seen_pairs;  // -> line no
  const std::string sep = fmt == RatingsFormat::movielens_dat ? "::" : ",";

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = detail::split_fields(line, sep);
    if (fields.size() < 3)
      throw parse_error(path + ":" + std::to_string(line_no) +
                        ": expected at least 3 fields, got " +
                        std::to_string(fields.size()));
    double rating = 0.0;
    if (!detail::parse_double(fields[2], rating)) {
      // A CSV header is allowed once, before any data row.
      if (fmt == RatingsFormat::csv && data.entries.empty() &&
          row_index.empty())
        continue;
      throw parse_error(path + ":" + std::to_string(line_no) +
                        ": rating field '" + fields[2] + "' is not a number");
    }
    if (rating < alpha || rating > beta)
      throw parse_error(path + ":" + std::to_string(line_no) + ": rating " +
                        fields[2] + " outside declared scale [" +
                        std::to_string(alpha) + ", " + std::to_string(beta) +
                        "]");
    auto row_it = row_index.try_emplace(
        fields[0], static_cast<std::uint32_t>(row_index.size()));
    auto col_it = col_index.try_emplace(
        fields[1], static_cast<std::uint32_t>(col_index.size()));
    if (row_it.second) data.row_ids.push_back(fields[0]);
    if (col_it.second) data.col_ids.push_back(fields[1]);
    std::uint64_t key = (static_cast<std::uint64_t>(row_it.first->second) << 32) |
                        col_it.first->second;
    auto dup = seen_pairs.try_emplace(key, line_no);
    if (!dup.second)
      throw parse_error(path + ":" + std::to_string(line_no) +
                        ": duplicate (user, item) pair, first seen at line " +
                        std::to_string(dup.first->second));
    data.entries.push_back(
        {row_it.first->second, col_it.first->second, rating});
  }
  if (data.entries.empty())
    throw parse_error(path + ": no rating entries found");
  data.n_rows = row_index.size();
  data.n_cols = col_index.size();
  data.finalize();  // throws on duplicate (user, item) pairs
  return data;
}

}  // namespace nmc
