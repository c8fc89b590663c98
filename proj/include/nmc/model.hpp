#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "nmc/adam.hpp"
#include "nmc/error.hpp"
#include "nmc/layers.hpp"
#include "nmc/ratings.hpp"
#include "nmc/rng.hpp"
#include "nmc/split.hpp"
#include "nmc/tensor.hpp"

namespace nmc {

// One strided conv summarization stage.
struct SummStage {
  std::size_t filters = 0;
  std::size_t kernel = 0;
  std::size_t stride = 0;
};

// Layer recipe for one embedding branch. fc_sizes lists every fully
// connected width including the final latent one; latent_dim must equal
// fc_sizes.back().
struct BranchConfig {
  std::size_t input_len = 0;
  std::vector<SummStage> summarization;
  std::vector<std::size_t> fc_sizes;
  std::size_t latent_dim = 0;
  double dropout_p = 0.0;

  // Throws config_error unless the recipe is buildable; returns the feature
  // count entering the fully connected stack.
  std::size_t validate() const {
    if (input_len < 1) throw config_error("branch: input_len must be >= 1");
    if (fc_sizes.empty()) throw config_error("branch: fc_sizes is empty");
    if (latent_dim < 1) throw config_error("branch: latent_dim must be >= 1");
    if (fc_sizes.back() != latent_dim)
      throw config_error("branch: last fc size (" +
                         std::to_string(fc_sizes.back()) +
                         ") must equal latent_dim (" +
                         std::to_string(latent_dim) + ")");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
      throw config_error("branch: dropout_p must be in [0, 1)");
    std::size_t len = input_len;
    for (const auto& s : summarization) {
      if (s.filters < 1 || s.kernel < 1 || s.stride < 1)
        throw config_error("branch: summarization stage fields must be >= 1");
      if (len < s.kernel)
        throw config_error("branch: summarization input length " +
                           std::to_string(len) + " shorter than kernel " +
                           std::to_string(s.kernel));
      len = s.filters * ((len - s.kernel) / s.stride + 1);
    }
    for (std::size_t w : fc_sizes)
      if (w < 1) throw config_error("branch: fc sizes must be >= 1");
    return len;
  }
};

// One embedding branch: conv/batchnorm/ReLU summarization stages, then a
// fully connected stack where every hidden layer carries batchnorm and ReLU,
// dropout follows all but the last hidden layer, and the final latent layer
// is linear.
class Branch {
 public:
  Branch() = default;

  Branch(const BranchConfig& cfg, double bn_momentum, double bn_eps, Rng& rng)
      : cfg_(cfg) {
    cfg.validate();
    std::size_t width = cfg.input_len;
    for (const auto& s : cfg.summarization) {
      auto conv =
          std::make_unique<Conv1dLayer>(s.filters, s.kernel, s.stride, rng);
      width = conv->output_len(width);
      layers_.push_back(std::move(conv));
      layers_.push_back(
          std::make_unique<BatchNormLayer>(width, bn_momentum, bn_eps));
      layers_.push_back(std::make_unique<ReluLayer>());
    }
    std::size_t n_fc = cfg.fc_sizes.size();
    for (std::size_t i = 0; i + 1 < n_fc; ++i) {
      layers_.push_back(
          std::make_unique<DenseLayer>(width, cfg.fc_sizes[i], rng));
      layers_.push_back(std::make_unique<BatchNormLayer>(cfg.fc_sizes[i],
                                                         bn_momentum, bn_eps));
      layers_.push_back(std::make_unique<ReluLayer>());
      if (i + 2 < n_fc)  // dropout after all but the last hidden layer
        layers_.push_back(std::make_unique<DropoutLayer>(cfg.dropout_p));
      width = cfg.fc_sizes[i];
    }
    layers_.push_back(std::make_unique<DenseLayer>(width, cfg.latent_dim, rng));
  }

  Tensor2 forward(const Tensor2& x, Mode mode, Rng& rng) {
    if (x.cols != cfg_.input_len)
      throw shape_error("branch: input length " + std::to_string(x.cols) +
                        " does not match configured " +
                        std::to_string(cfg_.input_len));
    Tensor2 cur = x;
    for (auto& l : layers_) cur = l->forward(cur, mode, rng);
    return cur;
  }

  Tensor2 backward(const Tensor2& grad_latent) {
    Tensor2 cur = grad_latent;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
      cur = (*it)->backward(cur);
    return cur;
  }

  void zero_grad() {
    for (auto& l : layers_) l->zero_grad();
  }

  // Trainable parameters followed by per-layer state, in layer order.
  void collect_all(std::vector<ParamView>& out) {
    for (auto& l : layers_) {
      l->collect_params(out);
      l->collect_state(out);
    }
  }

  void collect_trainable(std::vector<ParamView>& out) {
    for (auto& l : layers_) l->collect_params(out);
  }

  const BranchConfig& config() const { return cfg_; }

 private:
  BranchConfig cfg_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Cosine similarity with a zero-norm guard: when either vector's norm falls
// below norm_floor the head reports exactly 0, the scaled midpoint.
inline ScaledValue cosine_similarity(std::span<const double> u,
                                     std::span<const double> v,
                                     double norm_floor) {
  if (u.size() != v.size())
    throw shape_error("cosine: latent dimensions differ");
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  double nu = std::sqrt(uu), nv = std::sqrt(vv);
  if (nu < norm_floor || nv < norm_floor) return {0.0};
  return {uv / (nu * nv)};
}

inline double clip_rating(double v, double alpha, double beta) {
  return std::min(beta, std::max(alpha, v));
}

// A training mini-batch: row inputs, column inputs, and scaled targets,
// one per pair.
struct PairBatch {
  Tensor2 rows;  // B x m_I
  Tensor2 cols;  // B x n_I
  std::vector<double> targets;
};

struct LossGrads {
  double loss = 0.0;
  Tensor2 d_rows;  // gradient w.r.t. the row inputs
  Tensor2 d_cols;
};

// The two-branch latent factor model: row and column embedding stacks whose
// outputs meet in a cosine head, trained on scaled ratings.
class NmcModel {
 public:
  NmcModel() = default;

  NmcModel(const BranchConfig& row_cfg, const BranchConfig& col_cfg,
           double alpha, double beta, std::uint64_t seed,
           double norm_floor = 1e-8, double bn_momentum = 0.1,
           double bn_eps = 1e-5)
      : alpha_(alpha), beta_(beta), norm_floor_(norm_floor),
        bn_momentum_(bn_momentum), bn_eps_(bn_eps), seed_(seed) {
    if (row_cfg.latent_dim != col_cfg.latent_dim)
      throw config_error("branch latent dimensions differ: " +
                         std::to_string(row_cfg.latent_dim) + " vs " +
                         std::to_string(col_cfg.latent_dim));
    if (alpha >= beta) throw config_error("rating bounds need alpha < beta");
    if (norm_floor <= 0.0) throw config_error("norm_floor must be > 0");
    Rng rng(seed);
    row_branch_ = Branch(row_cfg, bn_momentum, bn_eps, rng);
    col_branch_ = Branch(col_cfg, bn_momentum, bn_eps, rng);
  }

  const BranchConfig& row_config() const { return row_branch_.config(); }
  const BranchConfig& col_config() const { return col_branch_.config(); }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double norm_floor() const { return norm_floor_; }
  double bn_momentum() const { return bn_momentum_; }
  double bn_eps() const { return bn_eps_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t latent_dim() const { return row_branch_.config().latent_dim; }

  Tensor2 embed_rows(const Tensor2& x, Mode mode, Rng& rng) {
    return row_branch_.forward(x, mode, rng);
  }
  Tensor2 embed_cols(const Tensor2& y, Mode mode, Rng& rng) {
    return col_branch_.forward(y, mode, rng);
  }

  std::vector<double> embed_row(std::span<const double> x, Mode mode, Rng& rng) {
    Tensor2 t(1, x.size());
    std::copy(x.begin(), x.end(), t.data.begin());
    Tensor2 u = row_branch_.forward(t, mode, rng);
    return u.data;
  }
  std::vector<double> embed_col(std::span<const double> y, Mode mode, Rng& rng) {
    Tensor2 t(1, y.size());
    std::copy(y.begin(), y.end(), t.data.begin());
    Tensor2 v = col_branch_.forward(t, mode, rng);
    return v.data;
  }

  // Rating prediction for any cell of the full matrix, seen or unseen:
  // truncated row/column inputs, inference-mode embeddings, cosine head,
  // then rescale and clip to [alpha, beta].
  double predict(const SparseRatings& data, const AreaSplit& split,
                 std::size_t row, std::size_t col,
                 const ExcludeMask& exclude) {
    if (row >= data.n_rows || col >= data.n_cols)
      throw config_error("predict: cell (" + std::to_string(row) + ", " +
                         std::to_string(col) + ") outside the matrix");
    Tensor2 x(1, split.m_I), y(1, split.n_I);
    row_input_into(data, split, row, exclude, x.data.data());
    col_input_into(data, split, col, exclude, y.data.data());
    Rng rng(0);  // inference draws nothing
    Tensor2 u = row_branch_.forward(x, Mode::infer, rng);
    Tensor2 v = col_branch_.forward(y, Mode::infer, rng);
    ScaledValue c = cosine_similarity(
        std::span<const double>(u.data), std::span<const double>(v.data),
        norm_floor_);
    return clip_rating(unscale_rating(c, alpha_, beta_), alpha_, beta_);
  }

  // Mean squared error over the batch in the scaled domain, with reverse-mode
  // gradients through both branches and the cosine head. Train mode: batch
  // statistics in batchnorm, dropout active. Gradients accumulate in the
  // layer views (call zero_grad first for a fresh batch).
  LossGrads loss_and_grads(const PairBatch& batch, Rng& rng,
                           bool backprop = true) {
    std::size_t b = batch.targets.size();
    if (b == 0) throw config_error("loss: empty batch");
    if (batch.rows.rows != b || batch.cols.rows != b)
      throw shape_error("loss: batch sizes disagree");
    Tensor2 u = row_branch_.forward(batch.rows, Mode::train, rng);
    Tensor2 v = col_branch_.forward(batch.cols, Mode::train, rng);
    std::size_t r = u.cols;

    double loss = 0.0;
    Tensor2 du(b, r), dv(b, r);
    for (std::size_t i = 0; i < b; ++i) {
      const double* ui = &u.data[i * r];
      const double* vi = &v.data[i * r];
      double uu = 0.0, vv = 0.0, uv = 0.0;
      for (std::size_t k = 0; k < r; ++k) {
        uu += ui[k] * ui[k];
        vv += vi[k] * vi[k];
        uv += ui[k] * vi[k];
      }
      double nu = std::sqrt(uu), nv = std::sqrt(vv);
      double c = 0.0;
      bool live = nu >= norm_floor_ && nv >= norm_floor_;
      if (live) c = uv / (nu * nv);
      double resid = c - batch.targets[i];
      loss += resid * resid;
      if (backprop && live) {
        double dc = 2.0 * resid / static_cast<double>(b);
        double inv_nunv = 1.0 / (nu * nv);
        for (std::size_t k = 0; k < r; ++k) {
          du(i, k) = dc * (vi[k] * inv_nunv - c * ui[k] / uu);
          dv(i, k) = dc * (ui[k] * inv_nunv - c * vi[k] / vv);
        }
      }
    }
    loss /= static_cast<double>(b);

    LossGrads out;
    out.loss = loss;
    if (backprop) {
      out.d_rows = row_branch_.backward(du);
      out.d_cols = col_branch_.backward(dv);
    }
    return out;
  }

  void zero_grad() {
    row_branch_.zero_grad();
    col_branch_.zero_grad();
  }

  // Every parameter and running-statistics array, in serialization order.
  std::vector<ParamView> all_views() {
    std::vector<ParamView> v;
    row_branch_.collect_all(v);
    col_branch_.collect_all(v);
    return v;
  }

  std::vector<ParamView> trainable_views() {
    std::vector<ParamView> v;
    row_branch_.collect_trainable(v);
    col_branch_.collect_trainable(v);
    return v;
  }

  std::vector<double> snapshot() {
    std::vector<double> flat;
    for (auto& v : all_views())
      flat.insert(flat.end(), v.value, v.value + v.size);
    return flat;
  }

  void restore(const std::vector<double>& flat) {
    std::size_t off = 0;
    for (auto& v : all_views()) {
      if (off + v.size > flat.size())
        throw shape_error("restore: snapshot too short");
      std::copy(flat.begin() + off, flat.begin() + off + v.size, v.value);
      off += v.size;
    }
    if (off != flat.size())
      throw shape_error("restore: snapshot size mismatch");
  }

 private:
  double alpha_ = 1.0;
  double beta_ = 5.0;
  double norm_floor_ = 1e-8;
  double bn_momentum_ = 0.1;
  double bn_eps_ = 1e-5;
  std::uint64_t seed_ = 0;
  Branch row_branch_, col_branch_;
};

inline NmcModel build_model(const BranchConfig& row_cfg,
                            const BranchConfig& col_cfg, double alpha,
                            double beta, std::uint64_t seed,
                            double norm_floor = 1e-8, double bn_momentum = 0.1,
                            double bn_eps = 1e-5) {
  return NmcModel(row_cfg, col_cfg, alpha, beta, seed, norm_floor, bn_momentum,
                  bn_eps);
}

// ---- checkpoint format ----------------------------------------------------
//
//   "NMC1" | version byte (1) | u32 LE config length | config text
//   | parameters as little-endian f64 in declared layer order
//   | u64 LE FNV-1a checksum of config text + parameter bytes

namespace detail {

inline std::uint64_t fnv1a(const unsigned char* bytes, std::size_t n,
                           std::uint64_t h = 1469598103934665603ull) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64_le(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64_le(out, bits);
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_summ(const std::vector<SummStage>& stages) {
  std::string s;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(stages[i].filters) + ":" +
         std::to_string(stages[i].kernel) + ":" +
         std::to_string(stages[i].stride);
  }
  return s;
}

inline std::string fmt_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<SummStage> parse_summ(const std::string& text);
std::vector<std::size_t> parse_sizes(const std::string& text);

}  // namespace detail

// "F:K:S,F:K:S,..." — empty string means no summarization stages.
inline std::vector<SummStage> detail::parse_summ(const std::string& text) {
  std::vector<SummStage> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string stage;
  while (std::getline(ss, stage, ',')) {
    SummStage s;
    if (std::sscanf(stage.c_str(), "%zu:%zu:%zu", &s.filters, &s.kernel,
                    &s.stride) != 3)
      throw parse_error("bad summarization stage '" + stage +
                        "' (expected filters:kernel:stride)");
    out.push_back(s);
  }
  return out;
}

inline std::vector<std::size_t> detail::parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw parse_error("bad size list element '" + item + "'");
    }
  }
  return out;
}

inline void save_model(NmcModel& model, const std::string& path) {
  std::string cfg;
  auto kv = [&cfg](const std::string& k, const std::string& v) {
    cfg += k + "=" + v + "\n";
  };
  kv("alpha", detail::fmt_double(model.alpha()));
  kv("beta", detail::fmt_double(model.beta()));
  kv("norm_floor", detail::fmt_double(model.norm_floor()));
  kv("bn_momentum", detail::fmt_double(model.bn_momentum()));
  kv("bn_eps", detail::fmt_double(model.bn_eps()));
  const BranchConfig& rc = model.row_config();
  const BranchConfig& cc = model.col_config();
  kv("row.input_len", std::to_string(rc.input_len));
  kv("row.summ", detail::fmt_summ(rc.summarization));
  kv("row.fc", detail::fmt_sizes(rc.fc_sizes));
  kv("row.dropout", detail::fmt_double(rc.dropout_p));
  kv("col.input_len", std::to_string(cc.input_len));
  kv("col.summ", detail::fmt_summ(cc.summarization));
  kv("col.fc", detail::fmt_sizes(cc.fc_sizes));
  kv("col.dropout", detail::fmt_double(cc.dropout_p));

  std::string payload;
  for (auto& view : model.all_views())
    for (std::size_t i = 0; i < view.size; ++i)
      detail::put_f64_le(payload, view.value[i]);

  std::string blob = "NMC1";
  blob.push_back(1);
  detail::put_u32_le(blob, static_cast<std::uint32_t>(cfg.size()));
  blob += cfg;
  blob += payload;
  std::uint64_t sum = detail::fnv1a(
      reinterpret_cast<const unsigned char*>(cfg.data()), cfg.size());
  sum = detail::fnv1a(reinterpret_cast<const unsigned char*>(payload.data()),
                      payload.size(), sum);
  detail::put_u64_le(blob, sum);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write model file: " + path);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw io_error("failed while writing model file: " + path);
}

inline NmcModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open model file: " + path);
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (blob.size() < 9 || blob.compare(0, 4, "NMC1") != 0)
    throw parse_error(path + ": not an NMC1 model file");
  if (blob[4] != 1)
    throw parse_error(path + ": unsupported model format version " +
                      std::to_string(static_cast<int>(blob[4])));
  std::uint32_t cfg_len = 0;
  for (int i = 0; i < 4; ++i)
    cfg_len |= static_cast<std::uint32_t>(
                   static_cast<unsigned char>(blob[5 + i]))
               << (8 * i);
  std::size_t cfg_off = 9;
  if (blob.size() < cfg_off + cfg_len + 8)
    throw parse_error(path + ": truncated model file");
  std::string cfg = blob.substr(cfg_off, cfg_len);

  std::unordered_map<std::string, std::string> keys;
  std::stringstream ss(cfg);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw parse_error(path + ": malformed config line '" + line + "'");
    keys[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& k) {
    auto it = keys.find(k);
    if (it == keys.end())
      throw parse_error(path + ": config key '" + k + "' missing");
    return it->second;
  };
  auto need_d = [&](const std::string& k) {
    try {
      return std::stod(need(k));
    } catch (const std::logic_error&) {
      throw parse_error(path + ": config key '" + k + "' is not a number");
    }
  };
  auto need_u = [&](const std::string& k) -> std::size_t {
    try {
      return std::stoull(need(k));
    } catch (const std::logic_error&) {
      throw parse_error(path + ": config key '" + k + "' is not an integer");
    }
  };

  BranchConfig rc, cc;
  rc.input_len = need_u("row.input_len");
  rc.summarization = detail::parse_summ(need("row.summ"));
  rc.fc_sizes = detail::parse_sizes(need("row.fc"));
  rc.latent_dim = rc.fc_sizes.empty() ? 0 : rc.fc_sizes.back();
  rc.dropout_p = need_d("row.dropout");
  cc.input_len = need_u("col.input_len");
  cc.summarization = detail::parse_summ(need("col.summ"));
  cc.fc_sizes = detail::parse_sizes(need("col.fc"));
  cc.latent_dim = cc.fc_sizes.empty() ? 0 : cc.fc_sizes.back();
  cc.dropout_p = need_d("col.dropout");

  NmcModel model(rc, cc, need_d("alpha"), need_d("beta"), 0,
                 need_d("norm_floor"), need_d("bn_momentum"),
                 need_d("bn_eps"));

  std::size_t n_params = 0;
  auto views = model.all_views();
  for (auto& v : views) n_params += v.size;
  std::size_t payload_off = cfg_off + cfg_len;
  std::size_t payload_len = n_params * 8;
  if (blob.size() != payload_off + payload_len + 8)
    throw parse_error(path + ": model payload size mismatch (corrupt file?)");

  std::uint64_t sum = detail::fnv1a(
      reinterpret_cast<const unsigned char*>(cfg.data()), cfg.size());
  sum = detail::fnv1a(
      reinterpret_cast<const unsigned char*>(blob.data() + payload_off),
      payload_len, sum);
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= static_cast<std::uint64_t>(static_cast<unsigned char>(
                  blob[payload_off + payload_len + i]))
              << (8 * i);
  if (sum != stored)
    throw parse_error(path + ": checksum mismatch (corrupt model file)");

  std::size_t off = payload_off;
  for (auto& v : views) {
    for (std::size_t i = 0; i < v.size; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(
                    static_cast<unsigned char>(blob[off + b]))
                << (8 * b);
      std::memcpy(&v.value[i], &bits, 8);
      off += 8;
    }
  }
  return model;
}

}  // namespace nmc
