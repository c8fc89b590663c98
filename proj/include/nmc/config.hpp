#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nmc/error.hpp"
#include "nmc/model.hpp"
#include "nmc/trainer.hpp"

namespace nmc {

// Plain-text key=value configuration with '#' comments. Keys are validated
// against a fixed schema; anything unrecognized is an error so typos cannot
// silently fall back to defaults.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    KvConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw parse_error(path + ":" + std::to_string(line_no) +
                          ": expected key=value");
      std::string key = trim(trimmed.substr(0, eq));
      std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw parse_error(path + ":" + std::to_string(line_no) + ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stod(it->second);
    } catch (const std::logic_error&) {
      throw config_error("config key '" + key + "': '" + it->second +
                         "' is not a number");
    }
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stoull(it->second);
    } catch (const std::logic_error&) {
      throw config_error("config key '" + key + "': '" + it->second +
                         "' is not an integer");
    }
  }

  // Throws naming the first key outside the allowed set.
  void reject_unknown(const std::set<std::string>& allowed) const {
    for (const auto& [key, value] : values_)
      if (!allowed.count(key))
        throw config_error("unknown config key '" + key + "'");
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

// Everything a training run needs, resolved from a config file with
// command-line overrides already applied.
struct RunConfig {
  std::string data_path;
  std::string data_format = "auto";  // movielens-dat | csv | auto
  double alpha = 1.0;
  double beta = 5.0;

  std::vector<SummStage> row_summ;
  std::vector<SummStage> col_summ;
  std::vector<std::size_t> row_fc{2048, 1024};
  std::vector<std::size_t> col_fc{2048, 1024};
  std::size_t latent_dim = 0;  // 0: use the last fc width
  double dropout = 0.0;
  double norm_floor = 1e-8;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  TrainConfig train;

  static const std::set<std::string>& allowed_keys() {
    static const std::set<std::string> keys = {
        "data.path",   "data.format", "data.alpha",  "data.beta",
        "row.summ",    "col.summ",    "row.fc",      "col.fc",
        "latent_dim",  "dropout",     "norm_floor",  "bn.momentum",
        "bn.eps",      "batch_size",  "max_epochs",  "lr",
        "beta1",       "beta2",       "eps",         "val_frac",
        "patience",    "seed",        "checkpoint_path"};
    return keys;
  }

  static RunConfig from_kv(const KvConfig& kv) {
    kv.reject_unknown(allowed_keys());
    RunConfig rc;
    rc.data_path = kv.get_str("data.path", rc.data_path);
    rc.data_format = kv.get_str("data.format", rc.data_format);
    rc.alpha = kv.get_double("data.alpha", rc.alpha);
    rc.beta = kv.get_double("data.beta", rc.beta);
    rc.row_summ = detail::parse_summ(kv.get_str("row.summ", ""));
    rc.col_summ = detail::parse_summ(kv.get_str("col.summ", ""));
    if (kv.has("row.fc")) rc.row_fc = detail::parse_sizes(kv.get_str("row.fc", ""));
    if (kv.has("col.fc")) rc.col_fc = detail::parse_sizes(kv.get_str("col.fc", ""));
    rc.latent_dim = kv.get_u64("latent_dim", rc.latent_dim);
    rc.dropout = kv.get_double("dropout", rc.dropout);
    rc.norm_floor = kv.get_double("norm_floor", rc.norm_floor);
    rc.bn_momentum = kv.get_double("bn.momentum", rc.bn_momentum);
    rc.bn_eps = kv.get_double("bn.eps", rc.bn_eps);
    rc.train.batch_size = kv.get_u64("batch_size", rc.train.batch_size);
    rc.train.max_epochs = kv.get_u64("max_epochs", rc.train.max_epochs);
    rc.train.lr = kv.get_double("lr", rc.train.lr);
    rc.train.beta1 = kv.get_double("beta1", rc.train.beta1);
    rc.train.beta2 = kv.get_double("beta2", rc.train.beta2);
    rc.train.eps = kv.get_double("eps", rc.train.eps);
    rc.train.val_frac = kv.get_double("val_frac", rc.train.val_frac);
    rc.train.patience = kv.get_u64("patience", rc.train.patience);
    rc.train.seed = kv.get_u64("seed", rc.train.seed);
    rc.train.checkpoint_path =
        kv.get_str("checkpoint_path", rc.train.checkpoint_path);
    return rc;
  }

  // Branch configs bound to a concrete split. The fc lists name the hidden
  // widths; the final linear layer onto the latent space is appended, with
  // latent_dim defaulting to the last hidden width when unset.
  BranchConfig row_branch(std::size_t m_I) const {
    return make_branch(m_I, row_summ, row_fc);
  }
  BranchConfig col_branch(std::size_t n_I) const {
    return make_branch(n_I, col_summ, col_fc);
  }

 private:
  BranchConfig make_branch(std::size_t input_len,
                           const std::vector<SummStage>& summ,
                           std::vector<std::size_t> fc) const {
    if (fc.empty()) throw config_error("branch fc list is empty");
    std::size_t r = latent_dim > 0 ? latent_dim : fc.back();
    BranchConfig cfg;
    cfg.input_len = input_len;
    cfg.summarization = summ;
    cfg.fc_sizes = std::move(fc);
    cfg.fc_sizes.push_back(r);
    cfg.latent_dim = r;
    cfg.dropout_p = dropout;
    return cfg;
  }
};

}  // namespace nmc
