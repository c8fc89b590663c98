// nmc — command-line driver for the neural matrix completion toolkit.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config/parse error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nmc/nmc.hpp"

namespace {

using namespace nmc;

SparseRatings load_data(const std::string& path, const std::string& format,
                        double alpha, double beta) {
  RatingsFormat fmt = format == "auto" ? ratings_format_for_path(path)
                                       : ratings_format_from_name(format);
  return load_ratings(path, fmt, alpha, beta);
}

void print_split_summary(const AreaSplit& split) {
  std::size_t total[4] = {0, 0, 0, 0}, obs[4] = {0, 0, 0, 0};
  for (const auto& a : split.assignment) {
    std::size_t i = static_cast<std::size_t>(a.area) - 1;
    ++total[i];
    if (a.role == Role::observed) ++obs[i];
  }
  std::printf("area (I) boundary: %zu rows x %zu cols\n", split.n_I,
              split.m_I);
  static const Area order[4] = {Area::I, Area::II, Area::III, Area::IV};
  for (Area a : order) {
    std::size_t i = static_cast<std::size_t>(a) - 1;
    std::printf("area %-3s %8zu entries  (%zu observed, %zu heldout)\n",
                area_name(a), total[i], obs[i], total[i] - obs[i]);
  }
}

void write_id_map(const SparseRatings& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write id map: " + path);
  out << "# kind index raw_id\n";
  for (std::size_t i = 0; i < data.row_ids.size(); ++i)
    out << "R " << i << " " << data.row_ids[i] << "\n";
  for (std::size_t j = 0; j < data.col_ids.size(); ++j)
    out << "C " << j << " " << data.col_ids[j] << "\n";
}

int cmd_gradcheck() {
  struct Check {
    std::string name;
    double err;
    double threshold;
  };
  std::vector<Check> checks;

  Rng rng(12);
  auto away_from_zero = [](Tensor2 t) {
    for (double& v : t.data)
      if (std::abs(v) < 1e-3) v = std::copysign(1e-3, v == 0.0 ? 1.0 : v);
    return t;
  };
  auto random_tensor = [&](std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng g(seed);
    Tensor2 t(r, c);
    for (double& v : t.data) v = g.normal();
    return t;
  };

  {
    DenseLayer dense(5, 3, rng);
    checks.push_back(
        {"dense", grad_check_layer(dense, random_tensor(4, 5, 1), Mode::infer,
                                   1e-5),
         1e-5});
  }
  {
    BatchNormLayer bn(3);
    checks.push_back(
        {"batchnorm (train)",
         grad_check_layer(bn, random_tensor(6, 3, 2), Mode::train, 1e-5),
         1e-5});
  }
  {
    BatchNormLayer bn(3);
    Rng unused(0);
    Tensor2 warm = random_tensor(32, 3, 3);
    bn.forward(warm, Mode::train, unused);
    checks.push_back(
        {"batchnorm (infer)",
         grad_check_layer(bn, random_tensor(4, 3, 4), Mode::infer, 1e-5),
         1e-5});
  }
  {
    ReluLayer relu;
    checks.push_back(
        {"relu", grad_check_layer(relu, away_from_zero(random_tensor(3, 4, 5)),
                                  Mode::infer, 1e-5),
         1e-5});
  }
  {
    Conv1dLayer conv(2, 4, 3, rng);
    checks.push_back(
        {"conv1d", grad_check_layer(conv, random_tensor(3, 20, 6), Mode::infer,
                                    1e-5),
         1e-5});
  }
  {
    BranchConfig row_cfg, col_cfg;
    row_cfg.input_len = 20;
    row_cfg.summarization = {{2, 4, 3}};
    row_cfg.fc_sizes = {10, 8};
    row_cfg.latent_dim = 8;
    col_cfg = row_cfg;
    col_cfg.input_len = 15;
    NmcModel model = build_model(row_cfg, col_cfg, 1.0, 5.0, 7);
    PairBatch batch;
    batch.rows = random_tensor(4, 20, 8);
    batch.cols = random_tensor(4, 15, 9);
    batch.targets = {0.5, -0.25, 0.0, 0.75};
    for (double& v : batch.rows.data) v *= 0.5;
    for (double& v : batch.cols.data) v *= 0.5;
    checks.push_back(
        {"two-branch model (cosine + MSE)", grad_check_model(model, batch),
         1e-4});
  }

  bool all_ok = true;
  for (const auto& c : checks) {
    bool ok = c.err <= c.threshold;
    all_ok = all_ok && ok;
    std::printf("%-34s max rel err %.3e  (threshold %.0e)  %s\n",
                c.name.c_str(), c.err, c.threshold, ok ? "PASS" : "FAIL");
  }
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural matrix completion toolkit"};
  app.require_subcommand(1);

  // ---- split ----
  auto* sp = app.add_subcommand("split", "build a four-area extendability split");
  std::string sp_input, sp_format = "auto", sp_out;
  double sp_alpha = 1.0, sp_beta = 5.0;
  SplitSpec sp_spec;
  sp->add_option("--input", sp_input, "ratings file")->required();
  sp->add_option("--format", sp_format, "movielens-dat | csv | auto");
  sp->add_option("--alpha", sp_alpha, "rating lower bound");
  sp->add_option("--beta", sp_beta, "rating upper bound");
  sp->add_option("--seed", sp_spec.seed, "shuffle seed");
  sp->add_option("--row-frac", sp_spec.row_frac, "fraction of rows in area (I)");
  sp->add_option("--col-frac", sp_spec.col_frac, "fraction of columns in area (I)");
  sp->add_option("--observe-frac", sp_spec.observe_frac,
                 "per-area observed fraction");
  sp->add_option("--out", sp_out, "split file to write")->required();
  sp->callback([&] {
    SparseRatings data = load_data(sp_input, sp_format, sp_alpha, sp_beta);
    AreaSplit split = make_split(data, sp_spec);
    save_split(split, data, sp_out);
    write_id_map(data, sp_out + ".ids");
    std::printf("wrote %s (%zu rows, %zu cols, %zu entries)\n", sp_out.c_str(),
                data.n_rows, data.n_cols, data.entries.size());
    print_split_summary(split);
  });

  // ---- train ----
  auto* tr = app.add_subcommand("train", "train an NMC / NMC-S model");
  std::string tr_data, tr_format = "auto", tr_split, tr_config;
  std::string tr_out_model = "model.nmc", tr_out_history;
  std::uint64_t tr_seed = 0;
  std::size_t tr_max_epochs = 0, tr_batch = 0;
  double tr_lr = 0.0, tr_alpha = 0.0, tr_beta = 0.0;
  int tr_threads = 1;
  bool tr_verbose = false;
  tr->add_option("--data", tr_data, "ratings file");
  tr->add_option("--format", tr_format, "movielens-dat | csv | auto");
  tr->add_option("--split", tr_split, "split file")->required();
  tr->add_option("--config", tr_config, "key=value config file");
  tr->add_option("--out-model", tr_out_model, "checkpoint to write");
  tr->add_option("--out-history", tr_out_history, "per-epoch CSV to write");
  auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "training seed");
  auto* tr_epochs_opt = tr->add_option("--max-epochs", tr_max_epochs, "epoch cap");
  auto* tr_batch_opt = tr->add_option("--batch-size", tr_batch, "batch size");
  auto* tr_lr_opt = tr->add_option("--lr", tr_lr, "Adam learning rate");
  auto* tr_alpha_opt = tr->add_option("--alpha", tr_alpha, "rating lower bound");
  auto* tr_beta_opt = tr->add_option("--beta", tr_beta, "rating upper bound");
  tr->add_option("--threads", tr_threads, "worker threads");
  tr->add_flag("--verbose", tr_verbose, "per-epoch progress");
  tr->callback([&] {
    KvConfig kv;
    if (!tr_config.empty()) kv = KvConfig::from_file(tr_config);
    RunConfig rc = RunConfig::from_kv(kv);
    if (!tr_data.empty()) rc.data_path = tr_data;
    if (tr_format != "auto") rc.data_format = tr_format;
    if (*tr_alpha_opt) rc.alpha = tr_alpha;
    if (*tr_beta_opt) rc.beta = tr_beta;
    if (*tr_seed_opt) rc.train.seed = tr_seed;
    if (*tr_epochs_opt) rc.train.max_epochs = tr_max_epochs;
    if (*tr_batch_opt) rc.train.batch_size = tr_batch;
    if (*tr_lr_opt) rc.train.lr = tr_lr;
    rc.train.verbose = tr_verbose;
    if (rc.data_path.empty())
      throw config_error("no ratings file: pass --data or set data.path");

    set_num_threads(tr_threads);
    SparseRatings data =
        load_data(rc.data_path, rc.data_format, rc.alpha, rc.beta);
    AreaSplit split = load_split(tr_split);
    check_split_matches(data, split);

    NmcModel model = build_model(rc.row_branch(split.m_I),
                                 rc.col_branch(split.n_I), rc.alpha, rc.beta,
                                 rc.train.seed, rc.norm_floor, rc.bn_momentum,
                                 rc.bn_eps);
    TrainHistory history = train(model, data, split, rc.train);
    save_model(model, tr_out_model);
    if (!tr_out_history.empty()) history.write_csv(tr_out_history);

    double final_val = history.epochs.empty()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : history.epochs.back().val_rmse;
    double best_val = final_val;
    for (const auto& e : history.epochs)
      if (e.val_rmse < best_val) best_val = e.val_rmse;
    std::printf("trained %zu epochs; best validation RMSE %.6f\n",
                history.epochs.size(), best_val);
    std::printf("wrote %s\n", tr_out_model.c_str());
  });

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "per-area RMSE/MAE on held-out entries");
  std::string ev_model, ev_data, ev_format = "auto", ev_split, ev_out;
  double ev_alpha = 1.0, ev_beta = 5.0;
  int ev_threads = 1;
  ev->add_option("--model", ev_model, "model checkpoint")->required();
  ev->add_option("--data", ev_data, "ratings file")->required();
  ev->add_option("--format", ev_format, "movielens-dat | csv | auto");
  ev->add_option("--alpha", ev_alpha, "rating lower bound");
  ev->add_option("--beta", ev_beta, "rating upper bound");
  ev->add_option("--split", ev_split, "split file")->required();
  ev->add_option("--out", ev_out, "metrics CSV to write");
  ev->add_option("--threads", ev_threads, "worker threads");
  ev->callback([&] {
    set_num_threads(ev_threads);
    SparseRatings data = load_data(ev_data, ev_format, ev_alpha, ev_beta);
    AreaSplit split = load_split(ev_split);
    check_split_matches(data, split);
    NmcModel model = load_model(ev_model);
    AreaMetrics metrics = evaluate(model, data, split);
    metrics.print_table(std::cout);
    if (!ev_out.empty()) {
      std::ofstream out(ev_out);
      if (!out) throw io_error("cannot write metrics file: " + ev_out);
      metrics.write_csv(out);
    }
  });

  // ---- predict ----
  auto* pr = app.add_subcommand("predict", "predict one cell of the matrix");
  std::string pr_model, pr_data, pr_format = "auto", pr_split;
  double pr_alpha = 1.0, pr_beta = 5.0;
  std::size_t pr_row = 0, pr_col = 0;
  pr->add_option("--model", pr_model, "model checkpoint")->required();
  pr->add_option("--data", pr_data, "ratings file")->required();
  pr->add_option("--format", pr_format, "movielens-dat | csv | auto");
  pr->add_option("--alpha", pr_alpha, "rating lower bound");
  pr->add_option("--beta", pr_beta, "rating upper bound");
  pr->add_option("--split", pr_split, "split file")->required();
  pr->add_option("--row", pr_row, "row index (0-based)")->required();
  pr->add_option("--col", pr_col, "column index (0-based)")->required();
  pr->callback([&] {
    SparseRatings data = load_data(pr_data, pr_format, pr_alpha, pr_beta);
    AreaSplit split = load_split(pr_split);
    check_split_matches(data, split);
    if (pr_row >= data.n_rows || pr_col >= data.n_cols)
      throw config_error("cell (" + std::to_string(pr_row) + ", " +
                         std::to_string(pr_col) + ") outside the " +
                         std::to_string(data.n_rows) + " x " +
                         std::to_string(data.n_cols) + " matrix");
    NmcModel model = load_model(pr_model);
    ExcludeMask mask = heldout_mask(split);
    double value = model.predict(data, split, pr_row, pr_col, mask);
    std::printf("area %s prediction %.6f\n",
                area_name(split.cell_area(pr_row, pr_col)), value);
  });

  // ---- baseline ----
  auto* bl = app.add_subcommand("baseline", "reference predictors over the split");
  std::string bl_method, bl_data, bl_format = "auto", bl_split, bl_out;
  double bl_alpha = 1.0, bl_beta = 5.0;
  MfConfig bl_mf;
  int bl_threads = 1;
  bl->add_option("--method", bl_method, "mean | bias | mf")
      ->required()
      ->check(CLI::IsMember({"mean", "bias", "mf"}));
  bl->add_option("--data", bl_data, "ratings file")->required();
  bl->add_option("--format", bl_format, "movielens-dat | csv | auto");
  bl->add_option("--alpha", bl_alpha, "rating lower bound");
  bl->add_option("--beta", bl_beta, "rating upper bound");
  bl->add_option("--split", bl_split, "split file")->required();
  bl->add_option("--out", bl_out, "metrics CSV to write");
  bl->add_option("--rank", bl_mf.rank, "mf latent rank");
  bl->add_option("--reg", bl_mf.reg, "L2 coefficient");
  bl->add_option("--lr", bl_mf.lr, "mf SGD learning rate");
  bl->add_option("--epochs", bl_mf.epochs, "mf SGD epochs");
  bl->add_option("--seed", bl_mf.seed, "mf init seed");
  bl->add_option("--threads", bl_threads, "worker threads");
  bl->callback([&] {
    set_num_threads(bl_threads);
    SparseRatings data = load_data(bl_data, bl_format, bl_alpha, bl_beta);
    AreaSplit split = load_split(bl_split);
    check_split_matches(data, split);
    BaselineTrainSet ts = baseline_train_set(data, split);

    AreaMetrics metrics;
    if (bl_method == "mean") {
      MeanBaseline b(ts);
      metrics = evaluate_predictor(baseline_cell_predictor(b, data, split),
                                   data, split);
    } else if (bl_method == "bias") {
      BiasBaseline b(ts, bl_mf.reg);
      metrics = evaluate_predictor(baseline_cell_predictor(b, data, split),
                                   data, split);
    } else {
      MfModel b(ts, bl_mf);
      std::printf("mf training RMSE %.6f\n", b.train_rmse(ts));
      metrics = evaluate_predictor(baseline_cell_predictor(b, data, split),
                                   data, split);
    }
    metrics.print_table(std::cout);
    if (!bl_out.empty()) {
      std::ofstream out(bl_out);
      if (!out) throw io_error("cannot write metrics file: " + bl_out);
      metrics.write_csv(out);
    }
  });

  // ---- gradcheck ----
  auto* gc = app.add_subcommand(
      "gradcheck", "verify analytic gradients against finite differences");
  bool gc_ran = false;
  int gc_result = 0;
  gc->callback([&] {
    gc_ran = true;
    gc_result = cmd_gradcheck();
  });

  // ---- synth ----
  auto* sy = app.add_subcommand("synth", "generate low-rank synthetic ratings");
  SynthSpec sy_spec;
  std::string sy_out;
  sy->add_option("--rows", sy_spec.n_rows, "matrix rows");
  sy->add_option("--cols", sy_spec.n_cols, "matrix columns");
  sy->add_option("--rank", sy_spec.rank, "latent rank");
  sy->add_option("--density", sy_spec.density, "fraction of observed cells");
  sy->add_option("--noise", sy_spec.noise_sd, "Gaussian noise stddev");
  sy->add_option("--seed", sy_spec.seed, "generator seed");
  sy->add_option("--alpha", sy_spec.alpha, "rating lower bound");
  sy->add_option("--beta", sy_spec.beta, "rating upper bound");
  sy->add_option("--out", sy_out, "CSV file to write")->required();
  sy->callback([&] {
    SparseRatings data = make_synthetic(sy_spec);
    write_ratings_csv(data, sy_out);
    std::printf("wrote %s (%zu x %zu, %zu entries)\n", sy_out.c_str(),
                data.n_rows, data.n_cols, data.entries.size());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const nmc::config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const nmc::parse_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return gc_ran ? gc_result : 0;
}
