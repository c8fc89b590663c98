// Acceptance suite: one pass/fail line per criterion, exit 0 iff every
// non-optional criterion passes. Expects the CLI binary's path as argv[1]
// (used by the determinism criterion).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nmc/nmc.hpp"

using namespace nmc;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
int g_index = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  ++g_index;
  std::printf("[%s] criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", g_index,
              name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void report_skip(const std::string& name, const std::string& why) {
  ++g_index;
  std::printf("[SKIP] criterion %d: %s — %s\n", g_index, name.c_str(),
              why.c_str());
  std::fflush(stdout);
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

Tensor2 random_tensor(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng g(seed);
  Tensor2 t(r, c);
  for (double& v : t.data) v = g.normal();
  return t;
}

// ---- criterion 1: gradient correctness --------------------------------

void criterion_gradients() {
  auto t0 = std::chrono::steady_clock::now();
  double worst_layer = 0.0;
  Rng rng(12);
  {
    DenseLayer dense(5, 3, rng);
    worst_layer = std::max(
        worst_layer,
        grad_check_layer(dense, random_tensor(4, 5, 1), Mode::infer, 1e-5));
  }
  {
    BatchNormLayer bn(3);
    worst_layer = std::max(
        worst_layer,
        grad_check_layer(bn, random_tensor(6, 3, 2), Mode::train, 1e-5));
  }
  {
    BatchNormLayer bn(3);
    Rng unused(0);
    Tensor2 warm = random_tensor(32, 3, 3);
    bn.forward(warm, Mode::train, unused);
    worst_layer = std::max(
        worst_layer,
        grad_check_layer(bn, random_tensor(4, 3, 4), Mode::infer, 1e-5));
  }
  {
    ReluLayer relu;
    Tensor2 x = random_tensor(3, 4, 5);
    for (double& v : x.data)
      if (std::abs(v) < 1e-3) v = std::copysign(1e-3, v == 0.0 ? 1.0 : v);
    worst_layer =
        std::max(worst_layer, grad_check_layer(relu, x, Mode::infer, 1e-5));
  }
  {
    Conv1dLayer conv(2, 4, 3, rng);
    worst_layer = std::max(
        worst_layer,
        grad_check_layer(conv, random_tensor(3, 20, 6), Mode::infer, 1e-5));
  }

  BranchConfig row_cfg;
  row_cfg.input_len = 20;
  row_cfg.summarization = {{2, 4, 3}};
  row_cfg.fc_sizes = {10, 8};
  row_cfg.latent_dim = 8;
  BranchConfig col_cfg = row_cfg;
  col_cfg.input_len = 15;
  NmcModel model = build_model(row_cfg, col_cfg, 1.0, 5.0, 7);
  PairBatch batch;
  batch.rows = random_tensor(4, 20, 8);
  batch.cols = random_tensor(4, 15, 9);
  for (double& v : batch.rows.data) v *= 0.5;
  for (double& v : batch.cols.data) v *= 0.5;
  batch.targets = {0.5, -0.25, 0.0, 0.75};
  double model_err = grad_check_model(model, batch);

  double secs = elapsed_s(t0);
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "layers max rel err %.2e (<= 1e-5), model %.2e (<= 1e-4), "
                "%.1fs (< 60s)",
                worst_layer, model_err, secs);
  report("gradient correctness",
         worst_layer <= 1e-5 && model_err <= 1e-4 && secs < 60.0, detail);
}

// ---- criterion 2: scaling round trip ----------------------------------

void criterion_scaling() {
  bool ok = scale_rating(5.0, 1.0, 5.0).value == 1.0 &&
            scale_rating(3.0, 1.0, 5.0).value == 0.0 &&
            scale_rating(1.0, 1.0, 5.0).value == -1.0;
  double worst = 0.0;
  Rng rng(99);
  for (int i = 0; i < 100000; ++i) {
    double v = 1.0 + 4.0 * rng.uniform01();
    double back = unscale_rating(scale_rating(v, 1.0, 5.0), 1.0, 5.0);
    worst = std::max(worst, std::abs(back - v));
  }
  char detail[120];
  std::snprintf(detail, sizeof detail,
                "anchors 5->1, 3->0, 1->-1 %s; max |round trip error| %.2e "
                "(<= 1e-12) over 1e5 draws",
                ok ? "exact" : "WRONG", worst);
  report("scaling round trip", ok && worst <= 1e-12, detail);
}

// ---- criteria 3 + 4 + 5: synthetic end-to-end, MF oracle, locality ----

struct SynthRun {
  SparseRatings data;
  AreaSplit split;
  NmcModel model;
  AreaMetrics nmc_metrics;
  AreaMetrics mean_metrics;
};

// Verified configuration for the noiseless rank-3 instance: heavy dropout
// and a short epoch budget keep the seen-area fit at the level the branches
// generalize to, which is what the extension caps measure.
BranchConfig synth_branch(std::size_t input_len) {
  BranchConfig cfg;
  cfg.input_len = input_len;
  cfg.summarization = {{8, 8, 4}};
  cfg.fc_sizes = {64, 32, 32};
  cfg.latent_dim = 32;
  cfg.dropout_p = 0.65;
  return cfg;
}

SynthRun criterion_synthetic_end_to_end() {
  auto t0 = std::chrono::steady_clock::now();
  SynthSpec spec;
  spec.n_rows = 100;
  spec.n_cols = 120;
  spec.rank = 3;
  spec.density = 0.4;
  spec.noise_sd = 0.0;
  spec.seed = 123;
  SparseRatings data = make_synthetic(spec);
  AreaSplit split = make_split(data, SplitSpec{});  // protocol defaults

  NmcModel model = build_model(synth_branch(split.m_I), synth_branch(split.n_I),
                               1.0, 5.0, 11);
  TrainConfig tc;
  tc.batch_size = 128;
  tc.max_epochs = 35;
  tc.patience = 100;
  tc.lr = 1e-3;
  tc.val_frac = 0.05;
  tc.seed = 1;
  train(model, data, split, tc);

  AreaMetrics nmc = evaluate(model, data, split);
  BaselineTrainSet ts = baseline_train_set(data, split);
  MeanBaseline mean(ts);
  AreaMetrics mb = evaluate_predictor(
      baseline_cell_predictor(mean, data, split), data, split);

  double secs = elapsed_s(t0);
  double ratio = nmc[Area::I].rmse / mb[Area::I].rmse;
  bool extend_ok = true;
  for (Area a : {Area::II, Area::III, Area::IV})
    extend_ok = extend_ok && nmc[a].rmse <= 1.5 * nmc[Area::I].rmse;
  char detail[240];
  std::snprintf(detail, sizeof detail,
                "area I RMSE %.4f vs mean baseline %.4f (ratio %.3f <= 0.5); "
                "II/III/IV %.4f/%.4f/%.4f vs 1.5x cap %.4f; %.0fs (< 300s)",
                nmc[Area::I].rmse, mb[Area::I].rmse, ratio, nmc[Area::II].rmse,
                nmc[Area::III].rmse, nmc[Area::IV].rmse,
                1.5 * nmc[Area::I].rmse, secs);
  report("synthetic end-to-end (NMC-S vs mean baseline)",
         ratio <= 0.5 && extend_ok && secs < 300.0, detail);
  return {std::move(data), std::move(split), std::move(model), nmc, mb};
}

void criterion_mf_oracle(const SynthRun& run) {
  BaselineTrainSet ts = baseline_train_set(run.data, run.split);
  MfConfig cfg;
  cfg.rank = 3;
  cfg.reg = 0.0;
  cfg.lr = 0.02;
  cfg.epochs = 300;
  cfg.seed = 1;
  MfModel mf(ts, cfg);
  double err = mf.train_rmse(ts);
  char detail[120];
  std::snprintf(detail, sizeof detail,
                "MF (r=3, reg=0) training RMSE %.4f (< 0.05)", err);
  report("baseline oracle on the data pipeline", err < 0.05, detail);
}

void criterion_locality(SynthRun& run) {
  const SparseRatings& data = run.data;
  const AreaSplit& split = run.split;
  ExcludeMask mask = heldout_mask(split);

  // held-out cells to probe
  std::vector<std::uint32_t> heldout;
  for (std::uint32_t k = 0; k < split.assignment.size(); ++k)
    if (split.assignment[k].role == Role::heldout) heldout.push_back(k);

  std::vector<double> before(heldout.size());
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    const RatingEntry& e = data.entries[heldout[i]];
    before[i] = run.model.predict(data, split, e.row, e.col, mask);
  }

  // perturb every observed area-(IV) entry in turn is expensive; flipping
  // one at a time over a sample and re-checking all predictions is already
  // a strict test of the truncation rule
  std::vector<std::uint32_t> area4;
  for (std::uint32_t k = 0; k < split.assignment.size(); ++k)
    if (split.assignment[k].area == Area::IV &&
        split.assignment[k].role == Role::observed)
      area4.push_back(k);

  bool predictions_fixed = !area4.empty();
  SparseRatings mutated = data;
  std::size_t probes = std::min<std::size_t>(area4.size(), 20);
  for (std::size_t p = 0; p < probes && predictions_fixed; ++p) {
    double& v = mutated.entries[area4[p]].value;
    double saved = v;
    v = v < 3.0 ? 5.0 : 1.0;
    for (std::size_t i = 0; i < heldout.size(); ++i) {
      const RatingEntry& e = data.entries[heldout[i]];
      if (run.model.predict(mutated, split, e.row, e.col, mask) != before[i]) {
        predictions_fixed = false;
        break;
      }
    }
    v = saved;
  }

  // perturbing any held-out entry must leave every input vector unchanged
  bool inputs_fixed = true;
  SparseRatings held_mut = data;
  std::size_t hprobes = std::min<std::size_t>(heldout.size(), 200);
  for (std::size_t p = 0; p < hprobes && inputs_fixed; ++p) {
    const RatingEntry& e = data.entries[heldout[p]];
    auto row_before = row_input(data, split, e.row, mask);
    auto col_before = col_input(data, split, e.col, mask);
    double& v = held_mut.entries[heldout[p]].value;
    double saved = v;
    v = v < 3.0 ? 5.0 : 1.0;
    inputs_fixed = row_input(held_mut, split, e.row, mask) == row_before &&
                   col_input(held_mut, split, e.col, mask) == col_before;
    v = saved;
  }

  char detail[200];
  std::snprintf(detail, sizeof detail,
                "%zu area-(IV) perturbations left all %zu held-out "
                "predictions bitwise unchanged: %s; %zu held-out "
                "perturbations left input vectors unchanged: %s",
                probes, heldout.size(), predictions_fixed ? "yes" : "NO",
                hprobes, inputs_fixed ? "yes" : "NO");
  report("extendability leakage/locality", predictions_fixed && inputs_fixed,
         detail);
}

// ---- criterion 6: CLI determinism -------------------------------------

int run_cmd(const std::string& cmd) {
  int rc = std::system(cmd.c_str());
  return rc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_cli_determinism(const std::string& cli) {
  fs::path dir = fs::temp_directory_path() / "nmc_acceptance";
  fs::create_directories(dir);

  fs::path cfg_path = dir / "train.cfg";
  {
    std::ofstream cfg(cfg_path);
    cfg << "row.summ = 4:6:3\n"
        << "col.summ = 4:6:3\n"
        << "row.fc = 16,8\n"
        << "col.fc = 16,8\n"
        << "batch_size = 64\n"
        << "max_epochs = 8\n"
        << "patience = 20\n"
        << "lr = 0.002\n"
        << "seed = 2\n";
  }
  fs::path ratings = dir / "ratings.csv";
  std::string synth = cli + " synth --rows 60 --cols 50 --rank 2 --density 0.5"
                            " --seed 3 --out " + ratings.string() +
                      " > /dev/null";
  if (run_cmd(synth) != 0) {
    report("CLI determinism", false, "synth command failed");
    return;
  }

  auto pipeline = [&](int run_id) -> std::string {
    fs::path split = dir / ("split" + std::to_string(run_id) + ".txt");
    fs::path model = dir / ("model" + std::to_string(run_id) + ".nmc");
    fs::path metrics = dir / ("metrics" + std::to_string(run_id) + ".csv");
    std::string c1 = cli + " split --input " + ratings.string() +
                     " --seed 5 --out " + split.string() + " > /dev/null";
    std::string c2 = cli + " train --data " + ratings.string() + " --split " +
                     split.string() + " --config " + cfg_path.string() +
                     " --out-model " + model.string() + " > /dev/null";
    std::string c3 = cli + " eval --model " + model.string() + " --data " +
                     ratings.string() + " --split " + split.string() +
                     " --out " + metrics.string() + " > /dev/null";
    if (run_cmd(c1) != 0 || run_cmd(c2) != 0 || run_cmd(c3) != 0) return "";
    return slurp(metrics);
  };

  std::string a = pipeline(1);
  std::string b = pipeline(2);
  bool ok = !a.empty() && a == b;
  char detail[120];
  std::snprintf(detail, sizeof detail,
                "two split+train+eval pipelines with identical seeds: metrics "
                "CSVs %s (%zu bytes)",
                ok ? "byte-identical" : "DIFFER", a.size());
  report("CLI determinism", ok, detail);
}

// ---- criterion 7: optional paper-number reproduction -------------------

void criterion_ml1m() {
  const char* path = std::getenv("NMC_ML1M");
  if (path == nullptr || std::string(path).empty()) {
    report_skip("ML-1M paper-number reproduction (optional)",
                "set NMC_ML1M to a MovieLens-1M ratings.dat to run the "
                "multi-hour reproduction; not desk-scale");
    return;
  }
  auto t0 = std::chrono::steady_clock::now();
  SparseRatings data = load_ratings(path, RatingsFormat::movielens_dat);
  AreaSplit split = make_split(data, SplitSpec{});

  BranchConfig row;
  row.input_len = split.m_I;
  row.summarization = {{32, 32, 16}};
  row.fc_sizes = {2048, 1024, 1024};
  row.latent_dim = 1024;
  row.dropout_p = 0.6;
  BranchConfig col = row;
  col.input_len = split.n_I;
  col.summarization = {{32, 48, 24}};

  NmcModel model = build_model(row, col, 1.0, 5.0, 1);
  TrainConfig tc;
  tc.batch_size = 512;
  tc.max_epochs = 200;
  tc.patience = 10;
  tc.seed = 1;
  tc.verbose = true;
  train(model, data, split, tc);
  AreaMetrics m = evaluate(model, data, split);

  const double target_rmse[4] = {0.850, 0.883, 0.864, 0.904};
  const double target_mae_1 = 0.675;
  bool ok = std::abs(m[Area::I].mae - target_mae_1) <= 0.05;
  static const Area order[4] = {Area::I, Area::II, Area::III, Area::IV};
  for (int i = 0; i < 4; ++i)
    ok = ok && std::abs(m[order[i]].rmse - target_rmse[i]) <= 0.05;
  char detail[240];
  std::snprintf(detail, sizeof detail,
                "RMSE I/II/III/IV %.3f/%.3f/%.3f/%.3f vs 0.850/0.883/0.864/"
                "0.904 (+/-0.05), MAE(I) %.3f vs 0.675; %.0fs",
                m[Area::I].rmse, m[Area::II].rmse, m[Area::III].rmse,
                m[Area::IV].rmse, m[Area::I].mae, elapsed_s(t0));
  report("ML-1M paper-number reproduction (optional)", ok, detail);
}

// ---- criterion 8: metric sanity ----------------------------------------

void criterion_metric_sanity() {
  SparseRatings data = make_synthetic({600, 600, 1, 0.75, 0.0, 77, 1.0, 5.0});
  Rng rng(78);
  for (auto& e : data.entries)
    e.value = static_cast<double>(1 + rng.below(5));
  AreaSplit split = make_split(data, SplitSpec{});

  AreaMetrics m = evaluate_predictor(
      [](std::size_t, std::size_t) { return 3.0; }, data, split);
  std::size_t heldout = 0;
  for (int i = 0; i < 4; ++i) heldout += m.per_area[i].count;

  const double target = std::sqrt(2.0);
  bool ok = heldout >= 10000;
  double worst_dev = 0.0;
  for (int i = 0; i < 4; ++i) {
    worst_dev = std::max(worst_dev, std::abs(m.per_area[i].rmse - target));
    ok = ok && std::abs(m.per_area[i].rmse - target) <= 0.05;
  }
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "constant-midpoint predictor on uniform {1..5}: %zu held-out "
                "entries, worst |RMSE - sqrt(2)| = %.4f (<= 0.05)",
                heldout, worst_dev);
  report("metric sanity (closed-form evaluator check)", ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli = argc > 1 ? argv[1] : "";
  set_num_threads(1);

  criterion_gradients();
  criterion_scaling();
  SynthRun run = criterion_synthetic_end_to_end();
  criterion_mf_oracle(run);
  criterion_locality(run);
  if (cli.empty())
    report("CLI determinism", false,
           "no CLI path given (pass the nmc binary as argv[1])");
  else
    criterion_cli_determinism(cli);
  criterion_ml1m();
  criterion_metric_sanity();

  if (g_failures == 0) {
    std::printf("all acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d criterion(s) failed\n", g_failures);
  return 1;
}
