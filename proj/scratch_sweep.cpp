// scratch: sweep NMC-S hyperparameters on the acceptance synthetic task
#include <cstdio>
#include <cstdlib>
#include "nmc/nmc.hpp"

using namespace nmc;

int main(int argc, char** argv) {
  double dropout = argc > 1 ? std::atof(argv[1]) : 0.0;
  int fc1 = argc > 2 ? std::atoi(argv[2]) : 64;
  int fc2 = argc > 3 ? std::atoi(argv[3]) : 32;
  int epochs = argc > 4 ? std::atoi(argv[4]) : 300;
  int patience = argc > 5 ? std::atoi(argv[5]) : 25;
  double lr = argc > 6 ? std::atof(argv[6]) : 1e-3;
  std::uint64_t seed = argc > 7 ? std::strtoull(argv[7], nullptr, 10) : 11;
  int filters = argc > 8 ? std::atoi(argv[8]) : 8;
  int kernel = argc > 9 ? std::atoi(argv[9]) : 8;
  int stride = argc > 10 ? std::atoi(argv[10]) : 4;
  int batch = argc > 11 ? std::atoi(argv[11]) : 128;
  std::uint64_t data_seed = argc > 12 ? std::strtoull(argv[12], nullptr, 10) : 2024;
  std::uint64_t split_seed = argc > 13 ? std::strtoull(argv[13], nullptr, 10) : 0;
  std::uint64_t train_seed = argc > 14 ? std::strtoull(argv[14], nullptr, 10) : 1;

  SynthSpec spec;
  spec.n_rows = 100; spec.n_cols = 120; spec.rank = 3;
  spec.density = 0.4; spec.noise_sd = 0.0; spec.seed = data_seed;
  SparseRatings data = make_synthetic(spec);
  SplitSpec sp;
  sp.seed = split_seed;
  AreaSplit split = make_split(data, sp);

  auto branch = [&](std::size_t len) {
    BranchConfig cfg;
    cfg.input_len = len;
    cfg.summarization = {{static_cast<std::size_t>(filters), static_cast<std::size_t>(kernel), static_cast<std::size_t>(stride)}};
    cfg.fc_sizes = {static_cast<std::size_t>(fc1),
                    static_cast<std::size_t>(fc2),
                    static_cast<std::size_t>(fc2)};
    cfg.latent_dim = static_cast<std::size_t>(fc2);
    cfg.dropout_p = dropout;
    return cfg;
  };

  NmcModel model =
      build_model(branch(split.m_I), branch(split.n_I), 1.0, 5.0, seed);
  TrainConfig tc;
  tc.batch_size = static_cast<std::size_t>(batch);
  tc.max_epochs = static_cast<std::size_t>(epochs);
  tc.patience = static_cast<std::size_t>(patience);
  tc.lr = lr;
  tc.val_frac = 0.05;
  tc.seed = train_seed;
  TrainHistory h = train(model, data, split, tc);

  AreaMetrics nmc = evaluate(model, data, split);
  BaselineTrainSet ts = baseline_train_set(data, split);
  MeanBaseline mean(ts);
  AreaMetrics mb =
      evaluate_predictor(baseline_cell_predictor(mean, data, split), data, split);

  double r1 = nmc[Area::I].rmse / mb[Area::I].rmse;
  double worst_ext = 0.0;
  for (Area a : {Area::II, Area::III, Area::IV})
    worst_ext = std::max(worst_ext, nmc[a].rmse / nmc[Area::I].rmse);
  std::printf(
      "ds=%llu ss=%llu ms=%llu ts=%llu drop=%.2f fc=%d/%d ep=%d summ=%dx%ds%d | "
      "I=%.4f II=%.4f III=%.4f IV=%.4f base=%.4f | ratioI=%.3f worstExt=%.3f %s\n",
      static_cast<unsigned long long>(data_seed),
      static_cast<unsigned long long>(split_seed),
      static_cast<unsigned long long>(seed),
      static_cast<unsigned long long>(train_seed), dropout, fc1, fc2, epochs,
      filters, kernel, stride, nmc[Area::I].rmse, nmc[Area::II].rmse,
      nmc[Area::III].rmse, nmc[Area::IV].rmse, mb[Area::I].rmse, r1, worst_ext,
      (r1 <= 0.5 && worst_ext <= 1.5) ? "OK" : "no");
  return 0;
}
