// scratch: convergence check — final train loss on noiseless rank-3 data
#include <cstdio>
#include "nmc/nmc.hpp"

using namespace nmc;

int main() {
  SynthSpec spec;
  spec.n_rows = 100; spec.n_cols = 120; spec.rank = 3;
  spec.density = 0.4; spec.noise_sd = 0.0; spec.seed = 123;
  SparseRatings data = make_synthetic(spec);
  AreaSplit split = make_split(data, SplitSpec{});

  auto branch = [&](std::size_t len) {
    BranchConfig cfg;
    cfg.input_len = len;
    cfg.summarization = {{8, 8, 4}};
    cfg.fc_sizes = {64, 32, 32};
    cfg.latent_dim = 32;
    cfg.dropout_p = 0.0;
    return cfg;
  };
  NmcModel model = build_model(branch(split.m_I), branch(split.n_I), 1.0, 5.0, 11);
  TrainConfig tc;
  tc.batch_size = 128;
  tc.max_epochs = 200;
  tc.patience = 1000;
  tc.lr = 1e-3;
  tc.val_frac = 0.05;
  tc.seed = 1;
  TrainHistory h = train(model, data, split, tc);
  std::printf("epochs=%zu final_train_loss=%.6f min=%.6f\n", h.epochs.size(),
              h.epochs.back().train_loss,
              [&]{ double m = 1e9; for (auto& e : h.epochs) m = std::min(m, e.train_loss); return m; }());
  return 0;
}
