// scratch diagnostic: locate the worst finite-difference coordinate
#include <cstdio>
#include <cmath>
#include "nmc/nmc.hpp"

using namespace nmc;

Tensor2 random_tensor(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng g(seed);
  Tensor2 t(r, c);
  for (double& v : t.data) v = g.normal();
  return t;
}

int main() {
  BranchConfig row_cfg;
  row_cfg.input_len = 20;
  row_cfg.summarization = {{2, 4, 3}};
  row_cfg.fc_sizes = {10, 8};
  row_cfg.latent_dim = 8;
  BranchConfig col_cfg = row_cfg;
  col_cfg.input_len = 15;
  NmcModel model = build_model(row_cfg, col_cfg, 1.0, 5.0, 2);
  PairBatch batch;
  Rng rng(21);
  batch.rows = Tensor2(4, 20);
  batch.cols = Tensor2(4, 15);
  batch.targets.resize(4);
  for (double& v : batch.rows.data) v = rng.uniform01() * 2.0 - 1.0;
  for (double& v : batch.cols.data) v = rng.uniform01() * 2.0 - 1.0;
  for (double& t : batch.targets) t = rng.uniform01() * 2.0 - 1.0;

  Rng r0(0);
  model.zero_grad();
  LossGrads lg = model.loss_and_grads(batch, r0);

  struct Saved { ParamView view; std::vector<double> grads; };
  std::vector<Saved> saved;
  for (auto& v : model.trainable_views())
    saved.push_back({v, std::vector<double>(v.grad, v.grad + v.size)});

  auto loss_only = [&]() {
    Rng r(0);
    return model.loss_and_grads(batch, r, false).loss;
  };

  double worst = 0.0;
  std::string worst_name;
  std::size_t worst_i = 0;
  double worst_a = 0, worst_n = 0;
  for (auto& s : saved) {
    for (std::size_t i = 0; i < s.view.size; ++i) {
      for (double h : {1e-5}) {
        double num = central_diff(loss_only, s.view.value[i], h);
        double e = grad_rel_err(s.grads[i], num);
        if (e > worst) {
          worst = e; worst_name = s.view.name; worst_i = i;
          worst_a = s.grads[i]; worst_n = num;
        }
      }
    }
  }
  printf("worst param: %s[%zu] rel=%.3e analytic=%.6e numeric=%.6e\n",
         worst_name.c_str(), worst_i, worst, worst_a, worst_n);

  // try multiple h on the worst coordinate
  for (auto& s : saved) {
    if (s.view.name != worst_name) continue;
    for (double h : {1e-3, 1e-4, 1e-5, 1e-6, 1e-7}) {
      double num = central_diff(loss_only, s.view.value[worst_i], h);
      printf("  h=%.0e numeric=%.10e rel=%.3e\n", h, num,
             grad_rel_err(s.grads[worst_i], num));
    }
    break;
  }

  double worst_in = 0.0;
  for (std::size_t i = 0; i < batch.rows.data.size(); ++i) {
    double num = central_diff(loss_only, batch.rows.data[i], 1e-5);
    worst_in = std::max(worst_in, grad_rel_err(lg.d_rows.data[i], num));
  }
  printf("worst row-input rel=%.3e\n", worst_in);
  return 0;
}
