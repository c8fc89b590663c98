#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "nmc/evaluator.hpp"
#include "nmc/gradcheck.hpp"
#include "nmc/model.hpp"
#include "nmc/synth.hpp"

using namespace nmc;

namespace {

BranchConfig small_branch(std::size_t input_len, double dropout = 0.0) {
  BranchConfig cfg;
  cfg.input_len = input_len;
  cfg.summarization = {{2, 4, 3}};
  cfg.fc_sizes = {10, 8};
  cfg.latent_dim = 8;
  cfg.dropout_p = dropout;
  return cfg;
}

// Random batch with inputs drawn from the scaled rating range.
PairBatch random_batch(std::size_t b, std::size_t m, std::size_t n,
                       std::uint64_t seed) {
  Rng rng(seed);
  PairBatch batch;
  batch.rows = Tensor2(b, m);
  batch.cols = Tensor2(b, n);
  batch.targets.resize(b);
  for (double& v : batch.rows.data) v = rng.uniform01() * 2.0 - 1.0;
  for (double& v : batch.cols.data) v = rng.uniform01() * 2.0 - 1.0;
  for (double& t : batch.targets) t = rng.uniform01() * 2.0 - 1.0;
  return batch;
}

}  // namespace

TEST_CASE("cosine head") {
  SECTION("self-similarity is 1") {
    std::vector<double> u{3.0, 4.0};
    CHECK(cosine_similarity(u, u, 1e-8).value == Catch::Approx(1.0));
  }

  SECTION("orthogonal vectors give 0") {
    std::vector<double> u{1.0, 0.0}, v{0.0, 1.0};
    CHECK(cosine_similarity(u, v, 1e-8).value == Catch::Approx(0.0));
  }

  SECTION("antiparallel vectors give -1") {
    std::vector<double> u{1.0, 0.0}, v{-2.0, 0.0};
    CHECK(cosine_similarity(u, v, 1e-8).value == Catch::Approx(-1.0));
  }

  SECTION("scale invariance") {
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      std::vector<double> u(6), w(6);
      for (std::size_t k = 0; k < 6; ++k) u[k] = rng.normal();
      double c = 0.1 + 5.0 * rng.uniform01();
      for (std::size_t k = 0; k < 6; ++k) w[k] = c * u[k];
      REQUIRE(cosine_similarity(u, w, 1e-8).value == Catch::Approx(1.0));
    }
  }

  SECTION("norms under the floor fall back to the scaled midpoint") {
    std::vector<double> u{1e-12, 0.0}, v{1.0, 1.0};
    CHECK(cosine_similarity(u, v, 1e-8).value == 0.0);
  }

  SECTION("output stays in [-1, 1] for random vectors") {
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
      std::vector<double> u(4), v(4);
      for (auto& x : u) x = rng.normal();
      for (auto& x : v) x = rng.normal();
      double c = cosine_similarity(u, v, 1e-8).value;
      REQUIRE(c >= -1.0 - 1e-12);
      REQUIRE(c <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("model construction") {
  SECTION("mismatched latent dimensions are rejected") {
    BranchConfig a = small_branch(20);
    BranchConfig b = small_branch(15);
    b.fc_sizes = {10, 4};
    b.latent_dim = 4;
    CHECK_THROWS_AS(build_model(a, b, 1.0, 5.0, 0), config_error);
  }

  SECTION("summarization shorter than the kernel is rejected") {
    BranchConfig a = small_branch(3);  // kernel is 4
    CHECK_THROWS_AS(build_model(a, small_branch(15), 1.0, 5.0, 0),
                    config_error);
  }

  SECTION("last fc size must match latent_dim") {
    BranchConfig a = small_branch(20);
    a.latent_dim = 5;
    CHECK_THROWS_AS(build_model(a, small_branch(15), 1.0, 5.0, 0),
                    config_error);
  }

  SECTION("same seed builds identical parameters") {
    NmcModel m1 = build_model(small_branch(20), small_branch(15), 1.0, 5.0, 42);
    NmcModel m2 = build_model(small_branch(20), small_branch(15), 1.0, 5.0, 42);
    CHECK(m1.snapshot() == m2.snapshot());
  }
}

TEST_CASE("embeddings") {
  NmcModel model = build_model(small_branch(20), small_branch(15), 1.0, 5.0, 1);
  Rng rng(0);

  SECTION("zero input still yields a finite latent vector") {
    std::vector<double> zero(20, 0.0);
    auto u = model.embed_row(zero, Mode::infer, rng);
    REQUIRE(u.size() == 8);
    for (double v : u) REQUIRE(std::isfinite(v));
  }

  SECTION("inference is deterministic") {
    std::vector<double> x(20);
    Rng gen(4);
    for (auto& v : x) v = gen.normal();
    auto a = model.embed_row(x, Mode::infer, rng);
    auto b = model.embed_row(x, Mode::infer, rng);
    CHECK(a == b);
  }

  SECTION("train-mode dropout makes draws differ") {
    // dropout sits after all but the last hidden layer, so the branch needs
    // at least two hidden layers for it to appear
    BranchConfig cfg = small_branch(20, 0.5);
    cfg.fc_sizes = {12, 10, 8};
    NmcModel dropped = build_model(cfg, small_branch(15, 0.5), 1.0, 5.0, 1);
    PairBatch batch = random_batch(4, 20, 15, 8);
    Rng r1(100);
    Tensor2 a = dropped.embed_rows(batch.rows, Mode::train, r1);
    Tensor2 b = dropped.embed_rows(batch.rows, Mode::train, r1);
    CHECK(a.data != b.data);
  }

  SECTION("wrong input length throws") {
    std::vector<double> x(19, 0.0);
    CHECK_THROWS_AS(model.embed_row(x, Mode::infer, rng), shape_error);
  }
}

TEST_CASE("loss_and_grads") {
  NmcModel model = build_model(small_branch(20), small_branch(15), 1.0, 5.0, 2);

  SECTION("matches the mean of squared residuals") {
    PairBatch batch = random_batch(4, 20, 15, 21);
    Rng rng(0);
    model.zero_grad();
    LossGrads lg = model.loss_and_grads(batch, rng);
    CHECK(lg.loss >= 0.0);
    CHECK(std::isfinite(lg.loss));
    CHECK(lg.d_rows.rows == 4);
    CHECK(lg.d_rows.cols == 20);
  }

  SECTION("batch of one trips the batch-norm guard") {
    PairBatch batch = random_batch(1, 20, 15, 22);
    Rng rng(0);
    CHECK_THROWS_AS(model.loss_and_grads(batch, rng), shape_error);
  }

  SECTION("empty batch is rejected") {
    PairBatch batch;
    Rng rng(0);
    CHECK_THROWS_AS(model.loss_and_grads(batch, rng), config_error);
  }

  SECTION("end-to-end gradients match finite differences") {
    PairBatch batch = random_batch(4, 20, 15, 23);
    CHECK(grad_check_model(model, batch) <= 1e-4);
  }
}

TEST_CASE("prediction") {
  SparseRatings data = make_synthetic({30, 25, 2, 0.5, 0.0, 13, 1.0, 5.0});
  SplitSpec spec;
  spec.seed = 5;
  AreaSplit split = make_split(data, spec);
  NmcModel model = build_model(small_branch(split.m_I),
                               small_branch(split.n_I), 1.0, 5.0, 3);
  ExcludeMask mask = heldout_mask(split);

  SECTION("always lands inside the rating bounds") {
    for (std::size_t row = 0; row < data.n_rows; row += 3)
      for (std::size_t col = 0; col < data.n_cols; col += 3) {
        double p = model.predict(data, split, row, col, mask);
        REQUIRE(p >= 1.0);
        REQUIRE(p <= 5.0);
      }
  }

  SECTION("repeated calls agree bitwise") {
    double a = model.predict(data, split, 1, 2, mask);
    double b = model.predict(data, split, 1, 2, mask);
    CHECK(a == b);
  }

  SECTION("out-of-bounds cells are rejected") {
    CHECK_THROWS_AS(model.predict(data, split, data.n_rows, 0, mask),
                    config_error);
  }

  SECTION("zero-information inputs predict the midpoint") {
    // a model with an all-zero row input and all-zero column input: embed
    // the zero vectors; with He-initialized biases at zero the convolution
    // output is constant, but the final prediction must still be finite and
    // inside bounds. The guaranteed midpoint case is the cosine fallback.
    std::vector<double> u(8, 0.0), v(8, 1.0);
    ScaledValue c = cosine_similarity(u, v, 1e-8);
    CHECK(unscale_rating(c, 1.0, 5.0) == Catch::Approx(3.0));
  }

  SECTION("area (IV) observations never influence predictions") {
    // find an observed area-(IV) entry and perturb it
    std::size_t target = split.assignment.size();
    for (std::size_t k = 0; k < split.assignment.size(); ++k)
      if (split.assignment[k].area == Area::IV &&
          split.assignment[k].role == Role::observed) {
        target = k;
        break;
      }
    REQUIRE(target < split.assignment.size());

    std::vector<double> before;
    for (std::size_t row = 0; row < data.n_rows; row += 2)
      for (std::size_t col = 0; col < data.n_cols; col += 2)
        before.push_back(model.predict(data, split, row, col, mask));

    SparseRatings mutated = data;
    double& val = mutated.entries[target].value;
    val = val < 3.0 ? 5.0 : 1.0;

    std::size_t idx = 0;
    for (std::size_t row = 0; row < data.n_rows; row += 2)
      for (std::size_t col = 0; col < data.n_cols; col += 2)
        REQUIRE(model.predict(mutated, split, row, col, mask) ==
                before[idx++]);
  }
}

TEST_CASE("checkpoint round trip") {
  SparseRatings data = make_synthetic({25, 20, 2, 0.5, 0.0, 17, 1.0, 5.0});
  SplitSpec spec;
  spec.seed = 6;
  AreaSplit split = make_split(data, spec);
  NmcModel model = build_model(small_branch(split.m_I, 0.25),
                               small_branch(split.n_I, 0.25), 1.0, 5.0, 4);
  ExcludeMask mask = heldout_mask(split);

  auto path =
      (std::filesystem::temp_directory_path() / "nmc_test_model.nmc").string();
  save_model(model, path);
  NmcModel loaded = load_model(path);

  SECTION("parameters and running statistics are bitwise identical") {
    CHECK(loaded.snapshot() == model.snapshot());
    CHECK(loaded.alpha() == model.alpha());
    CHECK(loaded.beta() == model.beta());
    CHECK(loaded.row_config().input_len == model.row_config().input_len);
    CHECK(loaded.row_config().dropout_p == model.row_config().dropout_p);
  }

  SECTION("predictions agree on 100 random cells") {
    Rng rng(31);
    for (int i = 0; i < 100; ++i) {
      std::size_t row = rng.below(data.n_rows);
      std::size_t col = rng.below(data.n_cols);
      REQUIRE(model.predict(data, split, row, col, mask) ==
              loaded.predict(data, split, row, col, mask));
    }
  }

  SECTION("wrong magic is rejected") {
    auto bad = (std::filesystem::temp_directory_path() / "nmc_test_bad.nmc").string();
    std::ofstream out(bad, std::ios::binary);
    out << "XYZ1 something that is not a model";
    out.close();
    CHECK_THROWS_AS(load_model(bad), parse_error);
  }

  SECTION("truncation is detected") {
    std::ifstream in(path, std::ios::binary);
    std::string blob((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    auto bad =
        (std::filesystem::temp_directory_path() / "nmc_test_trunc.nmc").string();
    std::ofstream out(bad, std::ios::binary);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size() - 17));
    out.close();
    CHECK_THROWS_AS(load_model(bad), parse_error);
  }

  SECTION("payload corruption fails the checksum") {
    std::ifstream in(path, std::ios::binary);
    std::string blob((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    blob[blob.size() / 2] ^= 0x40;
    auto bad =
        (std::filesystem::temp_directory_path() / "nmc_test_corrupt.nmc").string();
    std::ofstream out(bad, std::ios::binary);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    out.close();
    CHECK_THROWS_WITH(load_model(bad),
                      Catch::Matchers::ContainsSubstring("checksum"));
  }
}
