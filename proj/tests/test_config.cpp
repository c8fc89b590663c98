#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "nmc/config.hpp"

using namespace nmc;

namespace {

std::string temp_config(const std::string& name, const std::string& content) {
  auto path = std::filesystem::temp_directory_path() / ("nmc_cfg_" + name);
  std::ofstream out(path);
  out << content;
  return path.string();
}

}  // namespace

TEST_CASE("key=value parsing") {
  auto path = temp_config("basic.cfg",
                          "# training setup\n"
                          "lr = 0.005\n"
                          "batch_size=128   # inline comment\n"
                          "\n"
                          "row.fc = 64,32\n");
  KvConfig kv = KvConfig::from_file(path);
  CHECK(kv.get_double("lr", 0.0) == 0.005);
  CHECK(kv.get_u64("batch_size", 0) == 128);
  CHECK(kv.get_str("row.fc", "") == "64,32");
  CHECK(kv.get_str("missing", "fallback") == "fallback");

  SECTION("lines without '=' are rejected") {
    auto bad = temp_config("noeq.cfg", "just some words\n");
    CHECK_THROWS_AS(KvConfig::from_file(bad), parse_error);
  }

  SECTION("non-numeric values surface as config errors") {
    auto bad = temp_config("nan.cfg", "lr = fast\n");
    KvConfig b = KvConfig::from_file(bad);
    CHECK_THROWS_AS(b.get_double("lr", 0.0), config_error);
  }
}

TEST_CASE("unknown keys are rejected by name") {
  auto path = temp_config("unknown.cfg", "lr = 0.1\nlerning_rate = 0.2\n");
  KvConfig kv = KvConfig::from_file(path);
  CHECK_THROWS_WITH(RunConfig::from_kv(kv),
                    Catch::Matchers::ContainsSubstring("lerning_rate"));
}

TEST_CASE("run config resolves branch recipes") {
  auto path = temp_config("run.cfg",
                          "row.summ = 8:8:4\n"
                          "col.summ = 8:8:4,4:4:2\n"
                          "row.fc = 64,32\n"
                          "col.fc = 64,32\n"
                          "dropout = 0.25\n"
                          "batch_size = 32\n"
                          "seed = 9\n");
  RunConfig rc = RunConfig::from_kv(KvConfig::from_file(path));

  SECTION("latent dimension defaults to the last hidden width") {
    BranchConfig row = rc.row_branch(96);
    CHECK(row.input_len == 96);
    CHECK(row.fc_sizes == std::vector<std::size_t>{64, 32, 32});
    CHECK(row.latent_dim == 32);
    CHECK(row.dropout_p == 0.25);
    REQUIRE(row.summarization.size() == 1);
    CHECK(row.summarization[0].filters == 8);
    CHECK(row.summarization[0].kernel == 8);
    CHECK(row.summarization[0].stride == 4);
    CHECK(rc.col_branch(80).summarization.size() == 2);
  }

  SECTION("explicit latent_dim is appended to the hidden stack") {
    KvConfig kv = KvConfig::from_file(path);
    kv.set("latent_dim", "16");
    RunConfig with_latent = RunConfig::from_kv(kv);
    BranchConfig row = with_latent.row_branch(96);
    CHECK(row.fc_sizes == std::vector<std::size_t>{64, 32, 16});
    CHECK(row.latent_dim == 16);
  }

  SECTION("train settings flow through") {
    CHECK(rc.train.batch_size == 32);
    CHECK(rc.train.seed == 9);
    CHECK(rc.train.lr == 1e-3);  // default untouched
  }

  SECTION("malformed summarization stages are rejected") {
    KvConfig kv = KvConfig::from_file(path);
    kv.set("row.summ", "8x8x4");
    CHECK_THROWS_AS(RunConfig::from_kv(kv), parse_error);
  }
}
