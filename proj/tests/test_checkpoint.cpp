#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bigcf/checkpoint.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace bigcf;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / name;
}

ModelParams tiny_params(const TrainConfig& cfg, Rng& rng) {
  return init_params(cfg, 6, 9, rng);
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact") {
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.intents = 3;
  cfg.lambda1 = 0.35;
  cfg.seed = 777;
  cfg.variant = Variant::wo_hnr;
  Rng rng(91);
  ModelParams p = tiny_params(cfg, rng);

  const auto path = temp_file("bigcf_ck_roundtrip.bin");
  save_checkpoint(path.string(), p, cfg);
  const Checkpoint ck = load_checkpoint(path.string());

  // float32 storage: loading twice and re-saving must be byte-identical
  const auto path2 = temp_file("bigcf_ck_roundtrip2.bin");
  save_checkpoint(path2.string(), ck.params, ck.config);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), {});
  const std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
  CHECK_FALSE(b1.empty());

  // and the in-memory arrays equal the float32 cast of the originals
  for (std::size_t i = 0; i < p.e0.v.size(); ++i)
    CHECK(ck.params.e0.v[i] == static_cast<double>(static_cast<float>(p.e0.v[i])));
  CHECK(ck.params.num_users == 6);
  CHECK(ck.params.num_items == 9);
  CHECK(ck.config.lambda1 == cfg.lambda1);
  CHECK(ck.config.variant == Variant::wo_hnr);
  CHECK(ck.config.seed == 777);
}

TEST_CASE("config echo carries the documented defaults") {
  TrainConfig cfg;  // defaults
  Rng rng(92);
  ModelParams p = tiny_params(cfg, rng);
  const auto path = temp_file("bigcf_ck_defaults.bin");
  save_checkpoint(path.string(), p, cfg);
  const Checkpoint ck = load_checkpoint(path.string());
  CHECK(ck.config_echo.at("dim") == "32");
  CHECK(ck.config_echo.at("batch-size") == "10240");
  CHECK(ck.config_echo.at("layers") == "2");
  CHECK(ck.config_echo.at("intents") == "64");
  CHECK(ck.config_echo.at("kappa") == "1");
  CHECK(ck.config.tau == 0.2);
  CHECK(ck.config.lambda2 == 1e-5);
}

TEST_CASE("corrupted magic is refused") {
  TrainConfig cfg;
  cfg.dim = 4;
  cfg.intents = 2;
  Rng rng(93);
  ModelParams p = tiny_params(cfg, rng);
  const auto path = temp_file("bigcf_ck_magic.bin");
  save_checkpoint(path.string(), p, cfg);
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.write("NOTACKPT", 8);
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(path.string()),
                       doctest::Contains("magic"), DataError);
}

TEST_CASE("truncated files are refused") {
  TrainConfig cfg;
  cfg.dim = 4;
  cfg.intents = 2;
  Rng rng(94);
  ModelParams p = tiny_params(cfg, rng);
  const auto path = temp_file("bigcf_ck_trunc.bin");
  save_checkpoint(path.string(), p, cfg);
  const auto full_size = fs::file_size(path);
  fs::resize_file(path, full_size / 2);
  CHECK_THROWS_AS(load_checkpoint(path.string()), DataError);
}

TEST_CASE("wrong version is refused") {
  TrainConfig cfg;
  cfg.dim = 4;
  cfg.intents = 2;
  Rng rng(95);
  ModelParams p = tiny_params(cfg, rng);
  const auto path = temp_file("bigcf_ck_version.bin");
  save_checkpoint(path.string(), p, cfg);
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(8);
    const char bad[4] = {(char)0xFF, 0, 0, 0};
    f.write(bad, 4);
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(path.string()),
                       doctest::Contains("version"), DataError);
}

TEST_CASE("config map round trip covers every key") {
  TrainConfig cfg;
  cfg.dim = 16;
  cfg.batch_size = 2048;
  cfg.layers = 3;
  cfg.intents = 8;
  cfg.kappa = 0.5;
  cfg.tau = 0.15;
  cfg.lambda1 = 0.4;
  cfg.lambda2 = 1e-4;
  cfg.kl_weight = 0.25;
  cfg.lr = 5e-4;
  cfg.max_epochs = 42;
  cfg.patience = 3;
  cfg.val_fraction = 0.05;
  cfg.seed = 123456789;
  cfg.variant = Variant::wo_pgr;
  cfg.noise_mode = NoiseMode::one;
  cfg.include_layer0 = false;
  cfg.gcr_reduction = Reduction::sum;
  const TrainConfig back = config_from_map(config_to_map(cfg));
  CHECK(back.dim == cfg.dim);
  CHECK(back.batch_size == cfg.batch_size);
  CHECK(back.layers == cfg.layers);
  CHECK(back.intents == cfg.intents);
  CHECK(back.kappa == cfg.kappa);
  CHECK(back.tau == cfg.tau);
  CHECK(back.lambda1 == cfg.lambda1);
  CHECK(back.lambda2 == cfg.lambda2);
  CHECK(back.kl_weight == cfg.kl_weight);
  CHECK(back.lr == cfg.lr);
  CHECK(back.max_epochs == cfg.max_epochs);
  CHECK(back.patience == cfg.patience);
  CHECK(back.val_fraction == cfg.val_fraction);
  CHECK(back.seed == cfg.seed);
  CHECK(back.variant == cfg.variant);
  CHECK(back.noise_mode == cfg.noise_mode);
  CHECK(back.include_layer0 == cfg.include_layer0);
  CHECK((back.gcr_reduction == cfg.gcr_reduction));
  CHECK_THROWS_AS(config_from_map({{"bogus", "1"}}), ConfigError);
}
