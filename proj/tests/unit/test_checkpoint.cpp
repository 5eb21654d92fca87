#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "ragaseq/checkpoint.hpp"

using namespace ragaseq;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ragaseq_" + name);
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.vocab_size = 11;
  cfg.embed_dim = 4;
  cfg.lstm_hidden = 6;
  cfg.attention_dim = 5;
  cfg.dense1_units = 7;
  cfg.n_classes = 3;
  return cfg;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-identical") {
  const auto cfg = small_config();
  Rng rng(12);
  auto params = ModelParams::initialize(cfg, rng);
  params.bn_running_mean.setConstant(0.25f);
  const auto path = temp_file("roundtrip.ckpt");
  save_checkpoint(path, cfg, params);

  const auto loaded = load_checkpoint(path);
  CHECK(loaded.config == cfg);
  const auto a = params.all();
  const auto b = loaded.params.all();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].value == *b[i].value);

  const std::vector<int> seq{3, 4, 10, 2};
  const auto before = forward_classifier(params, cfg, seq, Mode::eval).probs;
  const auto after = forward_classifier(loaded.params, cfg, seq, Mode::eval).probs;
  CHECK(before == after);
}

TEST_CASE("checkpoint load rejects a different config") {
  const auto cfg = small_config();
  Rng rng(1);
  const auto path = temp_file("mismatch.ckpt");
  save_checkpoint(path, cfg, ModelParams::initialize(cfg, rng));
  auto other = cfg;
  other.n_classes = 4;
  CHECK_THROWS_AS(load_checkpoint(path, other), Error);
  CHECK_NOTHROW(load_checkpoint(path, cfg));
}

TEST_CASE("checkpoint load detects corruption") {
  const auto cfg = small_config();
  Rng rng(1);
  const auto path = temp_file("corrupt.ckpt");
  save_checkpoint(path, cfg, ModelParams::initialize(cfg, rng));
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(200);
    char c = 0;
    f.read(&c, 1);
    f.seekp(200);
    c = static_cast<char>(c ^ 0x40);
    f.write(&c, 1);
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("checksum"), Error);
  std::ofstream(temp_file("garbage.ckpt")) << "not a checkpoint at all";
  CHECK_THROWS_AS(load_checkpoint(temp_file("garbage.ckpt")), Error);
}

TEST_CASE("config JSON survives a round trip") {
  auto cfg = small_config();
  cfg.embedding_head = true;
  cfg.embedding_dim = 600;
  cfg.dropout_rate = 0.125;
  CHECK(config_from_json(config_to_json(cfg)) == cfg);
  CHECK_THROWS_AS(config_from_json("{\"vocab_size\": 3}"), Error);
}
