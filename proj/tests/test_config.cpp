#include "rds/config.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

using namespace rds;
using nlohmann::json;

TEST(HexFloat, RoundTripsBitExactly) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    const std::string s = hex_double(v);
    EXPECT_EQ(parse_double(json(s), "x"), v) << s;
  }
  EXPECT_EQ(hex_double(1.0), "0x1p+0");
  EXPECT_EQ(parse_double(json(0.25), "x"), 0.25);
  EXPECT_THROW(parse_double(json("0x1.g"), "x"), ConfigError);
  EXPECT_THROW(parse_double(json(true), "x"), ConfigError);
}

TEST(Config, JsonRoundTripIsLossless) {
  ExperimentConfig cfg;
  cfg.dt = 0.1;
  cfg.T = 0.3;
  cfg.block = 0.7;
  cfg.system.id = "ou";
  cfg.system.params["lambda"] = 0.1;
  cfg.manifold.beta = 0.3;
  cfg.x0 = {0.1, -0.2};
  const json j = to_json(cfg);
  const ExperimentConfig back = config_from_json(j);
  EXPECT_EQ(back.dt, cfg.dt);
  EXPECT_EQ(back.T, cfg.T);
  EXPECT_EQ(back.block, cfg.block);
  EXPECT_EQ(back.system.params.at("lambda"), 0.1);
  EXPECT_EQ(*back.manifold.beta, 0.3);
  EXPECT_EQ(back.x0, cfg.x0);
  EXPECT_EQ(to_json(back).dump(), j.dump());
  EXPECT_EQ(config_hash(back), config_hash(cfg));
}

TEST(Config, AffineSystemRoundTrip) {
  ExperimentConfig cfg;
  cfg.system.id = "affine";
  cfg.system.A = (Matrix(2, 2) << 0.5, 0.0, 0.0, -1.0 / 3.0).finished();
  cfg.system.G = Matrix::Identity(2, 2) * 0.1;
  cfg.system.c = Vector::Zero(2);
  const ExperimentConfig back = config_from_json(to_json(cfg));
  EXPECT_EQ(back.system.A, cfg.system.A);
  EXPECT_EQ(back.system.G, cfg.system.G);
  EXPECT_NO_THROW(validate_config(back));
}

TEST(Config, HashChangesWithContent) {
  ExperimentConfig a, b;
  b.seed_base = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  // run location and thread count do not enter the hash
  b = a;
  b.out = "elsewhere";
  b.threads = 4;
  EXPECT_EQ(config_hash(a), config_hash(b));
}

TEST(Config, UnknownKeysRejectedWithFieldName) {
  json j = to_json(ExperimentConfig{});
  j["manifold"]["rhoo"] = 1;
  try {
    config_from_json(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("manifold.rhoo"), std::string::npos) << e.what();
  }
  json v = to_json(ExperimentConfig{});
  v["schema_version"] = 99;
  EXPECT_THROW(config_from_json(v), ConfigError);
}

TEST(Config, PartialConfigUsesDefaults) {
  const ExperimentConfig c = config_from_json(json::parse(R"({"system": {"id": "ou"}, "T": 2.0})"));
  EXPECT_EQ(c.T, 2.0);
  EXPECT_EQ(c.dt, 0.01);
  EXPECT_EQ(c.manifold.N, 20);
}

TEST(Config, ValidationNamesField) {
  ExperimentConfig c;
  c.system.id = "nope";
  EXPECT_THROW(validate_config(c), ConfigError);
  c = ExperimentConfig{};
  c.T = 0.005;
  try {
    validate_config(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("T"), std::string::npos);
  }
  c = ExperimentConfig{};
  c.seeds = 0;
  EXPECT_THROW(validate_config(c), ConfigError);
}

TEST(Config, LoadFromFile) {
  const std::string path = ::testing::TempDir() + "cfg.json";
  std::ofstream(path) << R"({"system": {"id": "gbm", "params": {"sigma": "0x1p-1"}}, "seeds": 3})";
  const ExperimentConfig c = load_config(path);
  EXPECT_EQ(c.system.params.at("sigma"), 0.5);
  EXPECT_EQ(c.seeds, 3);
  EXPECT_THROW(load_config(path + ".missing"), ConfigError);
}
