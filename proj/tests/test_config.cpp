#include <gtest/gtest.h>

#include "dnrnn/config.hpp"

using namespace dnrnn;

TEST(Toml, ScalarsArraysTables) {
  const auto t = toml::parse(R"(# comment
a = 1
b = -2.5e-3
c = "x \"y\"\tz"
d = true
e = [1, 2,
     3]   # trailing
[sec]
k = 'lit\eral'
[[items]]
v = 1
[[items]]
v = 2
)");
  EXPECT_EQ(t.at("a").integer(), 1);
  EXPECT_DOUBLE_EQ(t.at("b").number(), -2.5e-3);
  EXPECT_EQ(t.at("c").string(), "x \"y\"\tz");
  EXPECT_TRUE(t.at("d").is_bool());
  EXPECT_EQ(t.at("e").array().size(), 3u);
  EXPECT_EQ(t.at("sec").table().at("k").string(), "lit\\eral");
  ASSERT_EQ(t.at("items").array().size(), 2u);
  EXPECT_EQ(t.at("items").array()[1].table().at("v").integer(), 2);
}

TEST(Toml, Errors) {
  EXPECT_THROW(toml::parse("a = "), Error);
  EXPECT_THROW(toml::parse("a = 1\na = 2"), Error);
  EXPECT_THROW(toml::parse("a = \"open"), Error);
  EXPECT_THROW(toml::parse("[sec"), Error);
  try {
    toml::parse("x = 1\ny = @\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(RunConfig, DefaultsFromEmptyFile) {
  const auto cfg = run_config_from_table(toml::parse(""));
  EXPECT_EQ(cfg.variant, Variant::mcrnn_mla);
  EXPECT_EQ(cfg.train.layers, 2);
  EXPECT_EQ(cfg.train.widths, (std::vector<int>{50, 30}));
  EXPECT_EQ(cfg.train.branches, 3);
  EXPECT_EQ(cfg.train.cluster, ClusterParams{});
}

TEST(RunConfig, ParsesEveryKey) {
  const auto cfg = run_config_from_table(toml::parse(R"(
variant = "mcrnn_mla2"
widths = [8, 6, 4]
branches = 2
seed = 99
threads = 3
pinv_tol = 1e-8
[cluster]
n = 12
p = 0.2
r = 0.01
lambda_plus = 0.02
lambda_minus = 0.005
[fista]
l1_weight = 0.5
max_iter = 50
rel_tol = 1e-5
lipschitz = 3.0
)"));
  EXPECT_EQ(cfg.variant, Variant::mcrnn_mla2);
  EXPECT_EQ(cfg.train.layers, 3);
  EXPECT_EQ(cfg.train.branches, 2);
  EXPECT_EQ(cfg.train.master_seed, 99u);
  EXPECT_EQ(cfg.train.threads, 3);
  EXPECT_EQ(cfg.train.cluster.cells(), 12);
  EXPECT_DOUBLE_EQ(cfg.train.cluster.lambda_minus(), 0.005);
  EXPECT_DOUBLE_EQ(cfg.train.fista.l1_weight, 0.5);
  ASSERT_TRUE(cfg.train.fista.lipschitz.has_value());
  EXPECT_DOUBLE_EQ(*cfg.train.fista.lipschitz, 3.0);
}

TEST(RunConfig, UnknownKeysListedVerbatim) {
  try {
    run_config_from_table(toml::parse("widthz = [1]\n[cluster]\nlamda = 0.1\n"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config);
    const std::string what = e.what();
    EXPECT_NE(what.find("widthz"), std::string::npos);
    EXPECT_NE(what.find("cluster.lamda"), std::string::npos);
  }
}

TEST(RunConfig, InvalidValues) {
  EXPECT_THROW(run_config_from_table(toml::parse("variant = \"mlp\"")), Error);
  EXPECT_THROW(run_config_from_table(toml::parse("widths = [5]")), Error);
  EXPECT_THROW(run_config_from_table(toml::parse("layers = 3\nwidths = [5, 4]")), Error);
  EXPECT_THROW(run_config_from_table(toml::parse("[cluster]\np = 1.5")), Error);
  EXPECT_THROW(run_config_from_table(toml::parse("branches = \"two\"")), Error);
}

TEST(RunConfig, ResolvedTomlRoundTrips) {
  auto cfg = run_config_from_table(toml::parse("variant = \"rnn_mla\"\nwidths = [7, 5]\n[cluster]\nlambda = 0.005\n"));
  cfg.train.fista.lipschitz = 1.0 / 3.0;
  const auto text = to_toml(cfg);
  const auto back = run_config_from_table(toml::parse(text));
  EXPECT_EQ(to_toml(back), text);
  EXPECT_EQ(back.train.cluster, cfg.train.cluster);
  EXPECT_EQ(*back.train.fista.lipschitz, 1.0 / 3.0);
  EXPECT_EQ(to_json(back), to_json(cfg));
  EXPECT_EQ(to_json(cfg)["cluster"]["lambda_plus"], 0.005);
}
