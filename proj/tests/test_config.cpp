#include <doctest.h>

#include <algorithm>

#include "lgc/config.hpp"

using namespace lgc;

TEST_CASE("minimal config populates defaults") {
  const auto cfg = parse_config_text("topology.nodes = 4\ncompressor = lgc\n");
  CHECK(cfg.train.topology.num_workers == 4);
  CHECK(cfg.train.compressor == CompressorKind::kLgc);
  CHECK(cfg.train.alpha_percent == 0.1);
  CHECK(cfg.train.lambda2 == 0.5);
  CHECK(cfg.train.lambda1 == 1.0);
  CHECK(cfg.train.ae_lr == 0.001);
  CHECK(cfg.train.inner_ratio_percent == 10.0);
  CHECK(cfg.infoplane_bits == 8);
}

TEST_CASE("violations are collected, not just the first") {
  try {
    parse_config_text(
        "topology.nodes = 0\n"
        "alpha = 0\n"
        "lr = -2\n"
        "mystery.key = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.violations.size() >= 4);
    const auto has = [&](const std::string& needle) {
      return std::any_of(e.violations.begin(), e.violations.end(), [&](const std::string& v) {
        return v.find(needle) != std::string::npos;
      });
    };
    CHECK(has("topology.nodes"));
    CHECK(has("alpha"));
    CHECK(has("lr"));
    CHECK(has("mystery.key"));
  }
}

TEST_CASE("unknown and malformed keys are rejected") {
  CHECK_THROWS_AS(parse_config_text("nonsense = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("topology.nodes = banana\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("topology.nodes\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("seed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_file("/nonexistent/config.txt"), ConfigError);
}

TEST_CASE("comments and whitespace are tolerated") {
  const auto cfg = parse_config_text(
      "# experiment\n"
      "  topology.nodes = 2   # two workers\n"
      "\n"
      "lr = 0.25\n");
  CHECK(cfg.train.topology.num_workers == 2);
  CHECK(cfg.train.lr == 0.25);
}

TEST_CASE("resolved config round-trips") {
  ExperimentConfig cfg;
  cfg.train.topology.num_workers = 3;
  cfg.train.topology.pattern = Topology::Pattern::kParameterServer;
  cfg.train.compressor = CompressorKind::kDgcLike;
  cfg.train.alpha_percent = 1.5;
  cfg.train.seed = 42;
  cfg.train.model.conv_channels = {4, 16, 16};
  cfg.out_dir = "results";
  const std::string text = render_config(cfg);
  const auto back = parse_config_text(text);
  CHECK(back == cfg);
  CHECK(render_config(back) == text);
}
