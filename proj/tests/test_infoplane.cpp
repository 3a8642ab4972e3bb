#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lgc/gradient_dump.hpp"
#include "lgc/infoplane.hpp"
#include "lgc/rng.hpp"

using namespace lgc;

TEST_CASE("uniform quantizer binning") {
  auto q = quantize_uniform(std::vector<double>{0, 0.5, 1}, 1);
  CHECK(q.symbols == std::vector<std::uint32_t>{0, 1, 1});

  auto constant = quantize_uniform(std::vector<double>{2.5, 2.5, 2.5}, 8);
  CHECK(constant.symbols == std::vector<std::uint32_t>{0, 0, 0});

  auto q2 = quantize_uniform(std::vector<double>{0, 0.3, 0.6, 0.9}, 2, 0.0, 1.0);
  CHECK(q2.symbols == std::vector<std::uint32_t>{0, 1, 2, 3});

  CHECK_THROWS_AS(quantize_uniform(std::vector<double>{}, 4), ShapeError);
  CHECK_THROWS_AS(quantize_uniform(std::vector<double>{1.0}, 0), ConfigError);
  CHECK_THROWS_AS(quantize_uniform(std::vector<double>{1.0}, 33), ConfigError);
}

TEST_CASE("entropy of basic distributions") {
  QuantizedStream constant{std::vector<std::uint32_t>(100, 7), 8, 0, 1};
  CHECK(entropy(constant) == 0.0);

  QuantizedStream fair{{0, 1, 0, 1, 0, 1, 0, 1}, 1, 0, 1};
  CHECK(entropy(fair) == doctest::Approx(1.0));

  QuantizedStream four{{0, 1, 2, 3, 0, 1, 2, 3}, 2, 0, 1};
  CHECK(entropy(four) == doctest::Approx(2.0));
}

TEST_CASE("mutual information properties") {
  Rng rng(5);

  SUBCASE("I(X;X) = H(X) exactly") {
    std::vector<double> v(4096);
    for (double& x : v) x = rng.normal(0, 1);
    auto q = quantize_uniform(v, 6);
    CHECK(mutual_information(q, q) == entropy(q));
  }

  SUBCASE("independent streams carry almost no MI") {
    std::vector<double> a(100000), b(100000);
    for (double& x : a) x = rng.uniform(0, 1);
    for (double& x : b) x = rng.uniform(0, 1);
    auto qa = quantize_uniform(a, 2);
    auto qb = quantize_uniform(b, 2);
    CHECK(mutual_information(qa, qb) < 0.01);
  }

  SUBCASE("noise-free channel: y = x") {
    std::vector<double> a(2048);
    for (double& x : a) x = rng.index(2) ? 1.0 : 0.0;
    auto qa = quantize_uniform(a, 1);
    CHECK(mutual_information(qa, qa) == entropy(qa));
    CHECK(conditional_entropy(qa, qa) == doctest::Approx(0.0));
  }

  SUBCASE("symmetry, non-negativity, upper bound") {
    for (int round = 0; round < 30; ++round) {
      const std::size_t n = 200 + rng.index(2000);
      std::vector<double> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = rng.normal(0, 1);
        b[i] = 0.7 * a[i] + 0.3 * rng.normal(0, 1);
      }
      auto qa = quantize_uniform(a, 4);
      auto qb = quantize_uniform(b, 4);
      const double ab = mutual_information(qa, qb);
      const double ba = mutual_information(qb, qa);
      CHECK(std::abs(ab - ba) <= 1e-12);
      CHECK(ab >= 0.0);
      CHECK(ab <= std::min(entropy(qa), entropy(qb)));
    }
  }

  SUBCASE("jointly permuting pairs changes nothing") {
    const std::size_t n = 3000;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.normal(0, 1);
      b[i] = a[i] + rng.normal(0, 0.5);
    }
    auto qa = quantize_uniform(a, 4);
    auto qb = quantize_uniform(b, 4);
    const double before_h = entropy(qa);
    const double before_i = mutual_information(qa, qb);

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    QuantizedStream pa = qa, pb = qb;
    for (std::size_t i = 0; i < n; ++i) {
      pa.symbols[i] = qa.symbols[perm[i]];
      pb.symbols[i] = qb.symbols[perm[i]];
    }
    CHECK(entropy(pa) == doctest::Approx(before_h).epsilon(1e-12));
    CHECK(mutual_information(pa, pb) == doctest::Approx(before_i).epsilon(1e-12));
  }
}

TEST_CASE("coarser quantization never increases entropy") {
  Rng rng(9);
  std::vector<double> v(20000);
  for (double& x : v) x = rng.normal(0, 1);
  double previous = 1e18;
  for (int bits : {10, 8, 6, 4, 2, 1}) {
    const double h = entropy(quantize_uniform(v, bits));
    CHECK(h <= previous + 1e-12);
    previous = h;
  }
}

TEST_CASE("layer summary on identical and shuffled streams") {
  Rng rng(11);
  LayerPairSeries layer;
  layer.layer_id = 3;
  for (int it = 0; it < 5; ++it) {
    std::vector<double> g(4000);
    for (double& x : g) x = rng.normal(0, 1);
    layer.node_a.push_back(g);
    layer.node_b.push_back(g);  // identical streams
  }
  auto summary = layer_summary({layer}, 4);
  REQUIRE(summary.rows.size() == 5);
  for (const auto& row : summary.rows) {
    CHECK(row.mi_over_h == doctest::Approx(1.0));
    CHECK(row.h_conditional == doctest::Approx(0.0).epsilon(1e-9));
  }
  CHECK(summary.per_layer[0].mi_over_h == doctest::Approx(1.0));

  // shuffling one side destroys the dependence
  LayerPairSeries shuffled = layer;
  for (auto& g : shuffled.node_b) {
    std::shuffle(g.begin(), g.end(), rng.engine());
  }
  // plug-in estimator bias ~ (2^B - 1)^2 / (2 n ln 2): keep 2^B << sqrt(n)
  auto base = layer_summary({shuffled}, 4);
  CHECK(base.per_layer[0].mi_over_h < 0.05);
}

TEST_CASE("layer summary rejects misaligned streams") {
  LayerPairSeries layer;
  layer.layer_id = 0;
  layer.node_a = {{1.0, 2.0}};
  layer.node_b = {};
  CHECK_THROWS_AS(layer_summary({layer}, 4), ShapeError);
}

TEST_CASE("infoplane CSV header and shape") {
  LayerPairSeries layer;
  layer.layer_id = 1;
  layer.node_a = {{0.0, 1.0, 0.5, 0.25}};
  layer.node_b = {{0.0, 1.0, 0.5, 0.25}};
  auto summary = layer_summary({layer}, 2);
  std::ostringstream out;
  write_infoplane_csv(out, summary);
  const std::string text = out.str();
  CHECK(text.rfind("layer,iteration,H_marginal_bits,H_conditional_bits,MI_bits,MI_over_H\n",
                   0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
}

TEST_CASE("gradient dump round trip and pair extraction") {
  GradientDump dump;
  dump.num_nodes = 2;
  dump.num_layers = 3;
  Rng rng(13);
  for (int it = 0; it < 4; ++it) {
    for (int node = 0; node < 2; ++node) {
      for (int layer = 0; layer < 3; ++layer) {
        GradientDump::Record r;
        r.layer_id = static_cast<std::uint32_t>(layer);
        r.values.resize(8 + layer);
        for (auto& v : r.values) v = static_cast<float>(rng.normal(0, 1));
        dump.records.push_back(std::move(r));
      }
    }
  }
  std::ostringstream out(std::ios::binary);
  write_gradient_dump(out, dump);
  std::istringstream in(out.str(), std::ios::binary);
  auto loaded = read_gradient_dump(in);
  CHECK(loaded.num_nodes == 2);
  CHECK(loaded.num_layers == 3);
  CHECK(loaded.iterations() == 4);
  REQUIRE(loaded.records.size() == dump.records.size());
  for (std::size_t n = 0; n < dump.records.size(); ++n) {
    CHECK(loaded.records[n].values == dump.records[n].values);
  }

  auto series = dump_pair_series(loaded, 0, 1);
  REQUIRE(series.size() == 3);
  CHECK(series[0].node_a.size() == 4);
  CHECK(series[2].node_a[1].size() == 10);

  // an empty dump is an explicit error
  GradientDump empty;
  empty.num_nodes = 2;
  empty.num_layers = 1;
  std::ostringstream eo(std::ios::binary);
  write_gradient_dump(eo, empty);
  std::istringstream ei(eo.str(), std::ios::binary);
  CHECK_THROWS_AS(read_gradient_dump(ei), FormatError);
}
