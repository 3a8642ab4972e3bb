#include <doctest.h>

#include <cmath>

#include "lgc/autoencoder.hpp"

using namespace lgc;

namespace {

std::vector<std::vector<double>> correlated_gradients(std::size_t K, int mu, Rng& rng,
                                                      double common_scale = 0.1,
                                                      double noise_scale = 0.02) {
  std::vector<double> common(mu);
  for (double& v : common) v = rng.normal(0, common_scale);
  std::vector<std::vector<double>> grads(K, std::vector<double>(mu));
  for (auto& g : grads) {
    for (int t = 0; t < mu; ++t) g[t] = common[t] + rng.normal(0, noise_scale);
  }
  return grads;
}

double ps_total_loss(const Autoencoder& ae, const std::vector<std::vector<double>>& grads,
                     double l1, double l2, std::size_t chosen) {
  AeLosses losses = ae_loss_ps(ae, grads, l1, l2, chosen, nullptr);
  return l1 * losses.rec + l2 * losses.sim;
}

}  // namespace

TEST_CASE("encoder output shapes follow ceil(mu/16)") {
  Rng rng(1);
  for (int mu : {16, 64, 100, 256}) {
    auto ae = make_autoencoder(AeVariant::kRingAllreduce, mu, 1, rng);
    std::vector<double> input(mu, 0.5);
    auto code = encode_common(ae, input);
    CHECK(code.channels == 4);
    CHECK(code.length == (mu + 15) / 16);
  }
}

TEST_CASE("channel chains match the published layer tables") {
  Rng rng(2);
  auto ae = make_autoencoder(AeVariant::kParameterServer, 64, 2, rng);
  const int enc_chain[] = {1, 64, 128, 256, 64, 4};
  REQUIRE(ae.encoder.layers.size() == 5);
  for (int l = 0; l < 5; ++l) {
    CHECK(ae.encoder.layers[l].in_channels == enc_chain[l]);
    CHECK(ae.encoder.layers[l].out_channels == enc_chain[l + 1]);
  }
  const int dec_chain[] = {4, 4, 32, 64, 128, 32};
  for (const auto& dec : ae.decoders) {
    REQUIRE(dec.stack.layers.size() == 5);
    for (int l = 0; l < 5; ++l) {
      CHECK(dec.stack.layers[l].in_channels == dec_chain[l]);
      CHECK(dec.stack.layers[l].out_channels == dec_chain[l + 1]);
      CHECK(dec.stack.layers[l].transposed);
      CHECK(dec.stack.layers[l].stride == 2);
    }
    CHECK(dec.head.layers[0].in_channels == 33);  // 32 + innovation channel
    CHECK(dec.head.layers[0].out_channels == 1);
  }

  auto rar = make_autoencoder(AeVariant::kRingAllreduce, 64, 1, rng);
  CHECK(rar.decoders.size() == 1);
  CHECK(rar.decoders[0].head.layers[0].in_channels == 32);
}

TEST_CASE("mu below 16 is rejected") {
  Rng rng(3);
  CHECK_THROWS_AS(make_autoencoder(AeVariant::kRingAllreduce, 15, 1, rng), ConfigError);
}

TEST_CASE("zero input with zero biases maps to zero everywhere") {
  Rng rng(4);
  auto ae = make_autoencoder(AeVariant::kParameterServer, 64, 1, rng);
  std::vector<double> zeros(64, 0.0);
  auto code = encode_common(ae, zeros);
  for (double v : code.data) CHECK(v == 0.0);

  SparseSelection no_innovation;
  no_innovation.source_length = 64;
  auto rec = decode_ps(ae, code, no_innovation, 0);
  REQUIRE(rec.size() == 64);
  for (double v : rec) CHECK(v == 0.0);
}

TEST_CASE("decode output length is exactly mu for both variants") {
  Rng rng(5);
  for (int mu : {16, 64, 100, 256, 333}) {
    auto rar = make_autoencoder(AeVariant::kRingAllreduce, mu, 1, rng);
    std::vector<double> input(mu, 0.1);
    CHECK(decode_rar(rar, encode_common(rar, input)).size() == static_cast<std::size_t>(mu));

    auto ps = make_autoencoder(AeVariant::kParameterServer, mu, 1, rng);
    auto innovation = topk_select(input, 10.0);
    CHECK(decode_ps(ps, encode_common(ps, input), innovation, 0).size() ==
          static_cast<std::size_t>(mu));
  }
}

TEST_CASE("code value block is ~4x smaller than the dense top-k block") {
  for (int mu : {64, 256, 1024}) {
    const int code_values = 4 * ((mu + 15) / 16);
    const double factor = static_cast<double>(mu * 32) / (code_values * 32);
    CHECK(factor >= 3.0);
    CHECK(factor <= 4.0);
  }
}

TEST_CASE("innovation index out of range is rejected") {
  Rng rng(6);
  auto ae = make_autoencoder(AeVariant::kParameterServer, 16, 1, rng);
  std::vector<double> input(16, 0.1);
  SparseSelection bad;
  bad.source_length = 16;
  bad.indices = {16};
  bad.values = {1.0};
  CHECK_THROWS_AS(decode_ps(ae, encode_common(ae, input), bad, 0), ShapeError);
}

TEST_CASE("average_codes") {
  ChannelSignal a = ChannelSignal::from(1, 2, {1, 3});
  ChannelSignal b = ChannelSignal::from(1, 2, {3, 1});

  SUBCASE("K=1 is the identity") {
    auto m = average_codes({a});
    CHECK(m.data == a.data);
  }

  SUBCASE("elementwise mean") {
    auto m = average_codes({a, b});
    CHECK(m.data == std::vector<double>{2, 2});
  }

  SUBCASE("matches a compensated-summation oracle") {
    Rng rng(7);
    std::vector<ChannelSignal> codes;
    for (int k = 0; k < 9; ++k) {
      ChannelSignal c(4, 8);
      for (double& v : c.data) v = rng.normal(0, 1);
      codes.push_back(std::move(c));
    }
    auto mean = average_codes(codes);
    for (std::size_t n = 0; n < mean.data.size(); ++n) {
      double sum = 0.0, comp = 0.0;  // Kahan
      for (const auto& c : codes) {
        const double y = c.data[n] - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
      }
      const double oracle = sum / 9.0;
      CHECK(std::abs(mean.data[n] - oracle) <= 1e-12 * (std::abs(oracle) + 1.0));
    }
  }

  SUBCASE("shape mismatch throws") {
    CHECK_THROWS_AS(average_codes({a, ChannelSignal(1, 3)}), ShapeError);
  }
}

TEST_CASE("decode_rar of mean of identical codes equals decode of one") {
  Rng rng(8);
  auto ae = make_autoencoder(AeVariant::kRingAllreduce, 32, 1, rng);
  std::vector<double> input(32);
  for (double& v : input) v = rng.normal(0, 0.1);
  auto code = encode_common(ae, input);
  CHECK(decode_rar(ae, average_codes({code, code})) == decode_rar(ae, code));
}

TEST_CASE("similarity loss is zero iff all codes are equal") {
  Rng rng(9);
  auto ae = make_autoencoder(AeVariant::kParameterServer, 32, 2, rng);
  std::vector<double> g(32);
  for (double& v : g) v = rng.normal(0, 0.1);

  auto same = ae_loss_ps(ae, {g, g}, 1.0, 0.5, 0, nullptr);
  CHECK(same.sim == 0.0);
  CHECK(same.rec >= 0.0);

  auto other = g;
  other[3] += 0.5;
  auto diff = ae_loss_ps(ae, {g, other}, 1.0, 0.5, 0, nullptr);
  CHECK(diff.sim > 0.0);
}

TEST_CASE("PS objective needs at least two gradients") {
  Rng rng(10);
  auto ae = make_autoencoder(AeVariant::kParameterServer, 16, 1, rng);
  std::vector<double> g(16, 0.1);
  CHECK_THROWS_AS(ae_loss_ps(ae, {g}, 1.0, 0.5, 0, nullptr), ShapeError);
}

// O(1)-scaled inputs keep deep-layer gradients far above fp noise; central
// differences on badly scaled data measure rounding, not correctness.
TEST_CASE("PS composite loss passes finite differences") {
  Rng rng(11);
  const int mu = 16;
  auto ae = make_autoencoder(AeVariant::kParameterServer, mu, 2, rng);
  auto grads = correlated_gradients(2, mu, rng, 1.0, 0.2);

  AeGrads analytic = zero_ae_grads(ae);
  ae_loss_ps(ae, grads, 1.0, 0.5, 0, &analytic);
  auto flat = ae_flatten_grads(analytic);
  auto spans = ae_param_spans(ae);
  auto probe = [&]() {
    std::uint64_t h = 0;
    AeLosses l = ae_loss_ps(ae, grads, 1.0, 0.5, 0, nullptr, &h);
    return ProbeResult{1.0 * l.rec + 0.5 * l.sim, h};
  };
  FiniteDiffOptions options{.eps = 1e-5, .per_span_cap = 8, .seed = 99,
                            .noise_floor_tol = 1e-4};
  auto report = finite_diff_probe(spans, flat, LossProbe(probe), options);
  CHECK(report.max_rel_error <= 1e-4);
  CHECK(report.checked >= 50);
}

TEST_CASE("RAR composite loss passes finite differences") {
  Rng rng(12);
  const int mu = 16;
  auto ae = make_autoencoder(AeVariant::kRingAllreduce, mu, 1, rng);
  auto grads = correlated_gradients(3, mu, rng, 1.0, 0.2);

  AeGrads analytic = zero_ae_grads(ae);
  ae_loss_rar(ae, grads, &analytic);
  auto flat = ae_flatten_grads(analytic);
  auto spans = ae_param_spans(ae);
  auto probe = [&]() {
    std::uint64_t h = 0;
    const double l = ae_loss_rar(ae, grads, nullptr, &h);
    return ProbeResult{l, h};
  };
  FiniteDiffOptions options{.eps = 1e-5, .per_span_cap = 8, .seed = 77,
                            .noise_floor_tol = 1e-4};
  auto report = finite_diff_probe(spans, flat, LossProbe(probe), options);
  CHECK(report.max_rel_error <= 1e-4);
  CHECK(report.checked >= 50);
}

TEST_CASE("RAR loss is exactly 4x under input doubling (zero-bias nets)") {
  Rng rng(13);
  auto ae = make_autoencoder(AeVariant::kRingAllreduce, 32, 1, rng);
  auto grads = correlated_gradients(2, 32, rng);
  auto doubled = grads;
  for (auto& g : doubled) {
    for (double& v : g) v *= 2.0;
  }
  const double base = ae_loss_rar(ae, grads, nullptr);
  const double big = ae_loss_rar(ae, doubled, nullptr);
  CHECK(big == doctest::Approx(4.0 * base).epsilon(1e-12));
}

TEST_CASE("PS decoder output reacts to the innovation input") {
  Rng rng(14);
  const int mu = 32;
  auto ae = make_autoencoder(AeVariant::kParameterServer, mu, 2, rng);
  auto state = zero_ae_momentum(ae);
  auto grads = correlated_gradients(2, mu, rng);
  Rng step_rng(1);
  ae_train_step_ps(ae, state, grads, 1.0, 0.5, 0.001, step_rng);

  auto code = encode_common(ae, grads[0]);
  auto innovation = topk_select(grads[0], ae.inner_ratio_percent);
  auto base = decode_ps(ae, code, innovation, 0);
  auto perturbed = innovation;
  perturbed.values[0] += 1.0;
  auto moved = decode_ps(ae, code, perturbed, 0);
  CHECK(base != moved);
}

TEST_CASE("short training runs reduce reconstruction loss") {
  Rng rng(15);
  const int mu = 32;
  auto grads = correlated_gradients(2, mu, rng);

  SUBCASE("RAR") {
    auto ae = make_autoencoder(AeVariant::kRingAllreduce, mu, 1, rng);
    auto state = zero_ae_momentum(ae);
    double first = 0, last = 0;
    for (int it = 0; it < 150; ++it) {
      const double loss = ae_train_step_rar(ae, state, grads, 0.001);
      if (it == 0) first = loss;
      last = loss;
    }
    CHECK(last < first);
  }

  SUBCASE("PS") {
    auto ae = make_autoencoder(AeVariant::kParameterServer, mu, 2, rng);
    auto state = zero_ae_momentum(ae);
    Rng step_rng(42);
    double first = 0, last = 0;
    for (int it = 0; it < 150; ++it) {
      const AeLosses losses = ae_train_step_ps(ae, state, grads, 1.0, 0.5, 0.001, step_rng);
      CHECK(losses.rec >= 0.0);
      CHECK(losses.sim >= 0.0);
      if (it == 0) first = losses.rec;
      last = losses.rec;
    }
    CHECK(last < first);
  }
}

TEST_CASE("snapshot round-trips parameters at f32 precision") {
  Rng rng(16);
  auto ae = make_autoencoder(AeVariant::kParameterServer, 16, 2, rng);
  auto snap = ae_snapshot_f32(ae);
  CHECK(snap.size() == ae.param_count());

  Rng rng2(99);
  auto other = make_autoencoder(AeVariant::kParameterServer, 16, 2, rng2);
  ae_load_snapshot_f32(other, snap);
  CHECK(ae_snapshot_f32(other) == snap);

  std::vector<float> short_snap(snap.begin(), snap.end() - 1);
  CHECK_THROWS_AS(ae_load_snapshot_f32(other, short_snap), ShapeError);
}

TEST_CASE("training is deterministic under a fixed seed") {
  const int mu = 16;
  auto run = [&](std::uint64_t seed) {
    Rng rng(seed);
    auto ae = make_autoencoder(AeVariant::kParameterServer, mu, 2, rng);
    auto state = zero_ae_momentum(ae);
    auto grads = correlated_gradients(2, mu, rng);
    Rng step_rng(seed + 1);
    AeLosses last{};
    for (int it = 0; it < 20; ++it) {
      last = ae_train_step_ps(ae, state, grads, 1.0, 0.5, 0.001, step_rng);
    }
    return std::pair{last, ae_snapshot_f32(ae)};
  };
  auto [la, pa] = run(7);
  auto [lb, pb] = run(7);
  CHECK(la.rec == lb.rec);
  CHECK(la.sim == lb.sim);
  CHECK(pa == pb);
}
