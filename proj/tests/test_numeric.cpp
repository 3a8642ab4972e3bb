#include <doctest.h>

#include <cmath>

#include "lgc/net.hpp"

using namespace lgc;

namespace {

ConvLayerParams layer_with(int in_ch, int out_ch, int k, int s, int p, bool transposed,
                           std::vector<double> w, std::vector<double> b) {
  ConvLayerParams l;
  l.in_channels = in_ch;
  l.out_channels = out_ch;
  l.kernel = k;
  l.stride = s;
  l.padding = p;
  l.transposed = transposed;
  l.weights = std::move(w);
  l.bias = std::move(b);
  return l;
}

ChannelSignal random_signal(int channels, int length, Rng& rng, double scale = 1.0) {
  ChannelSignal s(channels, length);
  for (double& v : s.data) v = rng.normal(0.0, scale);
  return s;
}

double dot(const ChannelSignal& a, const ChannelSignal& b) {
  double sum = 0.0;
  for (std::size_t n = 0; n < a.data.size(); ++n) sum += a.data[n] * b.data[n];
  return sum;
}

// Table I encoder / Table II decoder body shapes, built here from raw
// layer params to exercise the numeric core in isolation.
SeqNet table_one_encoder(Rng& rng) {
  SeqNet net;
  const int chain[] = {1, 64, 128, 256, 64};
  for (int l = 0; l < 4; ++l) {
    net.add(make_conv_layer(chain[l], chain[l + 1], 3, 2, 1, false, rng), true);
  }
  net.add(make_conv_layer(64, 4, 1, 1, 0, false, rng), false);
  return net;
}

}  // namespace

TEST_CASE("conv1d forward matches hand convolution") {
  auto l = layer_with(1, 1, 3, 2, 1, false, {1, 1, 1}, {0});
  auto out = conv1d_forward(ChannelSignal::from(1, 4, {1, 2, 3, 4}), l);
  REQUIRE(out.length == 2);
  CHECK(out.data[0] == doctest::Approx(3));
  CHECK(out.data[1] == doctest::Approx(9));
}

TEST_CASE("conv1d identity kernel") {
  auto l = layer_with(1, 1, 1, 1, 0, false, {1}, {0});
  Rng rng(7);
  auto x = random_signal(1, 9, rng);
  auto y = conv1d_forward(x, l);
  CHECK(y.data == x.data);
}

TEST_CASE("conv1d errors") {
  auto l = layer_with(2, 1, 3, 1, 0, false, std::vector<double>(6, 0.0), {0});
  CHECK_THROWS_AS(conv1d_forward(ChannelSignal(1, 8), l), ShapeError);
  auto big = layer_with(1, 1, 9, 1, 0, false, std::vector<double>(9, 0.0), {0});
  CHECK_THROWS_AS(conv1d_forward(ChannelSignal(1, 4), big), ShapeError);
}

TEST_CASE("table-one stack length is 4 x ceil(mu/16)") {
  Rng rng(3);
  auto enc = table_one_encoder(rng);
  for (int mu : {16, 64, 100, 256, 301}) {
    auto out = net_forward(enc, ChannelSignal(1, mu)).output;
    CHECK(out.channels == 4);
    CHECK(out.length == (mu + 15) / 16);
  }
}

TEST_CASE("deconv1d overlap-add") {
  auto l = layer_with(1, 1, 3, 2, 0, true, {1, 1, 1}, {0});
  auto out = deconv1d_forward(ChannelSignal::from(1, 2, {1, 1}), l);
  REQUIRE(out.length == 5);
  CHECK(out.data == std::vector<double>{1, 1, 2, 1, 1});
}

TEST_CASE("deconv1d identity") {
  auto l = layer_with(1, 1, 1, 1, 0, true, {1}, {0});
  Rng rng(9);
  auto x = random_signal(1, 6, rng);
  CHECK(deconv1d_forward(x, l).data == x.data);
}

TEST_CASE("five stride-2 deconvs expand m to 32m+31") {
  Rng rng(5);
  SeqNet net;
  for (int l = 0; l < 5; ++l) {
    net.add(make_conv_layer(1, 1, 3, 2, 0, true, rng), false);
  }
  for (int m : {1, 2, 4, 7, 16}) {
    CHECK(net.out_length(m) == 32 * m + 31);
  }
}

TEST_CASE("leaky relu forward and backward") {
  auto y = leaky_relu(ChannelSignal::from(1, 3, {-1, 0, 2}), 0.01);
  CHECK(y.data[0] == doctest::Approx(-0.01));
  CHECK(y.data[1] == 0.0);
  CHECK(y.data[2] == 2.0);

  Rng rng(11);
  auto pos = random_signal(1, 16, rng);
  for (double& v : pos.data) v = std::abs(v);
  CHECK(leaky_relu(pos, 0.01).data == pos.data);

  auto g = leaky_relu_backward(ChannelSignal::from(1, 1, {-1}), ChannelSignal::from(1, 1, {3}),
                               0.01);
  CHECK(g.data[0] == doctest::Approx(0.03));
}

TEST_CASE("conv forward and input gradient are adjoint") {
  Rng rng(17);
  for (bool transposed : {false, true}) {
    auto layer = make_conv_layer(3, 2, 3, 2, transposed ? 0 : 1, transposed, rng);
    const int l_in = 14;
    const int l_out = layer.out_length(l_in);
    auto x = random_signal(3, l_in, rng);
    auto y = random_signal(2, l_out, rng);
    auto ax = transposed ? deconv1d_forward(x, layer) : conv1d_forward(x, layer);
    auto grads = zero_grads(layer);
    auto aty = transposed ? deconv1d_backward(x, layer, y, grads)
                          : conv1d_backward(x, layer, y, grads);
    const double lhs = dot(ax, y);
    const double rhs = dot(x, aty);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (std::abs(lhs) + std::abs(rhs) + 1e-10));
  }
}

TEST_CASE("backprop on identity net with matching target is zero") {
  SeqNet net;
  net.add(layer_with(1, 1, 1, 1, 0, false, {1}, {0}), false);
  Rng rng(23);
  auto x = random_signal(1, 8, rng);
  auto result = backprop(net, x, MseLoss{x, 1.0});
  CHECK(result.loss == 0.0);
  for (double g : result.grads.layers[0].weights) CHECK(g == 0.0);
  for (double g : result.grads.layers[0].bias) CHECK(g == 0.0);
  for (double g : result.input_grad.data) CHECK(g == 0.0);
}

TEST_CASE("two-layer net passes central finite differences") {
  Rng rng(29);
  SeqNet net;
  net.add(make_conv_layer(2, 3, 3, 2, 1, false, rng), true);
  net.add(make_conv_layer(3, 2, 1, 1, 0, false, rng), false);
  auto x = random_signal(2, 12, rng);
  MseLoss loss{random_signal(2, net.out_length(12), rng), 1.0};
  CHECK(finite_diff_check(net, x, loss, 1e-5) <= 1e-4);
}

TEST_CASE("deconv net passes finite differences") {
  Rng rng(31);
  SeqNet net;
  net.add(make_conv_layer(2, 3, 3, 2, 0, true, rng), true);
  net.add(make_conv_layer(3, 1, 3, 2, 0, true, rng), false);
  auto x = random_signal(2, 5, rng);
  MseLoss loss{random_signal(1, net.out_length(5), rng), 1.0};
  CHECK(finite_diff_check(net, x, loss, 1e-5) <= 1e-4);
}

TEST_CASE("loss weight scales every gradient linearly") {
  Rng rng(37);
  SeqNet net;
  net.add(make_conv_layer(1, 2, 3, 1, 1, false, rng), true);
  net.add(make_conv_layer(2, 1, 1, 1, 0, false, rng), false);
  auto x = random_signal(1, 10, rng);
  auto target = random_signal(1, 10, rng);
  auto base = backprop(net, x, MseLoss{target, 1.0});
  auto scaled = backprop(net, x, MseLoss{target, 3.0});
  CHECK(scaled.loss == doctest::Approx(3.0 * base.loss));
  auto fb = flatten_grads(base.grads);
  auto fs = flatten_grads(scaled.grads);
  for (std::size_t n = 0; n < fb.size(); ++n) {
    CHECK(fs[n] == doctest::Approx(3.0 * fb[n]).epsilon(1e-12));
  }
}

TEST_CASE("sgd momentum steps") {
  SeqNet net;
  net.add(layer_with(1, 1, 1, 1, 0, false, {1.0}, {0.5}), false);
  auto grads = zero_grads(net);

  SUBCASE("momentum 0 is plain sgd") {
    auto state = zero_momentum(net);
    grads.layers[0].weights[0] = 2.0;
    sgd_momentum_step(net, state, grads, 0.001, 0.0);
    CHECK(net.layers[0].weights[0] == doctest::Approx(1.0 - 0.002));
  }

  SUBCASE("zero gradient leaves params unchanged") {
    auto state = zero_momentum(net);
    sgd_momentum_step(net, state, grads, 0.1, 0.9);
    CHECK(net.layers[0].weights[0] == 1.0);
    CHECK(net.layers[0].bias[0] == 0.5);
  }

  SUBCASE("two steps with constant grad displace by lr*(g + 1.9g)") {
    auto state = zero_momentum(net);
    grads.layers[0].weights[0] = 4.0;
    sgd_momentum_step(net, state, grads, 0.01, 0.9);
    sgd_momentum_step(net, state, grads, 0.01, 0.9);
    CHECK(net.layers[0].weights[0] == doctest::Approx(1.0 - 0.01 * (4.0 + 1.9 * 4.0)));
  }
}

TEST_CASE("finite diff flags a sign-flipped backward") {
  Rng rng(41);
  SeqNet net;
  net.add(make_conv_layer(1, 1, 3, 1, 1, false, rng), false);
  auto x = random_signal(1, 6, rng);
  MseLoss loss{random_signal(1, 6, rng), 1.0};
  auto grads = backprop(net, x, loss).grads;
  auto flat = flatten_grads(grads);
  for (double& g : flat) g = -g;  // corrupted backward
  auto spans = param_spans(net);
  auto loss_fn = [&]() { return mse_value(net_forward(net, x).output, loss); };
  const double err = finite_diff_max_rel_error(spans, flat, loss_fn, 1e-5);
  CHECK(err == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("finite diff on linear identity net is tiny") {
  SeqNet net;
  net.add(layer_with(1, 1, 1, 1, 0, false, {1}, {0}), false);
  Rng rng(43);
  auto x = random_signal(1, 5, rng);
  MseLoss loss{random_signal(1, 5, rng), 1.0};
  CHECK(finite_diff_check(net, x, loss, 1e-5) <= 1e-8);
}

TEST_CASE("seeded init is deterministic and outputs stay finite") {
  Rng a(123), b(123);
  auto na = table_one_encoder(a);
  auto nb = table_one_encoder(b);
  for (std::size_t l = 0; l < na.layers.size(); ++l) {
    CHECK(na.layers[l].weights == nb.layers[l].weights);
  }
  Rng rx(5);
  auto x = random_signal(1, 64, rx);
  auto out = net_forward(na, x).output;
  CHECK(out.all_finite());
  auto out2 = net_forward(nb, x).output;
  CHECK(out.data == out2.data);
}
