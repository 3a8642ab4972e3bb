#include "lgc/net.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace lgc {

void NetGrads::add_scaled(const NetGrads& other, double scale) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t n = 0; n < layers[l].weights.size(); ++n) {
      layers[l].weights[n] += scale * other.layers[l].weights[n];
    }
    for (std::size_t n = 0; n < layers[l].bias.size(); ++n) {
      layers[l].bias[n] += scale * other.layers[l].bias[n];
    }
  }
}

void NetGrads::scale(double factor) {
  for (auto& l : layers) {
    for (double& v : l.weights) v *= factor;
    for (double& v : l.bias) v *= factor;
  }
}

NetGrads zero_grads(const SeqNet& net) {
  NetGrads g;
  g.layers.reserve(net.layers.size());
  for (const auto& l : net.layers) g.layers.push_back(zero_grads(l));
  return g;
}

ForwardTrace net_forward(const SeqNet& net, const ChannelSignal& input) {
  ForwardTrace trace;
  trace.pre.reserve(net.layers.size());
  trace.conv.reserve(net.layers.size());
  ChannelSignal x = input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    trace.pre.push_back(x);
    const auto& layer = net.layers[l];
    try {
      x = layer.transposed ? deconv1d_forward(x, layer) : conv1d_forward(x, layer);
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(l) + ": " + e.what());
    }
    trace.conv.push_back(x);
    if (net.act_after[l]) {
      x = leaky_relu(x, net.slope);
    }
  }
  trace.output = std::move(x);
  return trace;
}

ChannelSignal net_backward(const SeqNet& net, const ForwardTrace& trace,
                           const ChannelSignal& grad_out, NetGrads& grads) {
  ChannelSignal g = grad_out;
  for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
    const auto& layer = net.layers[l];
    try {
      if (net.act_after[l]) {
        g = leaky_relu_backward(trace.conv[l], g, net.slope);
      }
      g = layer.transposed ? deconv1d_backward(trace.pre[l], layer, g, grads.layers[l])
                           : conv1d_backward(trace.pre[l], layer, g, grads.layers[l]);
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(l) + ": " + e.what());
    }
  }
  return g;
}

double mse_value(const ChannelSignal& y, const MseLoss& loss) {
  if (!y.same_shape(loss.target)) {
    throw ShapeError("mse: output and target shapes differ");
  }
  double sum = 0.0;
  for (std::size_t n = 0; n < y.data.size(); ++n) {
    const double d = y.data[n] - loss.target.data[n];
    sum += d * d;
  }
  return loss.weight * sum;
}

ChannelSignal mse_grad(const ChannelSignal& y, const MseLoss& loss) {
  ChannelSignal g(y.channels, y.length);
  for (std::size_t n = 0; n < y.data.size(); ++n) {
    g.data[n] = 2.0 * loss.weight * (y.data[n] - loss.target.data[n]);
  }
  return g;
}

BackpropResult backprop(const SeqNet& net, const ChannelSignal& input, const MseLoss& loss) {
  BackpropResult result;
  result.grads = zero_grads(net);
  ForwardTrace trace = net_forward(net, input);
  result.loss = mse_value(trace.output, loss);
  result.input_grad = net_backward(net, trace, mse_grad(trace.output, loss), result.grads);
  return result;
}

MomentumState zero_momentum(const SeqNet& net) {
  MomentumState s;
  s.velocity.reserve(net.layers.size());
  for (const auto& l : net.layers) s.velocity.push_back(zero_grads(l));
  return s;
}

void sgd_momentum_step(SeqNet& net, MomentumState& state, const NetGrads& grads, double lr,
                       double momentum) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    auto& vel = state.velocity[l];
    const auto& g = grads.layers[l];
    for (std::size_t n = 0; n < layer.weights.size(); ++n) {
      vel.weights[n] = momentum * vel.weights[n] + g.weights[n];
      layer.weights[n] -= lr * vel.weights[n];
    }
    for (std::size_t n = 0; n < layer.bias.size(); ++n) {
      vel.bias[n] = momentum * vel.bias[n] + g.bias[n];
      layer.bias[n] -= lr * vel.bias[n];
    }
  }
}

std::vector<ParamSpan> param_spans(SeqNet& net) {
  std::vector<ParamSpan> spans;
  spans.reserve(net.layers.size() * 2);
  for (auto& l : net.layers) {
    spans.push_back({l.weights.data(), l.weights.size()});
    spans.push_back({l.bias.data(), l.bias.size()});
  }
  return spans;
}

std::vector<double> flatten_grads(const NetGrads& grads) {
  std::vector<double> flat;
  for (const auto& l : grads.layers) {
    flat.insert(flat.end(), l.weights.begin(), l.weights.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

std::uint64_t activation_sign_hash(const SeqNet& net, const ForwardTrace& trace,
                                   std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (!net.act_after[l]) continue;
    for (double v : trace.conv[l].data) {
      h ^= v < 0.0 ? 0x9du : 0x3bu;
      h *= 1099511628211ull;
    }
  }
  return h;
}

FiniteDiffReport finite_diff_probe(std::span<const ParamSpan> params,
                                   std::span<const double> analytic, const LossProbe& probe,
                                   const FiniteDiffOptions& options) {
  Rng rng(options.seed ^ 0x66d1be1cafe5ull);
  const ProbeResult center = probe();
  const double eps = options.eps;
  double noise_floor = 0.0;
  if (options.noise_floor_tol > 0.0) {
    noise_floor = 8.0 * 2.220446049250313e-16 * std::max(1.0, std::abs(center.loss)) /
                  (2.0 * eps * options.noise_floor_tol);
  }
  FiniteDiffReport report;
  std::size_t offset = 0;
  for (const auto& span : params) {
    std::vector<std::size_t> picks;
    if (options.per_span_cap == 0 || span.size <= options.per_span_cap) {
      picks.resize(span.size);
      std::iota(picks.begin(), picks.end(), std::size_t{0});
    } else {
      picks.reserve(options.per_span_cap);
      for (std::size_t n = 0; n < options.per_span_cap; ++n) {
        picks.push_back(rng.index(span.size));
      }
    }
    for (std::size_t idx : picks) {
      double& p = span.data[idx];
      const double saved = p;
      p = saved + eps;
      const ProbeResult plus = probe();
      p = saved - eps;
      const ProbeResult minus = probe();
      p = saved;
      if (plus.activation_signs != center.activation_signs ||
          minus.activation_signs != center.activation_signs) {
        ++report.skipped_kink;  // a piecewise boundary sits inside +-eps
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * eps);
      const double a = analytic[offset + idx];
      if (noise_floor > 0.0 && std::abs(a) + std::abs(numeric) < noise_floor) {
        ++report.skipped_noise;
        continue;
      }
      const double err = std::abs(a - numeric) / std::max(1e-12, std::abs(a) + std::abs(numeric));
      report.max_rel_error = std::max(report.max_rel_error, err);
      ++report.checked;
    }
    offset += span.size;
  }
  return report;
}

double finite_diff_max_rel_error(std::span<const ParamSpan> params,
                                 std::span<const double> analytic,
                                 const std::function<double()>& loss_fn, double eps,
                                 std::size_t per_span_cap, std::uint64_t seed) {
  FiniteDiffOptions options;
  options.eps = eps;
  options.per_span_cap = per_span_cap;
  options.seed = seed;
  return finite_diff_probe(params, analytic,
                           LossProbe([&loss_fn]() { return ProbeResult{loss_fn(), 0}; }),
                           options)
      .max_rel_error;
}

double finite_diff_check(SeqNet& net, const ChannelSignal& input, const MseLoss& loss,
                         double eps, std::size_t per_span_cap, std::uint64_t seed) {
  const NetGrads analytic = backprop(net, input, loss).grads;
  const std::vector<double> flat = flatten_grads(analytic);
  const auto spans = param_spans(net);
  auto probe = [&]() {
    ForwardTrace trace = net_forward(net, input);
    return ProbeResult{mse_value(trace.output, loss), activation_sign_hash(net, trace)};
  };
  FiniteDiffOptions options;
  options.eps = eps;
  options.per_span_cap = per_span_cap;
  options.seed = seed;
  return finite_diff_probe(spans, flat, LossProbe(probe), options).max_rel_error;
}

}  // namespace lgc
