#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lgc/conv.hpp"
#include "lgc/signal.hpp"

namespace lgc {

/// A plain layer chain: conv or transposed conv, optionally followed by a
/// leaky-ReLU. Enough for both the compression autoencoders and the toy
/// model trained in the simulator.
struct SeqNet {
  std::vector<ConvLayerParams> layers;
  std::vector<std::uint8_t> act_after;  // leaky-ReLU after layer i?
  double slope = 0.01;

  void add(ConvLayerParams layer, bool activation) {
    layers.push_back(std::move(layer));
    act_after.push_back(activation ? 1 : 0);
  }

  int out_length(int in_length) const {
    for (const auto& l : layers) in_length = l.out_length(in_length);
    return in_length;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.param_count();
    return n;
  }
};

/// Per-layer parameter gradients for a SeqNet.
struct NetGrads {
  std::vector<LayerGrads> layers;

  void add_scaled(const NetGrads& other, double scale);
  void scale(double factor);
};

NetGrads zero_grads(const SeqNet& net);

/// Cached activations of one forward pass; consumed by net_backward.
struct ForwardTrace {
  std::vector<ChannelSignal> pre;   // input of each layer
  std::vector<ChannelSignal> conv;  // conv output before activation
  ChannelSignal output;
};

ForwardTrace net_forward(const SeqNet& net, const ChannelSignal& input);

/// Backward pass from dL/d(output); accumulates parameter grads and returns
/// dL/d(input). Throws ShapeError naming the failing layer index.
ChannelSignal net_backward(const SeqNet& net, const ForwardTrace& trace,
                           const ChannelSignal& grad_out, NetGrads& grads);

/// Weighted sum-of-squares loss to a fixed target: L = weight * sum((y-t)^2).
struct MseLoss {
  ChannelSignal target;
  double weight = 1.0;
};

double mse_value(const ChannelSignal& y, const MseLoss& loss);
ChannelSignal mse_grad(const ChannelSignal& y, const MseLoss& loss);

struct BackpropResult {
  double loss = 0.0;
  NetGrads grads;
  ChannelSignal input_grad;
};

BackpropResult backprop(const SeqNet& net, const ChannelSignal& input, const MseLoss& loss);

/// Momentum buffers, one per parameter; zero-initialized.
struct MomentumState {
  std::vector<LayerGrads> velocity;
};

MomentumState zero_momentum(const SeqNet& net);

/// buffer <- momentum*buffer + grad; param <- param - lr*buffer.
void sgd_momentum_step(SeqNet& net, MomentumState& state, const NetGrads& grads, double lr,
                       double momentum);

/// A named view over one contiguous parameter array (a layer's weights or
/// biases), used by the finite-difference checker.
struct ParamSpan {
  double* data = nullptr;
  std::size_t size = 0;
};

std::vector<ParamSpan> param_spans(SeqNet& net);

/// Flatten NetGrads in param_spans order.
std::vector<double> flatten_grads(const NetGrads& grads);

/// Loss sample plus a hash over all leaky-ReLU input signs. A parameter
/// whose +-eps evaluations land on different linear pieces cannot be
/// verified by central differences, so the checker skips it.
struct ProbeResult {
  double loss = 0.0;
  std::uint64_t activation_signs = 0;
};

using LossProbe = std::function<ProbeResult()>;

std::uint64_t activation_sign_hash(const SeqNet& net, const ForwardTrace& trace,
                                   std::uint64_t seed = 0xcbf29ce484222325ull);

struct FiniteDiffOptions {
  double eps = 1e-5;
  /// > 0 checks a seeded random subset of each span instead of every entry
  /// (the full sweep is quadratic in network size).
  std::size_t per_span_cap = 0;
  std::uint64_t seed = 0;
  /// > 0 skips parameters whose |analytic| + |numeric| falls below the
  /// double-precision resolution of the central difference at this loss
  /// scale: floor = 8 * eps_mach * |L0| / (2 * eps * noise_floor_tol).
  /// Their relative error measures rounding, not gradient correctness.
  double noise_floor_tol = 0.0;
};

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kink = 0;
  std::size_t skipped_noise = 0;
};

/// Central-difference check of `analytic` against the probe, perturbing
/// parameters +-eps. max_rel_error is the max over checked parameters of
/// |analytic - numeric| / max(1e-12, |analytic| + |numeric|).
FiniteDiffReport finite_diff_probe(std::span<const ParamSpan> params,
                                   std::span<const double> analytic, const LossProbe& probe,
                                   const FiniteDiffOptions& options);

/// Convenience overload for kink-free losses.
double finite_diff_max_rel_error(std::span<const ParamSpan> params,
                                 std::span<const double> analytic,
                                 const std::function<double()>& loss_fn, double eps,
                                 std::size_t per_span_cap = 0, std::uint64_t seed = 0);

/// Full-network check with the MSE loss; per_span_cap as above (0 = all).
double finite_diff_check(SeqNet& net, const ChannelSignal& input, const MseLoss& loss,
                         double eps, std::size_t per_span_cap = 0, std::uint64_t seed = 0);

}  // namespace lgc
