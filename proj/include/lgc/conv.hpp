#pragma once

#include <vector>

#include "lgc/rng.hpp"
#include "lgc/signal.hpp"

namespace lgc {

/// One 1D convolution (or transposed convolution) layer.
/// Weights are [out_channels x in_channels x kernel], biases [out_channels].
struct ConvLayerParams {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  bool transposed = false;
  std::vector<double> weights;
  std::vector<double> bias;

  double& w(int o, int i, int j) {
    return weights[(static_cast<std::size_t>(o) * in_channels + i) * kernel + j];
  }
  double w(int o, int i, int j) const {
    return weights[(static_cast<std::size_t>(o) * in_channels + i) * kernel + j];
  }

  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel;
  }
  std::size_t param_count() const { return weight_count() + bias.size(); }

  /// L_out = floor((L_in + 2p - k)/s) + 1, or the transposed counterpart
  /// (L_in - 1)*s - 2p + k.
  int out_length(int in_length) const;
};

/// Build a layer with zero bias and uniform weights in
/// [-1/sqrt(in_channels*kernel), +1/sqrt(in_channels*kernel)].
ConvLayerParams make_conv_layer(int in_channels, int out_channels, int kernel,
                                int stride, int padding, bool transposed, Rng& rng);

/// Gradients of one layer's parameters; shapes mirror ConvLayerParams.
struct LayerGrads {
  std::vector<double> weights;
  std::vector<double> bias;
};

LayerGrads zero_grads(const ConvLayerParams& layer);

ChannelSignal conv1d_forward(const ChannelSignal& input, const ConvLayerParams& layer);
ChannelSignal deconv1d_forward(const ChannelSignal& input, const ConvLayerParams& layer);

/// Input gradient + accumulated parameter gradients for the convolution.
/// `grad_out` must have the forward output's shape.
ChannelSignal conv1d_backward(const ChannelSignal& input, const ConvLayerParams& layer,
                              const ChannelSignal& grad_out, LayerGrads& grads);
ChannelSignal deconv1d_backward(const ChannelSignal& input, const ConvLayerParams& layer,
                                const ChannelSignal& grad_out, LayerGrads& grads);

ChannelSignal leaky_relu(const ChannelSignal& x, double slope);

/// dL/dx given dL/dy and the pre-activation input x.
ChannelSignal leaky_relu_backward(const ChannelSignal& x, const ChannelSignal& grad_out,
                                  double slope);

}  // namespace lgc
