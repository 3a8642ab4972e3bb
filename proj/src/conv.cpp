#include "lgc/conv.hpp"

#include <cmath>
#include <string>

namespace lgc {

namespace {

int div_ceil(int a, int b) { return a >= 0 ? (a + b - 1) / b : a / b; }
int div_floor(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

void check_channels(const ChannelSignal& input, const ConvLayerParams& layer) {
  if (input.channels != layer.in_channels) {
    throw ShapeError("conv layer expects " + std::to_string(layer.in_channels) +
                     " input channels, got " + std::to_string(input.channels));
  }
}

}  // namespace

int ConvLayerParams::out_length(int in_length) const {
  if (transposed) {
    return (in_length - 1) * stride - 2 * padding + kernel;
  }
  return (in_length + 2 * padding - kernel) / stride + 1;
}

ConvLayerParams make_conv_layer(int in_channels, int out_channels, int kernel,
                                int stride, int padding, bool transposed, Rng& rng) {
  ConvLayerParams layer;
  layer.in_channels = in_channels;
  layer.out_channels = out_channels;
  layer.kernel = kernel;
  layer.stride = stride;
  layer.padding = padding;
  layer.transposed = transposed;
  layer.weights.resize(layer.weight_count());
  layer.bias.assign(out_channels, 0.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels) * kernel);
  for (double& w : layer.weights) {
    w = rng.uniform(-bound, bound);
  }
  return layer;
}

LayerGrads zero_grads(const ConvLayerParams& layer) {
  LayerGrads g;
  g.weights.assign(layer.weight_count(), 0.0);
  g.bias.assign(layer.bias.size(), 0.0);
  return g;
}

ChannelSignal conv1d_forward(const ChannelSignal& input, const ConvLayerParams& layer) {
  check_channels(input, layer);
  if (layer.transposed) {
    throw ShapeError("conv1d_forward called with a transposed layer");
  }
  const int l_in = input.length;
  const int l_out = layer.out_length(l_in);
  if (l_out < 1) {
    throw ShapeError("conv1d_forward: degenerate output length " + std::to_string(l_out));
  }
  ChannelSignal out(layer.out_channels, l_out);
  for (int o = 0; o < layer.out_channels; ++o) {
    double* dst = out.channel(o);
    for (int t = 0; t < l_out; ++t) dst[t] = layer.bias[o];
    for (int i = 0; i < layer.in_channels; ++i) {
      const double* src = input.channel(i);
      for (int j = 0; j < layer.kernel; ++j) {
        const double wv = layer.w(o, i, j);
        if (wv == 0.0) continue;
        const int t_lo = std::max(0, div_ceil(layer.padding - j, layer.stride));
        const int t_hi =
            std::min(l_out - 1, div_floor(l_in - 1 + layer.padding - j, layer.stride));
        for (int t = t_lo; t <= t_hi; ++t) {
          dst[t] += wv * src[t * layer.stride + j - layer.padding];
        }
      }
    }
  }
  return out;
}

ChannelSignal deconv1d_forward(const ChannelSignal& input, const ConvLayerParams& layer) {
  check_channels(input, layer);
  if (!layer.transposed) {
    throw ShapeError("deconv1d_forward called with a non-transposed layer");
  }
  const int l_in = input.length;
  const int l_out = layer.out_length(l_in);
  if (l_out < 1) {
    throw ShapeError("deconv1d_forward: degenerate output length " + std::to_string(l_out));
  }
  ChannelSignal out(layer.out_channels, l_out);
  for (int o = 0; o < layer.out_channels; ++o) {
    double* dst = out.channel(o);
    for (int t = 0; t < l_out; ++t) dst[t] = layer.bias[o];
    for (int i = 0; i < layer.in_channels; ++i) {
      const double* src = input.channel(i);
      for (int j = 0; j < layer.kernel; ++j) {
        const double wv = layer.w(o, i, j);
        if (wv == 0.0) continue;
        // dst[t*s + j - p] += w * src[t], kept in range
        const int t_lo = std::max(0, div_ceil(layer.padding - j, layer.stride));
        const int t_hi =
            std::min(l_in - 1, div_floor(l_out - 1 + layer.padding - j, layer.stride));
        for (int t = t_lo; t <= t_hi; ++t) {
          dst[t * layer.stride + j - layer.padding] += wv * src[t];
        }
      }
    }
  }
  return out;
}

ChannelSignal conv1d_backward(const ChannelSignal& input, const ConvLayerParams& layer,
                              const ChannelSignal& grad_out, LayerGrads& grads) {
  check_channels(input, layer);
  const int l_in = input.length;
  const int l_out = layer.out_length(l_in);
  if (grad_out.channels != layer.out_channels || grad_out.length != l_out) {
    throw ShapeError("conv1d_backward: grad_out shape mismatch");
  }
  ChannelSignal grad_in(layer.in_channels, l_in);
  for (int o = 0; o < layer.out_channels; ++o) {
    const double* g = grad_out.channel(o);
    double bsum = 0.0;
    for (int t = 0; t < l_out; ++t) bsum += g[t];
    grads.bias[o] += bsum;
    for (int i = 0; i < layer.in_channels; ++i) {
      const double* src = input.channel(i);
      double* gi = grad_in.channel(i);
      for (int j = 0; j < layer.kernel; ++j) {
        const double wv = layer.w(o, i, j);
        const int t_lo = std::max(0, div_ceil(layer.padding - j, layer.stride));
        const int t_hi =
            std::min(l_out - 1, div_floor(l_in - 1 + layer.padding - j, layer.stride));
        double wsum = 0.0;
        for (int t = t_lo; t <= t_hi; ++t) {
          const int u = t * layer.stride + j - layer.padding;
          wsum += g[t] * src[u];
          gi[u] += wv * g[t];
        }
        grads.weights[(static_cast<std::size_t>(o) * layer.in_channels + i) * layer.kernel + j] +=
            wsum;
      }
    }
  }
  return grad_in;
}

ChannelSignal deconv1d_backward(const ChannelSignal& input, const ConvLayerParams& layer,
                                const ChannelSignal& grad_out, LayerGrads& grads) {
  check_channels(input, layer);
  const int l_in = input.length;
  const int l_out = layer.out_length(l_in);
  if (grad_out.channels != layer.out_channels || grad_out.length != l_out) {
    throw ShapeError("deconv1d_backward: grad_out shape mismatch");
  }
  ChannelSignal grad_in(layer.in_channels, l_in);
  for (int o = 0; o < layer.out_channels; ++o) {
    const double* g = grad_out.channel(o);
    double bsum = 0.0;
    for (int t = 0; t < l_out; ++t) bsum += g[t];
    grads.bias[o] += bsum;
    for (int i = 0; i < layer.in_channels; ++i) {
      const double* src = input.channel(i);
      double* gi = grad_in.channel(i);
      for (int j = 0; j < layer.kernel; ++j) {
        const double wv = layer.w(o, i, j);
        const int t_lo = std::max(0, div_ceil(layer.padding - j, layer.stride));
        const int t_hi =
            std::min(l_in - 1, div_floor(l_out - 1 + layer.padding - j, layer.stride));
        double wsum = 0.0;
        for (int t = t_lo; t <= t_hi; ++t) {
          const int u = t * layer.stride + j - layer.padding;
          wsum += g[u] * src[t];
          gi[t] += wv * g[u];
        }
        grads.weights[(static_cast<std::size_t>(o) * layer.in_channels + i) * layer.kernel + j] +=
            wsum;
      }
    }
  }
  return grad_in;
}

ChannelSignal leaky_relu(const ChannelSignal& x, double slope) {
  ChannelSignal y = x;
  for (double& v : y.data) {
    if (v < 0.0) v *= slope;
  }
  return y;
}

ChannelSignal leaky_relu_backward(const ChannelSignal& x, const ChannelSignal& grad_out,
                                  double slope) {
  if (!x.same_shape(grad_out)) {
    throw ShapeError("leaky_relu_backward: shape mismatch");
  }
  ChannelSignal gi = grad_out;
  for (std::size_t n = 0; n < gi.data.size(); ++n) {
    if (x.data[n] < 0.0) gi.data[n] *= slope;
  }
  return gi;
}

}  // namespace lgc
