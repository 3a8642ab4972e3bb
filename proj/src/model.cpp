#include "lgc/model.hpp"

#include <algorithm>

namespace lgc {

SeqNet build_model(const ModelSpec& spec, Rng& rng) {
  SeqNet net;
  int channels = 1;
  int length = spec.input_length;
  for (int out : spec.conv_channels) {
    net.add(make_conv_layer(channels, out, 3, 2, 1, false, rng), true);
    channels = out;
    length = (length + 1) / 2;
  }
  // full-length kernel: the classifier head collapses to one position
  net.add(make_conv_layer(channels, spec.classes, length, 1, 0, false, rng), false);
  return net;
}

std::vector<GradientVector::Segment> gradient_layout(const SeqNet& net) {
  std::vector<GradientVector::Segment> segments;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const std::size_t n = net.layers[l].param_count();
    segments.push_back({static_cast<int>(l), offset, n});
    offset += n;
  }
  return segments;
}

GradientVector flatten_gradients(const SeqNet& net, const NetGrads& grads) {
  GradientVector g;
  g.layer_offsets = gradient_layout(net);
  g.values = flatten_grads(grads);
  g.validate();
  return g;
}

std::vector<double> flatten_params(const SeqNet& net) {
  std::vector<double> flat;
  flat.reserve(net.param_count());
  for (const auto& layer : net.layers) {
    flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

void apply_flat_update(SeqNet& net, std::span<const double> update, double lr) {
  if (update.size() != net.param_count()) {
    throw ShapeError("apply_flat_update: update length does not match parameter count");
  }
  std::size_t pos = 0;
  for (auto& layer : net.layers) {
    for (double& w : layer.weights) w -= lr * update[pos++];
    for (double& b : layer.bias) b -= lr * update[pos++];
  }
}

BatchGrad batch_gradient(const SeqNet& net, const Dataset& data,
                         std::span<const std::size_t> sample_indices) {
  BatchGrad out;
  NetGrads accum = zero_grads(net);
  const int classes = net.layers.back().out_channels;
  for (std::size_t idx : sample_indices) {
    ChannelSignal input;
    input.channels = 1;
    input.length = static_cast<int>(data.inputs[idx].size());
    input.data = data.inputs[idx];
    MseLoss loss{ChannelSignal(classes, 1), 1.0};
    loss.target.data[data.labels[idx]] = 1.0;
    BackpropResult r = backprop(net, input, loss);
    out.loss += r.loss;
    accum.add_scaled(r.grads, 1.0);
  }
  const double inv = 1.0 / static_cast<double>(sample_indices.size());
  out.loss *= inv;
  accum.scale(inv);
  out.grad = flatten_gradients(net, accum);
  return out;
}

double evaluate_accuracy(const SeqNet& net, const Dataset& data) {
  std::size_t correct = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    ChannelSignal input;
    input.channels = 1;
    input.length = static_cast<int>(data.inputs[s].size());
    input.data = data.inputs[s];
    const ChannelSignal out = net_forward(net, input).output;
    const int pred = static_cast<int>(
        std::max_element(out.data.begin(), out.data.end()) - out.data.begin());
    if (pred == data.labels[s]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace lgc
