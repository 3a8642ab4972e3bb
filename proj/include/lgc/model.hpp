#pragma once

#include "lgc/dataset.hpp"
#include "lgc/net.hpp"
#include "lgc/sparsify.hpp"

namespace lgc {

/// Desk-scale classifier: four stride-2 convs plus a full-length conv head
/// acting as the linear classifier. The gradient of every trainable
/// parameter flattens into one GradientVector, layer by layer.
struct ModelSpec {
  int input_length = 64;
  int classes = 4;
  std::vector<int> conv_channels = {8, 64, 64, 64};

  int num_layers() const { return static_cast<int>(conv_channels.size()) + 1; }
};

SeqNet build_model(const ModelSpec& spec, Rng& rng);

/// Layer segments over the flattened parameter/gradient space; segment l
/// covers layer l's weights then bias.
std::vector<GradientVector::Segment> gradient_layout(const SeqNet& net);

GradientVector flatten_gradients(const SeqNet& net, const NetGrads& grads);
std::vector<double> flatten_params(const SeqNet& net);

/// w <- w - lr * update over the flattened space.
void apply_flat_update(SeqNet& net, std::span<const double> update, double lr);

/// Mean loss and flattened mean gradient over a minibatch (MSE to one-hot).
struct BatchGrad {
  double loss = 0.0;
  GradientVector grad;
};

BatchGrad batch_gradient(const SeqNet& net, const Dataset& data,
                         std::span<const std::size_t> sample_indices);

double evaluate_accuracy(const SeqNet& net, const Dataset& data);

}  // namespace lgc
