#include "lgc/autoencoder.hpp"

#include <algorithm>
#include <string>

namespace lgc {

namespace {

constexpr int kEncoderChain[] = {1, 64, 128, 256, 64, 4};
constexpr int kDecoderChain[] = {4, 4, 32, 64, 128, 32};

ChannelSignal values_as_signal(std::span<const double> values) {
  ChannelSignal s;
  s.channels = 1;
  s.length = static_cast<int>(values.size());
  s.data.assign(values.begin(), values.end());
  return s;
}

ChannelSignal innovation_channel(const SparseSelection& innovation, int mu) {
  ChannelSignal ch(1, mu);
  for (std::size_t n = 0; n < innovation.count(); ++n) {
    if (innovation.indices[n] >= static_cast<std::uint32_t>(mu)) {
      throw ShapeError("innovation index " + std::to_string(innovation.indices[n]) +
                       " out of range for mu=" + std::to_string(mu));
    }
    ch.data[innovation.indices[n]] = innovation.values[n];
  }
  return ch;
}

struct DecodeTrace {
  ForwardTrace stack;
  int pre_trim_length = 0;
  ForwardTrace head;
};

ChannelSignal decode_forward(const Autoencoder& ae, const DecoderNet& dec,
                             const ChannelSignal& code, const ChannelSignal* innovation,
                             DecodeTrace* trace) {
  DecodeTrace local;
  DecodeTrace& t = trace ? *trace : local;
  t.stack = net_forward(dec.stack, code);
  t.pre_trim_length = t.stack.output.length;
  ChannelSignal x = center_trim(t.stack.output, ae.input_length);
  if (innovation) {
    x = concat_channels(x, *innovation);
  }
  t.head = net_forward(dec.head, x);
  return t.head.output;
}

/// Backward through head, concat split, trim and stack; returns dL/d(code).
ChannelSignal decode_backward(const DecoderNet& dec, const DecodeTrace& trace,
                              const ChannelSignal& grad_rec, bool has_innovation,
                              NetGrads& stack_grads, NetGrads& head_grads) {
  ChannelSignal d_in = net_backward(dec.head, trace.head, grad_rec, head_grads);
  if (has_innovation) {
    // drop the innovation channel; it is an input, not a parameter
    ChannelSignal d_trimmed(d_in.channels - 1, d_in.length);
    std::copy(d_in.data.begin(), d_in.data.begin() + d_trimmed.data.size(),
              d_trimmed.data.begin());
    d_in = std::move(d_trimmed);
  }
  ChannelSignal d_stack_out = center_trim_backward(d_in, trace.pre_trim_length);
  return net_backward(dec.stack, trace.stack, d_stack_out, stack_grads);
}

void check_input_length(const Autoencoder& ae, std::size_t n) {
  if (static_cast<int>(n) != ae.input_length) {
    throw ShapeError("autoencoder expects input length " + std::to_string(ae.input_length) +
                     ", got " + std::to_string(n));
  }
}

void check_code_shape(const Autoencoder& ae, const ChannelSignal& code) {
  if (code.channels != 4 || code.length != ae.code_length()) {
    throw ShapeError("common code must be 4 x " + std::to_string(ae.code_length()));
  }
}

}  // namespace

std::size_t Autoencoder::param_count() const {
  std::size_t n = encoder.param_count();
  for (const auto& d : decoders) {
    n += d.stack.param_count() + d.head.param_count();
  }
  return n;
}

Autoencoder make_autoencoder(AeVariant variant, int input_length, std::size_t num_decoders,
                             Rng& rng, double inner_ratio_percent) {
  if (input_length < 16) {
    throw ConfigError("autoencoder input length must be >= 16, got " +
                      std::to_string(input_length));
  }
  if (variant == AeVariant::kRingAllreduce) {
    num_decoders = 1;
  } else if (num_decoders < 1) {
    throw ConfigError("parameter-server autoencoder needs at least one decoder");
  }
  Autoencoder ae;
  ae.variant = variant;
  ae.input_length = input_length;
  ae.inner_ratio_percent = inner_ratio_percent;
  for (int l = 0; l < 4; ++l) {
    ae.encoder.add(make_conv_layer(kEncoderChain[l], kEncoderChain[l + 1], 3, 2, 1, false, rng),
                   true);
  }
  ae.encoder.add(make_conv_layer(kEncoderChain[4], kEncoderChain[5], 1, 1, 0, false, rng),
                 false);

  const int head_in = variant == AeVariant::kParameterServer ? 33 : 32;
  for (std::size_t d = 0; d < num_decoders; ++d) {
    DecoderNet dec;
    for (int l = 0; l < 5; ++l) {
      dec.stack.add(
          make_conv_layer(kDecoderChain[l], kDecoderChain[l + 1], 3, 2, 0, true, rng), true);
    }
    dec.head.add(make_conv_layer(head_in, 1, 1, 1, 0, false, rng), false);
    ae.decoders.push_back(std::move(dec));
  }
  return ae;
}

ChannelSignal encode_common(const Autoencoder& ae, std::span<const double> topk_values) {
  check_input_length(ae, topk_values.size());
  return net_forward(ae.encoder, values_as_signal(topk_values)).output;
}

std::vector<double> decode_ps(const Autoencoder& ae, const ChannelSignal& code,
                              const SparseSelection& innovation, std::size_t decoder_index) {
  check_code_shape(ae, code);
  if (ae.variant != AeVariant::kParameterServer) {
    throw ShapeError("decode_ps called on a non-PS autoencoder");
  }
  const ChannelSignal innov = innovation_channel(innovation, ae.input_length);
  return decode_forward(ae, ae.decoders.at(decoder_index), code, &innov, nullptr).data;
}

std::vector<double> decode_rar(const Autoencoder& ae, const ChannelSignal& avg_code) {
  check_code_shape(ae, avg_code);
  if (ae.variant != AeVariant::kRingAllreduce) {
    throw ShapeError("decode_rar called on a non-RAR autoencoder");
  }
  return decode_forward(ae, ae.decoders.front(), avg_code, nullptr, nullptr).data;
}

ChannelSignal average_codes(const std::vector<ChannelSignal>& codes) {
  if (codes.empty()) {
    throw ShapeError("average_codes: no codes");
  }
  ChannelSignal mean = codes.front();
  for (std::size_t k = 1; k < codes.size(); ++k) {
    if (!codes[k].same_shape(mean)) {
      throw ShapeError("average_codes: shape mismatch");
    }
    for (std::size_t n = 0; n < mean.data.size(); ++n) {
      mean.data[n] += codes[k].data[n];
    }
  }
  const double inv = 1.0 / static_cast<double>(codes.size());
  for (double& v : mean.data) v *= inv;
  return mean;
}

AeGrads zero_ae_grads(const Autoencoder& ae) {
  AeGrads g;
  g.encoder = zero_grads(ae.encoder);
  for (const auto& d : ae.decoders) {
    g.decoders.emplace_back(zero_grads(d.stack), zero_grads(d.head));
  }
  return g;
}

AeLosses ae_loss_ps(const Autoencoder& ae, const std::vector<std::vector<double>>& grads,
                    double lambda1, double lambda2, std::size_t chosen_code,
                    AeGrads* out_grads, std::uint64_t* sign_hash) {
  const std::size_t K = grads.size();
  if (K < 2) {
    throw ShapeError("PS autoencoder objective needs at least two gradients");
  }
  if (ae.decoders.size() < K) {
    throw ShapeError("PS autoencoder has fewer decoders than gradients");
  }
  if (lambda1 < 0.0 || lambda2 < 0.0) {
    throw ConfigError("loss weights must be non-negative");
  }

  // encode every gradient
  std::vector<ForwardTrace> enc_traces(K);
  std::vector<const ChannelSignal*> codes(K);
  for (std::size_t k = 0; k < K; ++k) {
    check_input_length(ae, grads[k].size());
    enc_traces[k] = net_forward(ae.encoder, values_as_signal(grads[k]));
    codes[k] = &enc_traces[k].output;
  }

  AeLosses losses;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t m = 0; m < K; ++m) {
      if (m == k) continue;
      double d2 = 0.0;
      for (std::size_t n = 0; n < codes[k]->data.size(); ++n) {
        const double d = codes[k]->data[n] - codes[m]->data[n];
        d2 += d * d;
      }
      losses.sim += d2;
    }
  }

  // the chosen code feeds every decoder together with each node's innovation
  std::vector<DecodeTrace> dec_traces(K);
  std::vector<ChannelSignal> recs(K);
  std::vector<ChannelSignal> innovations(K);
  for (std::size_t k = 0; k < K; ++k) {
    const SparseSelection innov = topk_select(grads[k], ae.inner_ratio_percent);
    innovations[k] = innovation_channel(innov, ae.input_length);
    recs[k] = decode_forward(ae, ae.decoders[k], *codes[chosen_code], &innovations[k],
                             &dec_traces[k]);
    for (int t = 0; t < ae.input_length; ++t) {
      const double d = recs[k].data[t] - grads[k][t];
      losses.rec += d * d;
    }
  }

  if (sign_hash) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t k = 0; k < K; ++k) {
      h = activation_sign_hash(ae.encoder, enc_traces[k], h);
      h = activation_sign_hash(ae.decoders[k].stack, dec_traces[k].stack, h);
    }
    *sign_hash = h;
  }
  if (!out_grads) return losses;

  // d(code): similarity term plus whatever flows back through the decoders
  std::vector<ChannelSignal> d_codes(K);
  ChannelSignal code_sum(codes[0]->channels, codes[0]->length);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t n = 0; n < code_sum.data.size(); ++n) {
      code_sum.data[n] += codes[k]->data[n];
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    d_codes[k] = ChannelSignal(codes[k]->channels, codes[k]->length);
    for (std::size_t n = 0; n < d_codes[k].data.size(); ++n) {
      d_codes[k].data[n] =
          4.0 * lambda2 * (static_cast<double>(K) * codes[k]->data[n] - code_sum.data[n]);
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    ChannelSignal d_rec(1, ae.input_length);
    for (int t = 0; t < ae.input_length; ++t) {
      d_rec.data[t] = 2.0 * lambda1 * (recs[k].data[t] - grads[k][t]);
    }
    auto& [stack_grads, head_grads] = out_grads->decoders[k];
    ChannelSignal d_code = decode_backward(ae.decoders[k], dec_traces[k], d_rec,
                                           /*has_innovation=*/true, stack_grads, head_grads);
    for (std::size_t n = 0; n < d_code.data.size(); ++n) {
      d_codes[chosen_code].data[n] += d_code.data[n];
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    net_backward(ae.encoder, enc_traces[k], d_codes[k], out_grads->encoder);
  }
  return losses;
}

double ae_loss_rar(const Autoencoder& ae, const std::vector<std::vector<double>>& grads,
                   AeGrads* out_grads, std::uint64_t* sign_hash) {
  const std::size_t K = grads.size();
  if (K < 1) {
    throw ShapeError("RAR autoencoder objective needs at least one gradient");
  }
  std::vector<ForwardTrace> enc_traces(K);
  std::vector<ChannelSignal> codes(K);
  for (std::size_t k = 0; k < K; ++k) {
    check_input_length(ae, grads[k].size());
    enc_traces[k] = net_forward(ae.encoder, values_as_signal(grads[k]));
    codes[k] = enc_traces[k].output;
  }
  const ChannelSignal avg = average_codes(codes);

  DecodeTrace trace;
  const ChannelSignal rec = decode_forward(ae, ae.decoders.front(), avg, nullptr, &trace);

  std::vector<double> target(ae.input_length, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    for (int t = 0; t < ae.input_length; ++t) target[t] += grads[k][t];
  }
  for (double& v : target) v /= static_cast<double>(K);

  double loss = 0.0;
  for (int t = 0; t < ae.input_length; ++t) {
    const double d = rec.data[t] - target[t];
    loss += d * d;
  }
  if (sign_hash) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t k = 0; k < K; ++k) {
      h = activation_sign_hash(ae.encoder, enc_traces[k], h);
    }
    h = activation_sign_hash(ae.decoders.front().stack, trace.stack, h);
    *sign_hash = h;
  }
  if (!out_grads) return loss;

  ChannelSignal d_rec(1, ae.input_length);
  for (int t = 0; t < ae.input_length; ++t) {
    d_rec.data[t] = 2.0 * (rec.data[t] - target[t]);
  }
  auto& [stack_grads, head_grads] = out_grads->decoders.front();
  ChannelSignal d_avg = decode_backward(ae.decoders.front(), trace, d_rec,
                                        /*has_innovation=*/false, stack_grads, head_grads);
  for (double& v : d_avg.data) v /= static_cast<double>(K);
  for (std::size_t k = 0; k < K; ++k) {
    net_backward(ae.encoder, enc_traces[k], d_avg, out_grads->encoder);
  }
  return loss;
}

AeTrainState zero_ae_momentum(const Autoencoder& ae) {
  AeTrainState s;
  s.encoder = zero_momentum(ae.encoder);
  for (const auto& d : ae.decoders) {
    s.decoders.emplace_back(zero_momentum(d.stack), zero_momentum(d.head));
  }
  return s;
}

namespace {

void ae_apply_step(Autoencoder& ae, AeTrainState& state, const AeGrads& grads, double lr,
                   double momentum) {
  sgd_momentum_step(ae.encoder, state.encoder, grads.encoder, lr, momentum);
  for (std::size_t d = 0; d < ae.decoders.size(); ++d) {
    sgd_momentum_step(ae.decoders[d].stack, state.decoders[d].first, grads.decoders[d].first,
                      lr, momentum);
    sgd_momentum_step(ae.decoders[d].head, state.decoders[d].second, grads.decoders[d].second,
                      lr, momentum);
  }
}

}  // namespace

AeLosses ae_train_step_ps(Autoencoder& ae, AeTrainState& state,
                          const std::vector<std::vector<double>>& grads, double lambda1,
                          double lambda2, double lr, Rng& rng, double momentum) {
  const std::size_t chosen = rng.index(grads.size());
  AeGrads g = zero_ae_grads(ae);
  AeLosses losses = ae_loss_ps(ae, grads, lambda1, lambda2, chosen, &g);
  ae_apply_step(ae, state, g, lr, momentum);
  return losses;
}

double ae_train_step_rar(Autoencoder& ae, AeTrainState& state,
                         const std::vector<std::vector<double>>& grads, double lr,
                         double momentum) {
  AeGrads g = zero_ae_grads(ae);
  const double loss = ae_loss_rar(ae, grads, &g);
  ae_apply_step(ae, state, g, lr, momentum);
  return loss;
}

std::vector<ParamSpan> ae_param_spans(Autoencoder& ae) {
  std::vector<ParamSpan> spans = param_spans(ae.encoder);
  for (auto& d : ae.decoders) {
    auto s1 = param_spans(d.stack);
    spans.insert(spans.end(), s1.begin(), s1.end());
    auto s2 = param_spans(d.head);
    spans.insert(spans.end(), s2.begin(), s2.end());
  }
  return spans;
}

std::vector<double> ae_flatten_grads(const AeGrads& grads) {
  std::vector<double> flat = flatten_grads(grads.encoder);
  for (const auto& [stack, head] : grads.decoders) {
    auto f1 = flatten_grads(stack);
    flat.insert(flat.end(), f1.begin(), f1.end());
    auto f2 = flatten_grads(head);
    flat.insert(flat.end(), f2.begin(), f2.end());
  }
  return flat;
}

std::vector<float> ae_snapshot_f32(const Autoencoder& ae) {
  std::vector<float> snap;
  snap.reserve(ae.param_count());
  auto spans = ae_param_spans(const_cast<Autoencoder&>(ae));
  for (const auto& s : spans) {
    for (std::size_t n = 0; n < s.size; ++n) {
      snap.push_back(static_cast<float>(s.data[n]));
    }
  }
  return snap;
}

void ae_load_snapshot_f32(Autoencoder& ae, std::span<const float> snapshot) {
  if (snapshot.size() != ae.param_count()) {
    throw ShapeError("autoencoder snapshot has wrong parameter count");
  }
  auto spans = ae_param_spans(ae);
  std::size_t pos = 0;
  for (const auto& s : spans) {
    for (std::size_t n = 0; n < s.size; ++n) {
      s.data[n] = static_cast<double>(snapshot[pos++]);
    }
  }
}

}  // namespace lgc
