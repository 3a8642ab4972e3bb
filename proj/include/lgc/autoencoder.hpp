#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lgc/net.hpp"
#include "lgc/rng.hpp"
#include "lgc/sparsify.hpp"

namespace lgc {

/// Compressed common representation: 4 channels of length ceil(mu/16),
/// exactly what the encoder stack produces for the configured input length.
using CommonCode = ChannelSignal;

enum class AeVariant { kParameterServer, kRingAllreduce };

/// One decoder: five stride-2 transposed convs (channel chain
/// 4->4->32->64->128->32), then a 1x1 conv down to a single channel. The
/// parameter-server variant concatenates the densified innovation as an
/// extra input channel before that final conv.
struct DecoderNet {
  SeqNet stack;  // deconv1..deconv5, leaky-ReLU after each
  SeqNet head;   // single 1x1 conv, no activation
};

struct Autoencoder {
  AeVariant variant = AeVariant::kRingAllreduce;
  int input_length = 0;  // mu
  double inner_ratio_percent = 10.0;  // innovation share of the selection
  SeqNet encoder;
  std::vector<DecoderNet> decoders;  // K for PS, 1 for RAR

  int code_length() const { return (input_length + 15) / 16; }
  std::size_t param_count() const;
};

/// Seeded construction; requires mu >= 16 so the decoder expansion covers
/// the trim target.
Autoencoder make_autoencoder(AeVariant variant, int input_length, std::size_t num_decoders,
                             Rng& rng, double inner_ratio_percent = 10.0);

ChannelSignal encode_common(const Autoencoder& ae, std::span<const double> topk_values);

std::vector<double> decode_ps(const Autoencoder& ae, const ChannelSignal& code,
                              const SparseSelection& innovation, std::size_t decoder_index);
std::vector<double> decode_rar(const Autoencoder& ae, const ChannelSignal& avg_code);

/// Elementwise arithmetic mean of same-shape codes.
ChannelSignal average_codes(const std::vector<ChannelSignal>& codes);

struct AeLosses {
  double rec = 0.0;
  double sim = 0.0;
};

struct AeGrads {
  NetGrads encoder;
  std::vector<std::pair<NetGrads, NetGrads>> decoders;  // (stack, head)
};

AeGrads zero_ae_grads(const Autoencoder& ae);

/// Loss (and optionally gradients) of the parameter-server objective
///   L = l1 * sum_k ||g_k - D_k(c_chosen, innov_k)||^2
///     + l2 * sum_k sum_{m != k} ||E(g_k) - E(g_m)||^2
/// with innovations extracted internally at ae.inner_ratio_percent.
AeLosses ae_loss_ps(const Autoencoder& ae, const std::vector<std::vector<double>>& grads,
                    double lambda1, double lambda2, std::size_t chosen_code,
                    AeGrads* out_grads, std::uint64_t* sign_hash = nullptr);

/// Loss (and optionally gradients) of the ring-allreduce objective
///   L = ||D(mean_k E(g_k)) - mean_k g_k||^2.
double ae_loss_rar(const Autoencoder& ae, const std::vector<std::vector<double>>& grads,
                   AeGrads* out_grads, std::uint64_t* sign_hash = nullptr);

struct AeTrainState {
  MomentumState encoder;
  std::vector<std::pair<MomentumState, MomentumState>> decoders;
};

AeTrainState zero_ae_momentum(const Autoencoder& ae);

/// One SGD step on the PS loss; the decoder-feeding code is drawn from
/// `rng`. Requires at least two gradients (the similarity term needs a
/// pair). Returns (L_rec, L_sim) at the pre-step parameters.
AeLosses ae_train_step_ps(Autoencoder& ae, AeTrainState& state,
                          const std::vector<std::vector<double>>& grads, double lambda1,
                          double lambda2, double lr, Rng& rng, double momentum = 0.0);

/// One SGD step on the RAR loss; returns L_rec at the pre-step parameters.
double ae_train_step_rar(Autoencoder& ae, AeTrainState& state,
                         const std::vector<std::vector<double>>& grads, double lr,
                         double momentum = 0.0);

/// Parameter plumbing shared by the optimizer step, the wire snapshot and
/// the finite-difference harness.
std::vector<ParamSpan> ae_param_spans(Autoencoder& ae);
std::vector<double> ae_flatten_grads(const AeGrads& grads);
std::vector<float> ae_snapshot_f32(const Autoencoder& ae);
void ae_load_snapshot_f32(Autoencoder& ae, std::span<const float> snapshot);

}  // namespace lgc
