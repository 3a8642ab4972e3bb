#pragma once

#include <optional>

#include "lgc/autoencoder.hpp"
#include "lgc/collectives.hpp"
#include "lgc/dataset.hpp"
#include "lgc/gradient_dump.hpp"
#include "lgc/model.hpp"

namespace lgc {

enum class CompressorKind { kNone, kSparseGd, kDgcLike, kLgc };

const char* compressor_name(CompressorKind kind);

enum class LayerPolicy { kDense, kTopkOnly, kTopkPlusAe };

/// First trainable layer: original gradients. Last layer: top-k without
/// the autoencoder. Everything in between: top-k plus autoencoder.
LayerPolicy layer_policy(int layer_id, int num_layers);

/// Three consecutive stages: dense updates, top-k updates while the
/// autoencoder trains, compressed updates.
struct PhaseSchedule {
  std::uint64_t phase1_iters = 200;
  std::uint64_t phase2_iters = 300;
  std::uint64_t total_iters = 1500;

  int phase_of(std::uint64_t iteration) const {
    if (iteration < phase1_iters) return 1;
    if (iteration < phase1_iters + phase2_iters) return 2;
    return 3;
  }
  void validate(std::vector<std::string>& out) const;
};

struct TrainConfig {
  Topology topology;
  CompressorKind compressor = CompressorKind::kNone;
  PhaseSchedule phases;

  double alpha_percent = 0.1;        // top-k share per layer
  double inner_ratio_percent = 10.0; // innovation share of the selection
  double mc_momentum = 0.9;          // momentum-correction coefficient
  // DGC-style exponential ramp start (dgc compressor only)
  double ramp_start_percent = 25.0;

  std::uint64_t seed = 1;
  double lr = 0.1;
  double momentum = 0.0;  // model optimizer momentum
  WirePrecision wire = WirePrecision::kFloat32;

  double lambda1 = 1.0;
  double lambda2 = 0.5;
  double ae_lr = 0.001;

  int ps_common_sender = 0;  // worker that uplinks the common code (PS)
  int rar_ae_trainer = 0;    // worker that trains the autoencoder (RING)

  ModelSpec model;
  std::size_t train_samples = 2048;
  std::size_t eval_samples = 512;
  double data_noise = 0.3;
  std::size_t batch_size = 8;
  std::uint64_t eval_every = 50;

  std::optional<std::vector<LayerPolicy>> layer_policy_override;

  bool capture_grad_dump = false;
  std::uint64_t dump_stride = 1;
  bool check_sync = true;  // verify replicas stay bit-identical

  /// Every violation found, empty when valid.
  std::vector<std::string> validate() const;
};

struct MetricsRow {
  std::uint64_t iter = 0;
  int phase = 1;
  int node = 0;
  double train_loss = 0.0;
  std::optional<double> eval_acc;
  std::uint64_t uplink_bytes = 0;
  std::optional<double> ae_rec_loss;
  std::optional<double> ae_sim_loss;
};

struct MetricsSeries {
  std::vector<MetricsRow> rows;
  void write_csv(std::ostream& out) const;
};

struct ExperimentResult {
  MetricsSeries metrics;
  RateLedger ledger;
  double final_eval_accuracy = 0.0;
  /// Node-0 weights at every eval point plus the final iteration.
  std::vector<std::pair<std::uint64_t, std::vector<double>>> weight_checkpoints;
  GradientDump dump;  // populated when capture_grad_dump is set
  std::size_t model_param_count = 0;
};

ExperimentResult run_experiment(const TrainConfig& config);

/// Exact dense-baseline byte ledger for the same topology and iteration
/// count (dense payload sizes are value-independent).
RateLedger dense_baseline_ledger(const TrainConfig& config);

/// Per-node uplink payloads for one parameter-server iteration of the
/// configured compressor (the sparse phase-2 flow). Exposed for tests.
struct NodeCompressorState {
  ResidualState residual{};
  std::size_t sparse_begin = 0;  // flat offset where the sparse region starts
};

std::vector<CompressedPayload> compressor_pipeline(CompressorKind kind,
                                                   NodeCompressorState& state,
                                                   const GradientVector& grad,
                                                   const std::vector<LayerPolicy>& policies,
                                                   double ratio_percent,
                                                   std::uint32_t iteration,
                                                   std::uint16_t node_id);

}  // namespace lgc
