#include "lgc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace lgc {

const char* compressor_name(CompressorKind kind) {
  switch (kind) {
    case CompressorKind::kNone: return "none";
    case CompressorKind::kSparseGd: return "sparse_gd";
    case CompressorKind::kDgcLike: return "dgc";
    case CompressorKind::kLgc: return "lgc";
  }
  return "unknown";
}

LayerPolicy layer_policy(int layer_id, int num_layers) {
  if (layer_id == 0) return LayerPolicy::kDense;
  if (layer_id == num_layers - 1) return LayerPolicy::kTopkOnly;
  return LayerPolicy::kTopkPlusAe;
}

void PhaseSchedule::validate(std::vector<std::string>& out) const {
  if (phase1_iters + phase2_iters > total_iters) {
    out.push_back("phases: phase1 + phase2 must not exceed total_iters");
  }
  if (total_iters == 0) {
    out.push_back("phases: total_iters must be positive");
  }
}

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> bad;
  try {
    topology.validate();
  } catch (const ConfigError& e) {
    bad.insert(bad.end(), e.violations.begin(), e.violations.end());
  }
  phases.validate(bad);
  if (!(alpha_percent > 0.0) || alpha_percent > 100.0) {
    bad.push_back("alpha must be in (0, 100]");
  }
  if (!(inner_ratio_percent > 0.0) || inner_ratio_percent > 100.0) {
    bad.push_back("inner_ratio must be in (0, 100]");
  }
  if (!(lr > 0.0)) bad.push_back("lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) bad.push_back("momentum must be in [0, 1)");
  if (mc_momentum < 0.0 || mc_momentum >= 1.0) {
    bad.push_back("mc_momentum must be in [0, 1)");
  }
  if (lambda1 < 0.0) bad.push_back("lambda1 must be non-negative");
  if (lambda2 < 0.0) bad.push_back("lambda2 must be non-negative");
  if (!(ae_lr > 0.0)) bad.push_back("ae_lr must be positive");
  if (batch_size == 0) bad.push_back("batch_size must be positive");
  if (train_samples == 0) bad.push_back("train_samples must be positive");
  if (eval_samples == 0) bad.push_back("eval_samples must be positive");
  if (eval_every == 0) bad.push_back("eval_every must be positive");
  if (dump_stride == 0) bad.push_back("dump_stride must be positive");
  if (compressor == CompressorKind::kLgc && topology.num_workers < 2) {
    bad.push_back("lgc requires at least two workers");
  }
  if (ps_common_sender < 0 || ps_common_sender >= topology.num_workers) {
    bad.push_back("ps_common_sender must be a valid worker id");
  }
  if (rar_ae_trainer < 0 || rar_ae_trainer >= topology.num_workers) {
    bad.push_back("rar_ae_trainer must be a valid worker id");
  }
  if (layer_policy_override &&
      static_cast<int>(layer_policy_override->size()) != model.num_layers()) {
    bad.push_back("layer_policy_override must cover every model layer");
  }
  return bad;
}

void MetricsSeries::write_csv(std::ostream& out) const {
  out << "iter,phase,node,train_loss,eval_acc,uplink_bytes,ae_rec_loss,ae_sim_loss\n";
  char buf[64];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << r.iter << ',' << r.phase << ',' << r.node << ',' << fmt(r.train_loss) << ',';
    if (r.eval_acc) out << fmt(*r.eval_acc);
    out << ',' << r.uplink_bytes << ',';
    if (r.ae_rec_loss) out << fmt(*r.ae_rec_loss);
    out << ',';
    if (r.ae_sim_loss) out << fmt(*r.ae_sim_loss);
    out << '\n';
  }
}

namespace {

//
// ---- sparse-space bookkeeping ---------------------------------------------
//

struct SparseSpace {
  std::vector<GradientVector::Segment> compact;  // contiguous over sparse layers
  std::vector<std::size_t> orig_start;           // flat offset per sparse segment
  std::vector<LayerPolicy> policy;               // per sparse segment
  std::vector<std::size_t> dense_segments;       // indices into the full layout
  std::size_t total = 0;

  std::vector<std::size_t> selection_counts(double ratio_percent) const {
    std::vector<std::size_t> m(compact.size());
    for (std::size_t s = 0; s < compact.size(); ++s) {
      m[s] = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::floor(ratio_percent / 100.0 *
                                                 static_cast<double>(compact[s].length))));
    }
    return m;
  }
};

SparseSpace build_sparse_space(const std::vector<GradientVector::Segment>& layout,
                               const std::vector<LayerPolicy>& policies) {
  SparseSpace space;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layout.size(); ++l) {
    if (policies[l] == LayerPolicy::kDense) {
      space.dense_segments.push_back(l);
      continue;
    }
    space.compact.push_back({layout[l].layer_id, offset, layout[l].length});
    space.orig_start.push_back(layout[l].start);
    space.policy.push_back(policies[l]);
    offset += layout[l].length;
  }
  space.total = offset;
  return space;
}

GradientVector compact_sparse(const SparseSpace& space, const GradientVector& full) {
  GradientVector g;
  g.layer_offsets = space.compact;
  g.values.resize(space.total);
  for (std::size_t s = 0; s < space.compact.size(); ++s) {
    const auto& seg = space.compact[s];
    std::copy_n(full.values.begin() + space.orig_start[s], seg.length,
                g.values.begin() + seg.start);
  }
  return g;
}

//
// ---- error-feedback pieces for the aligned-index flows ---------------------
//

void ef_fold(ResidualState& residual, const GradientVector& fresh) {
  const std::size_t n = fresh.values.size();
  if (residual.mode == ResidualMode::kMomentum) {
    for (std::size_t i = 0; i < n; ++i) {
      residual.momentum_buffer[i] =
          residual.momentum * residual.momentum_buffer[i] + fresh.values[i];
      residual.accumulated[i] += residual.momentum_buffer[i];
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) residual.accumulated[i] += fresh.values[i];
  }
}

std::vector<SparseSelection> ef_select(const ResidualState& residual,
                                       const std::vector<GradientVector::Segment>& segments,
                                       double ratio_percent) {
  std::vector<SparseSelection> out;
  out.reserve(segments.size());
  for (const auto& seg : segments) {
    out.push_back(
        topk_select({residual.accumulated.data() + seg.start, seg.length}, ratio_percent));
  }
  return out;
}

// gather each segment's residual values at imposed local indices, zeroing
// the consumed positions
std::vector<std::vector<double>> ef_collect(
    ResidualState& residual, const std::vector<GradientVector::Segment>& segments,
    const std::vector<std::vector<std::uint32_t>>& indices) {
  std::vector<std::vector<double>> values(segments.size());
  for (std::size_t s = 0; s < segments.size(); ++s) {
    values[s].reserve(indices[s].size());
    for (std::uint32_t local : indices[s]) {
      const std::size_t flat = segments[s].start + local;
      values[s].push_back(residual.accumulated[flat]);
      residual.accumulated[flat] = 0.0;
      if (residual.mode == ResidualMode::kMomentum) {
        residual.momentum_buffer[flat] = 0.0;
      }
    }
  }
  return values;
}

std::vector<float> to_f32(std::span<const double> v) {
  std::vector<float> out(v.size());
  for (std::size_t n = 0; n < v.size(); ++n) out[n] = static_cast<float>(v[n]);
  return out;
}

ResidualMode residual_mode_for(CompressorKind kind) {
  return kind == CompressorKind::kSparseGd ? ResidualMode::kPlain : ResidualMode::kMomentum;
}

}  // namespace

std::vector<CompressedPayload> compressor_pipeline(CompressorKind kind,
                                                   NodeCompressorState& state,
                                                   const GradientVector& grad,
                                                   const std::vector<LayerPolicy>& policies,
                                                   double ratio_percent,
                                                   std::uint32_t iteration,
                                                   std::uint16_t node_id) {
  if (kind == CompressorKind::kNone) {
    throw ConfigError("compressor_pipeline: dense mode has no sparse pipeline");
  }
  const SparseSpace space = build_sparse_space(grad.layer_offsets, policies);
  if (state.residual.accumulated.size() != space.total) {
    state.residual = ResidualState::zeros(space.total, residual_mode_for(kind), 0.9);
  }
  GradientVector sparse = compact_sparse(space, grad);
  const ErrorFeedbackResult ef = error_feedback_step(state.residual, sparse, ratio_percent);

  std::vector<CompressedPayload> payloads;
  CompressedPayload dense;
  dense.kind = PayloadKind::kDense;
  dense.iteration = iteration;
  dense.node_id = node_id;
  for (std::size_t l : space.dense_segments) {
    const auto& seg = grad.layer_offsets[l];
    for (std::size_t i = 0; i < seg.length; ++i) {
      dense.values.push_back(static_cast<float>(grad.values[seg.start + i]));
    }
  }
  if (!dense.values.empty()) payloads.push_back(std::move(dense));

  CompressedPayload topk;
  topk.kind = PayloadKind::kTopk;
  topk.iteration = iteration;
  topk.node_id = node_id;
  for (std::size_t s = 0; s < ef.per_layer.size(); ++s) {
    for (std::size_t i = 0; i < ef.per_layer[s].count(); ++i) {
      topk.indices.push_back(
          static_cast<std::uint32_t>(space.orig_start[s] + ef.per_layer[s].indices[i]));
      topk.values.push_back(static_cast<float>(ef.per_layer[s].values[i]));
    }
  }
  payloads.push_back(std::move(topk));
  return payloads;
}

namespace {

//
// ---- experiment state -------------------------------------------------------
//

struct Experiment {
  const TrainConfig& cfg;
  int K;
  Dataset train, eval;
  std::vector<std::vector<std::size_t>> shards;
  std::vector<SeqNet> replicas;
  std::vector<std::vector<double>> velocity;
  std::vector<GradientVector::Segment> layout;
  std::vector<LayerPolicy> policies;
  SparseSpace space;
  std::vector<ResidualState> residuals;
  std::size_t n_total = 0;

  Autoencoder ae;
  AeTrainState ae_state;
  std::size_t mu = 0;

  RateLedger ledger;
  SimTransport transport;
  Rng lgc_rng;
  std::uint64_t batch_cursor = 0;

  ExperimentResult result;

  explicit Experiment(const TrainConfig& config)
      : cfg(config), K(config.topology.num_workers), transport(&ledger), lgc_rng(0) {}
};

std::vector<std::size_t> next_batch(const Experiment& ex, int node) {
  const auto& shard = ex.shards[node];
  std::vector<std::size_t> batch(ex.cfg.batch_size);
  for (std::size_t b = 0; b < ex.cfg.batch_size; ++b) {
    batch[b] = shard[(ex.batch_cursor + b) % shard.size()];
  }
  return batch;
}

void apply_update_all(Experiment& ex, std::span<const double> update) {
  for (int k = 0; k < ex.K; ++k) {
    if (ex.cfg.momentum > 0.0) {
      auto& v = ex.velocity[k];
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = ex.cfg.momentum * v[i] + update[i];
      }
      apply_flat_update(ex.replicas[k], ex.velocity[k], ex.cfg.lr);
    } else {
      apply_flat_update(ex.replicas[k], update, ex.cfg.lr);
    }
  }
}

double ratio_for_iteration(const Experiment& ex, std::uint64_t it, bool& dense_now) {
  ScheduleParams sp;
  switch (ex.cfg.compressor) {
    case CompressorKind::kNone:
      dense_now = true;
      return 0.0;
    case CompressorKind::kSparseGd:
      sp.kind = ScheduleKind::kFixed;
      sp.final_ratio_percent = ex.cfg.alpha_percent;
      break;
    case CompressorKind::kDgcLike:
      sp.kind = ScheduleKind::kExponentialRampup;
      sp.start_ratio_percent = ex.cfg.ramp_start_percent;
      sp.final_ratio_percent = ex.cfg.alpha_percent;
      sp.ramp_iters = std::max<std::uint64_t>(1, ex.cfg.phases.phase1_iters);
      break;
    case CompressorKind::kLgc:
      sp.kind = ScheduleKind::kWarmupThenFixed;
      sp.warmup_iters = ex.cfg.phases.phase1_iters;
      sp.final_ratio_percent = ex.cfg.alpha_percent;
      break;
  }
  const auto ratio = sparsity_schedule(it, sp);
  dense_now = !ratio.has_value();
  return ratio.value_or(0.0);
}

int metrics_phase(const Experiment& ex, std::uint64_t it) {
  switch (ex.cfg.compressor) {
    case CompressorKind::kNone: return 1;
    case CompressorKind::kSparseGd:
    case CompressorKind::kDgcLike: return 2;
    case CompressorKind::kLgc: return ex.cfg.phases.phase_of(it);
  }
  return 1;
}

void scatter_dense_region(const Experiment& ex, std::span<const double> reduced,
                          std::vector<double>& update) {
  std::size_t cursor = 0;
  for (std::size_t l : ex.space.dense_segments) {
    const auto& seg = ex.layout[l];
    for (std::size_t i = 0; i < seg.length; ++i, ++cursor) {
      update[seg.start + i] = reduced[cursor];
    }
  }
}

void reduce_dense_region_ring(Experiment& ex, const std::vector<GradientVector>& grads,
                              std::uint32_t it, std::vector<double>& update) {
  if (ex.space.dense_segments.empty()) return;
  std::vector<std::vector<double>> region(ex.K);
  for (int k = 0; k < ex.K; ++k) {
    for (std::size_t l : ex.space.dense_segments) {
      const auto& seg = ex.layout[l];
      region[k].insert(region[k].end(), grads[k].values.begin() + seg.start,
                       grads[k].values.begin() + seg.start + seg.length);
    }
  }
  auto reduced = ring_allreduce(region, ex.cfg.topology, ex.transport, it,
                                PayloadKind::kDense, ex.cfg.wire);
  scatter_dense_region(ex, reduced[0], update);
}

//
// ---- dense exchange ---------------------------------------------------------
//

std::vector<double> exchange_dense(Experiment& ex, const std::vector<GradientVector>& grads,
                                   std::uint32_t it) {
  if (ex.cfg.topology.pattern == Topology::Pattern::kRing) {
    std::vector<std::vector<double>> per_node(ex.K);
    for (int k = 0; k < ex.K; ++k) per_node[k] = grads[k].values;
    auto reduced = ring_allreduce(per_node, ex.cfg.topology, ex.transport, it,
                                  PayloadKind::kDense, ex.cfg.wire);
    return reduced[0];
  }
  std::vector<std::vector<CompressedPayload>> payloads(ex.K);
  for (int k = 0; k < ex.K; ++k) {
    CompressedPayload p;
    p.kind = PayloadKind::kDense;
    p.iteration = it;
    p.node_id = static_cast<std::uint16_t>(k);
    p.values = to_f32(grads[k].values);
    payloads[k].push_back(std::move(p));
  }
  auto round = ps_round(payloads, dense_mean_reducer(), ex.cfg.topology, ex.transport, it);
  const auto& mean = round.received[0][0].values;
  return std::vector<double>(mean.begin(), mean.end());
}

//
// ---- parameter-server sparse exchange (independent selections) -------------
//

struct PsSparseResult {
  std::vector<double> update;
  std::vector<std::vector<double>> mu_vectors;  // per node, AE segments only
};

PsSparseResult exchange_ps_sparse(Experiment& ex, const std::vector<GradientVector>& grads,
                                  double ratio, std::uint32_t it, bool collect_mu) {
  std::vector<std::vector<CompressedPayload>> payloads(ex.K);
  for (int k = 0; k < ex.K; ++k) {
    NodeCompressorState state;
    state.residual = std::move(ex.residuals[k]);
    payloads[k] = compressor_pipeline(ex.cfg.compressor, state, grads[k], ex.policies, ratio,
                                      it, static_cast<std::uint16_t>(k));
    ex.residuals[k] = std::move(state.residual);
  }

  PsSparseResult out;
  if (collect_mu) out.mu_vectors.resize(ex.K);
  const auto counts = ex.space.selection_counts(ratio);

  auto reducer = [&](const std::vector<std::vector<CompressedPayload>>& per_worker) {
    std::vector<double> dense_sum;
    std::map<std::uint32_t, double> by_index;
    for (int k = 0; k < ex.K; ++k) {
      for (const auto& p : per_worker[k]) {
        if (p.kind == PayloadKind::kDense) {
          if (dense_sum.empty()) dense_sum.assign(p.values.size(), 0.0);
          for (std::size_t i = 0; i < p.values.size(); ++i) {
            dense_sum[i] += static_cast<double>(p.values[i]);
          }
        } else if (p.kind == PayloadKind::kTopk) {
          for (std::size_t i = 0; i < p.indices.size(); ++i) {
            by_index[p.indices[i]] += static_cast<double>(p.values[i]);
          }
          if (collect_mu) {
            std::size_t cursor = 0;
            for (std::size_t s = 0; s < ex.space.compact.size(); ++s) {
              if (ex.space.policy[s] == LayerPolicy::kTopkPlusAe) {
                for (std::size_t i = 0; i < counts[s]; ++i) {
                  out.mu_vectors[k].push_back(static_cast<double>(p.values[cursor + i]));
                }
              }
              cursor += counts[s];
            }
          }
        }
      }
    }
    std::vector<CompressedPayload> broadcast;
    if (!dense_sum.empty()) {
      CompressedPayload d;
      d.kind = PayloadKind::kDense;
      d.iteration = it;
      d.node_id = 0xffff;
      d.values.resize(dense_sum.size());
      for (std::size_t i = 0; i < dense_sum.size(); ++i) {
        d.values[i] = static_cast<float>(dense_sum[i] / ex.K);
      }
      broadcast.push_back(std::move(d));
    }
    CompressedPayload t;
    t.kind = PayloadKind::kTopk;
    t.iteration = it;
    t.node_id = 0xffff;
    for (const auto& [idx, sum] : by_index) {
      t.indices.push_back(idx);
      t.values.push_back(static_cast<float>(sum / ex.K));
    }
    broadcast.push_back(std::move(t));
    return broadcast;
  };

  auto round = ps_round(payloads, reducer, ex.cfg.topology, ex.transport, it);
  out.update.assign(ex.n_total, 0.0);
  for (const auto& p : round.received[0]) {
    if (p.kind == PayloadKind::kDense) {
      std::vector<double> region(p.values.begin(), p.values.end());
      scatter_dense_region(ex, region, out.update);
    } else if (p.kind == PayloadKind::kTopk) {
      for (std::size_t i = 0; i < p.indices.size(); ++i) {
        out.update[p.indices[i]] = static_cast<double>(p.values[i]);
      }
    }
  }
  return out;
}

//
// ---- ring sparse exchange, independent selections (baselines) --------------
//

std::vector<double> exchange_ring_sparse_independent(Experiment& ex,
                                                     const std::vector<GradientVector>& grads,
                                                     double ratio, std::uint32_t it) {
  std::vector<std::vector<std::uint8_t>> blobs(ex.K);
  std::vector<std::vector<double>> dense_region(ex.K);
  for (int k = 0; k < ex.K; ++k) {
    NodeCompressorState state;
    state.residual = std::move(ex.residuals[k]);
    auto payloads = compressor_pipeline(ex.cfg.compressor, state, grads[k], ex.policies,
                                        ratio, it, static_cast<std::uint16_t>(k));
    ex.residuals[k] = std::move(state.residual);
    for (auto& p : payloads) {
      if (p.kind == PayloadKind::kTopk) blobs[k] = pack_payload(p);
    }
  }
  auto gathered = ring_allgather(blobs, ex.cfg.topology, ex.transport, it, PayloadKind::kTopk);

  std::vector<double> update(ex.n_total, 0.0);
  std::map<std::uint32_t, double> by_index;
  for (int origin = 0; origin < ex.K; ++origin) {
    const auto payload =
        unpack_payload({gathered[0][origin].data(), gathered[0][origin].size()});
    for (std::size_t i = 0; i < payload.indices.size(); ++i) {
      by_index[payload.indices[i]] += static_cast<double>(payload.values[i]);
    }
  }
  for (const auto& [idx, sum] : by_index) {
    update[idx] = sum / ex.K;
  }
  reduce_dense_region_ring(ex, grads, it, update);
  return update;
}

//
// ---- ring aligned selection (lgc) ------------------------------------------
//

struct AlignedCollect {
  int selector = 0;
  std::vector<std::vector<std::vector<double>>> values;  // [node][segment][i]
  std::vector<std::vector<std::uint32_t>> local_indices;  // [segment][i]
};

// One per-iteration aligned round: fold gradients into every residual, let
// a randomly picked node choose the indices, broadcast them DEFLATE-coded,
// and collect each node's values at those positions.
AlignedCollect ring_aligned_collect(Experiment& ex, const std::vector<GradientVector>& grads,
                                    double ratio, std::uint32_t it) {
  AlignedCollect out;
  out.selector = static_cast<int>(ex.lgc_rng.index(ex.K));
  for (int k = 0; k < ex.K; ++k) {
    GradientVector sparse = compact_sparse(ex.space, grads[k]);
    ef_fold(ex.residuals[k], sparse);
  }
  const auto selections = ef_select(ex.residuals[out.selector], ex.space.compact, ratio);
  out.local_indices.resize(selections.size());
  CompressedPayload index_payload;
  index_payload.kind = PayloadKind::kInnovation;  // index-only broadcast
  index_payload.iteration = it;
  index_payload.node_id = static_cast<std::uint16_t>(out.selector);
  for (std::size_t s = 0; s < selections.size(); ++s) {
    out.local_indices[s] = selections[s].indices;
    for (std::uint32_t local : selections[s].indices) {
      index_payload.indices.push_back(
          static_cast<std::uint32_t>(ex.space.orig_start[s] + local));
    }
  }
  ring_broadcast(pack_payload(index_payload), out.selector, ex.cfg.topology, ex.transport, it,
                 PayloadKind::kInnovation);

  out.values.resize(ex.K);
  for (int k = 0; k < ex.K; ++k) {
    out.values[k] = ef_collect(ex.residuals[k], ex.space.compact, out.local_indices);
  }
  return out;
}

std::vector<double> slice_mu(const Experiment& ex,
                             const std::vector<std::vector<double>>& per_segment) {
  std::vector<double> mu;
  for (std::size_t s = 0; s < ex.space.compact.size(); ++s) {
    if (ex.space.policy[s] == LayerPolicy::kTopkPlusAe) {
      mu.insert(mu.end(), per_segment[s].begin(), per_segment[s].end());
    }
  }
  return mu;
}

// phase 2 on the ring: allgather the aligned values (the autoencoder
// trainer needs every node's vector), mean locally, fit the autoencoder.
std::vector<double> lgc_ring_phase2(Experiment& ex, const std::vector<GradientVector>& grads,
                                    double ratio, std::uint32_t it,
                                    std::optional<double>& ae_rec) {
  AlignedCollect col = ring_aligned_collect(ex, grads, ratio, it);

  std::vector<std::vector<std::uint8_t>> blobs(ex.K);
  for (int k = 0; k < ex.K; ++k) {
    CompressedPayload p;
    p.kind = PayloadKind::kTopk;  // value-only: indices travelled separately
    p.iteration = it;
    p.node_id = static_cast<std::uint16_t>(k);
    for (const auto& seg_values : col.values[k]) {
      for (double v : seg_values) p.values.push_back(static_cast<float>(v));
    }
    blobs[k] = pack_payload(p);
  }
  auto gathered = ring_allgather(blobs, ex.cfg.topology, ex.transport, it, PayloadKind::kTopk);

  // node 0's view; all nodes compute the same numbers
  std::vector<std::vector<double>> wire_values(ex.K);
  for (int origin = 0; origin < ex.K; ++origin) {
    const auto p = unpack_payload({gathered[0][origin].data(), gathered[0][origin].size()});
    wire_values[origin].assign(p.values.begin(), p.values.end());
  }
  const std::size_t m_total = wire_values[0].size();
  std::vector<double> mean(m_total, 0.0);
  for (int k = 0; k < ex.K; ++k) {
    for (std::size_t i = 0; i < m_total; ++i) mean[i] += wire_values[k][i];
  }
  for (double& v : mean) v /= ex.K;

  std::vector<double> update(ex.n_total, 0.0);
  std::size_t cursor = 0;
  for (std::size_t s = 0; s < ex.space.compact.size(); ++s) {
    for (std::uint32_t local : col.local_indices[s]) {
      update[ex.space.orig_start[s] + local] = mean[cursor++];
    }
  }
  reduce_dense_region_ring(ex, grads, it, update);

  // the designated node trains on the gathered per-node mu slices
  std::vector<std::vector<double>> mu_vectors(ex.K);
  for (int k = 0; k < ex.K; ++k) {
    std::size_t pos = 0;
    for (std::size_t s = 0; s < ex.space.compact.size(); ++s) {
      const std::size_t m = col.local_indices[s].size();
      if (ex.space.policy[s] == LayerPolicy::kTopkPlusAe) {
        mu_vectors[k].insert(mu_vectors[k].end(), wire_values[k].begin() + pos,
                             wire_values[k].begin() + pos + m);
      }
      pos += m;
    }
  }
  ae_rec = ae_train_step_rar(ex.ae, ex.ae_state, mu_vectors, ex.cfg.ae_lr);
  return update;
}

// phase 3 on the ring: encode the aligned mu-vectors, average the codes
// over the ring, decode locally, scatter at the shared indices.
std::vector<double> lgc_ring_phase3(Experiment& ex, const std::vector<GradientVector>& grads,
                                    double ratio, std::uint32_t it) {
  AlignedCollect col = ring_aligned_collect(ex, grads, ratio, it);

  std::vector<std::vector<double>> codes(ex.K);
  for (int k = 0; k < ex.K; ++k) {
    codes[k] = encode_common(ex.ae, slice_mu(ex, col.values[k])).data;
  }
  auto avg = ring_allreduce(codes, ex.cfg.topology, ex.transport, it, PayloadKind::kCommon,
                            ex.cfg.wire);
  ChannelSignal avg_code(4, ex.ae.code_length());
  avg_code.data = avg[0];
  const std::vector<double> rec = decode_rar(ex.ae, avg_code);

  // plain top-k segments: ring-allreduce the aligned values
  std::vector<std::vector<double>> head(ex.K);
  for (int k = 0; k < ex.K; ++k) {
    for (std::size_t s = 0; s < ex.space.compact.size(); ++s) {
      if (ex.space.policy[s] == LayerPolicy::kTopkPlusAe) continue;
      head[k].insert(head[k].end(), col.values[k][s].begin(), col.values[k][s].end());
    }
  }
  std::vector<double> head_mean;
  if (!head[0].empty()) {
    auto reduced = ring_allreduce(head, ex.cfg.topology, ex.transport, it,
                                  PayloadKind::kTopk, ex.cfg.wire);
    head_mean = reduced[0];
  }

  std::vector<double> update(ex.n_total, 0.0);
  std::size_t mu_cursor = 0;
  std::size_t head_cursor = 0;
  for (std::size_t s = 0; s < ex.space.compact.size(); ++s) {
    const bool is_ae = ex.space.policy[s] == LayerPolicy::kTopkPlusAe;
    for (std::uint32_t local : col.local_indices[s]) {
      update[ex.space.orig_start[s] + local] =
          is_ae ? rec[mu_cursor++] : head_mean[head_cursor++];
    }
  }
  reduce_dense_region_ring(ex, grads, it, update);
  return update;
}

//
// ---- lgc phase 3, parameter server -----------------------------------------
//

std::vector<double> lgc_ps_phase3(Experiment& ex, const std::vector<GradientVector>& grads,
                                  double ratio, std::uint32_t it) {
  const int designated = ex.cfg.ps_common_sender;

  std::vector<std::vector<CompressedPayload>> payloads(ex.K);
  for (int k = 0; k < ex.K; ++k) {
    GradientVector sparse = compact_sparse(ex.space, grads[k]);
    const ErrorFeedbackResult ef = error_feedback_step(ex.residuals[k], sparse, ratio);

    CompressedPayload dense;
    dense.kind = PayloadKind::kDense;
    dense.iteration = it;
    dense.node_id = static_cast<std::uint16_t>(k);
    for (std::size_t l : ex.space.dense_segments) {
      const auto& seg = ex.layout[l];
      for (std::size_t i = 0; i < seg.length; ++i) {
        dense.values.push_back(static_cast<float>(grads[k].values[seg.start + i]));
      }
    }
    if (!dense.values.empty()) payloads[k].push_back(std::move(dense));

    std::vector<double> mu_vector;
    std::vector<std::uint32_t> ae_indices;
    CompressedPayload head;
    head.kind = PayloadKind::kTopk;
    head.iteration = it;
    head.node_id = static_cast<std::uint16_t>(k);
    for (std::size_t s = 0; s < ex.space.compact.size(); ++s) {
      const auto& sel = ef.per_layer[s];
      if (ex.space.policy[s] == LayerPolicy::kTopkPlusAe) {
        for (std::size_t i = 0; i < sel.count(); ++i) {
          mu_vector.push_back(sel.values[i]);
          ae_indices.push_back(
              static_cast<std::uint32_t>(ex.space.orig_start[s] + sel.indices[i]));
        }
      } else {
        for (std::size_t i = 0; i < sel.count(); ++i) {
          head.indices.push_back(
              static_cast<std::uint32_t>(ex.space.orig_start[s] + sel.indices[i]));
          head.values.push_back(static_cast<float>(sel.values[i]));
        }
      }
    }
    if (!head.indices.empty()) payloads[k].push_back(std::move(head));

    const SparseSelection innovation = topk_select(mu_vector, ex.cfg.inner_ratio_percent);
    CompressedPayload innov;
    innov.kind = PayloadKind::kInnovation;
    innov.iteration = it;
    innov.node_id = static_cast<std::uint16_t>(k);
    innov.indices = innovation.indices;
    for (double v : innovation.values) innov.values.push_back(static_cast<float>(v));
    payloads[k].push_back(std::move(innov));

    if (k == designated) {
      CompressedPayload common;
      common.kind = PayloadKind::kCommon;
      common.iteration = it;
      common.node_id = static_cast<std::uint16_t>(k);
      common.values = to_f32(encode_common(ex.ae, mu_vector).data);
      payloads[k].push_back(std::move(common));

      CompressedPayload support;
      support.kind = PayloadKind::kTopk;  // index-only: where the code lives
      support.iteration = it;
      support.node_id = static_cast<std::uint16_t>(k);
      support.indices = std::move(ae_indices);
      payloads[k].push_back(std::move(support));
    }
  }

  auto reducer = [&](const std::vector<std::vector<CompressedPayload>>& per_worker) {
    ChannelSignal code(4, ex.ae.code_length());
    std::vector<std::uint32_t> support;
    std::vector<double> dense_sum;
    std::map<std::uint32_t, double> head_sum;
    std::vector<SparseSelection> innovations(ex.K);
    for (int k = 0; k < ex.K; ++k) {
      for (const auto& p : per_worker[k]) {
        switch (p.kind) {
          case PayloadKind::kCommon:
            for (std::size_t i = 0; i < p.values.size(); ++i) {
              code.data[i] = static_cast<double>(p.values[i]);
            }
            break;
          case PayloadKind::kInnovation:
            innovations[k].source_length = ex.mu;
            innovations[k].indices = p.indices;
            for (float v : p.values) {
              innovations[k].values.push_back(static_cast<double>(v));
            }
            break;
          case PayloadKind::kTopk:
            if (p.values.empty()) {
              support = p.indices;
            } else {
              for (std::size_t i = 0; i < p.indices.size(); ++i) {
                head_sum[p.indices[i]] += static_cast<double>(p.values[i]);
              }
            }
            break;
          case PayloadKind::kDense:
            if (dense_sum.empty()) dense_sum.assign(p.values.size(), 0.0);
            for (std::size_t i = 0; i < p.values.size(); ++i) {
              dense_sum[i] += static_cast<double>(p.values[i]);
            }
            break;
        }
      }
    }
    std::vector<double> rec_mean(ex.mu, 0.0);
    for (int k = 0; k < ex.K; ++k) {
      const std::vector<double> rec =
          decode_ps(ex.ae, code, innovations[k], static_cast<std::size_t>(k));
      for (std::size_t i = 0; i < ex.mu; ++i) rec_mean[i] += rec[i];
    }
    for (double& v : rec_mean) v /= ex.K;

    std::vector<CompressedPayload> broadcast;
    if (!dense_sum.empty()) {
      CompressedPayload d;
      d.kind = PayloadKind::kDense;
      d.iteration = it;
      d.node_id = 0xffff;
      d.values.resize(dense_sum.size());
      for (std::size_t i = 0; i < dense_sum.size(); ++i) {
        d.values[i] = static_cast<float>(dense_sum[i] / ex.K);
      }
      broadcast.push_back(std::move(d));
    }
    CompressedPayload rec_payload;
    rec_payload.kind = PayloadKind::kTopk;
    rec_payload.iteration = it;
    rec_payload.node_id = 0xffff;
    rec_payload.indices = support;
    for (std::size_t i = 0; i < support.size(); ++i) {
      rec_payload.values.push_back(static_cast<float>(rec_mean[i]));
    }
    broadcast.push_back(std::move(rec_payload));

    CompressedPayload head;
    head.kind = PayloadKind::kTopk;
    head.iteration = it;
    head.node_id = 0xffff;
    for (const auto& [idx, sum] : head_sum) {
      head.indices.push_back(idx);
      head.values.push_back(static_cast<float>(sum / ex.K));
    }
    if (!head.indices.empty()) broadcast.push_back(std::move(head));
    return broadcast;
  };

  auto round = ps_round(payloads, reducer, ex.cfg.topology, ex.transport, it);

  std::vector<double> update(ex.n_total, 0.0);
  for (const auto& p : round.received[0]) {
    if (p.kind == PayloadKind::kDense) {
      std::vector<double> region(p.values.begin(), p.values.end());
      scatter_dense_region(ex, region, update);
    } else if (p.kind == PayloadKind::kTopk) {
      for (std::size_t i = 0; i < p.indices.size(); ++i) {
        update[p.indices[i]] = static_cast<double>(p.values[i]);
      }
    }
  }
  return update;
}

//
// ---- autoencoder deployment at the phase 2 -> 3 boundary --------------------
//

std::vector<float> encoder_snapshot_f32(Autoencoder& ae) {
  std::vector<float> snap;
  for (const auto& span : param_spans(ae.encoder)) {
    for (std::size_t n = 0; n < span.size; ++n) {
      snap.push_back(static_cast<float>(span.data[n]));
    }
  }
  return snap;
}

void load_encoder_snapshot_f32(Autoencoder& ae, std::span<const float> snap) {
  std::size_t pos = 0;
  for (const auto& span : param_spans(ae.encoder)) {
    for (std::size_t n = 0; n < span.size; ++n) {
      span.data[n] = static_cast<double>(snap[pos++]);
    }
  }
}

void deploy_autoencoder(Experiment& ex, std::uint32_t boundary_iteration) {
  if (ex.cfg.topology.pattern == Topology::Pattern::kRing) {
    // the trainer node ships encoder + decoder to everyone, once
    CompressedPayload weights;
    weights.kind = PayloadKind::kDense;
    weights.iteration = boundary_iteration;
    weights.node_id = static_cast<std::uint16_t>(ex.cfg.rar_ae_trainer);
    weights.values = ae_snapshot_f32(ex.ae);
    ring_broadcast(pack_payload(weights), ex.cfg.rar_ae_trainer, ex.cfg.topology,
                   ex.transport, boundary_iteration, PayloadKind::kDense);
    // everyone, the trainer included, runs the deployed 32-bit weights
    ae_load_snapshot_f32(ex.ae, weights.values);
  } else {
    // the master ships the encoder to the designated worker (downlink)
    CompressedPayload weights;
    weights.kind = PayloadKind::kDense;
    weights.iteration = boundary_iteration;
    weights.node_id = 0xffff;
    weights.values = encoder_snapshot_f32(ex.ae);
    ex.transport.send(boundary_iteration, ex.cfg.topology.master(), ex.cfg.ps_common_sender,
                      PayloadKind::kDense, pack_payload(weights));
    ex.transport.recv(ex.cfg.ps_common_sender, ex.cfg.topology.master());
    load_encoder_snapshot_f32(ex.ae, weights.values);
  }
}

}  // namespace

ExperimentResult run_experiment(const TrainConfig& config) {
  {
    const auto violations = config.validate();
    if (!violations.empty()) throw ConfigError(violations);
  }
  Experiment ex(config);
  const int K = ex.K;

  ex.train =
      make_pattern_dataset(config.train_samples, config.seed * 7919 + 1, config.data_noise);
  ex.eval =
      make_pattern_dataset(config.eval_samples, config.seed * 104729 + 2, config.data_noise);
  for (int k = 0; k < K; ++k) {
    ex.shards.push_back(shard_indices(ex.train.size(), k, K));
  }

  Rng init_rng(config.seed * 31337 + 3);
  SeqNet model = build_model(config.model, init_rng);
  ex.layout = gradient_layout(model);
  ex.n_total = model.param_count();
  ex.result.model_param_count = ex.n_total;
  ex.policies.resize(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    ex.policies[l] =
        config.layer_policy_override
            ? (*config.layer_policy_override)[l]
            : layer_policy(static_cast<int>(l), static_cast<int>(model.layers.size()));
  }
  ex.space = build_sparse_space(ex.layout, ex.policies);
  for (int k = 0; k < K; ++k) {
    ex.replicas.push_back(model);
    ex.velocity.emplace_back(ex.n_total, 0.0);
    ex.residuals.push_back(ResidualState::zeros(
        ex.space.total, residual_mode_for(config.compressor), config.mc_momentum));
  }

  ex.lgc_rng = Rng(config.seed * 6151 + 4);
  if (config.compressor == CompressorKind::kLgc) {
    const auto counts = ex.space.selection_counts(config.alpha_percent);
    ex.mu = 0;
    for (std::size_t s = 0; s < ex.space.compact.size(); ++s) {
      if (ex.space.policy[s] == LayerPolicy::kTopkPlusAe) ex.mu += counts[s];
    }
    if (ex.mu < 16) {
      throw ConfigError("lgc: concatenated top-k length mu=" + std::to_string(ex.mu) +
                        " is below the autoencoder minimum of 16; raise alpha or widen "
                        "the model");
    }
    Rng ae_rng(config.seed * 24593 + 5);
    const AeVariant variant = config.topology.pattern == Topology::Pattern::kRing
                                  ? AeVariant::kRingAllreduce
                                  : AeVariant::kParameterServer;
    ex.ae = make_autoencoder(variant, static_cast<int>(ex.mu), static_cast<std::size_t>(K),
                             ae_rng, config.inner_ratio_percent);
    ex.ae_state = zero_ae_momentum(ex.ae);
  }

  if (config.capture_grad_dump) {
    ex.result.dump.num_nodes = static_cast<std::uint16_t>(K);
    ex.result.dump.num_layers = static_cast<std::uint16_t>(model.layers.size());
  }

  const std::uint64_t total = config.phases.total_iters;
  const std::uint64_t phase3_start = config.phases.phase1_iters + config.phases.phase2_iters;
  for (std::uint64_t it = 0; it < total; ++it) {
    const std::uint32_t it32 = static_cast<std::uint32_t>(it);

    if (config.compressor == CompressorKind::kLgc && it == phase3_start) {
      deploy_autoencoder(ex, it32 > 0 ? it32 - 1 : 0);
    }
    const std::size_t ledger_mark = ex.ledger.entries().size();

    std::vector<GradientVector> grads(K);
    std::vector<double> losses(K);
    for (int k = 0; k < K; ++k) {
      const auto batch = next_batch(ex, k);
      BatchGrad bg = batch_gradient(ex.replicas[k], ex.train, batch);
      losses[k] = bg.loss;
      grads[k] = std::move(bg.grad);
    }
    ex.batch_cursor += config.batch_size;

    if (config.capture_grad_dump && it % config.dump_stride == 0) {
      for (int k = 0; k < K; ++k) {
        for (const auto& seg : ex.layout) {
          GradientDump::Record r;
          r.layer_id = static_cast<std::uint32_t>(seg.layer_id);
          r.values.resize(seg.length);
          for (std::size_t i = 0; i < seg.length; ++i) {
            r.values[i] = static_cast<float>(grads[k].values[seg.start + i]);
          }
          ex.result.dump.records.push_back(std::move(r));
        }
      }
    }

    bool dense_now = false;
    const double ratio = ratio_for_iteration(ex, it, dense_now);
    std::optional<double> ae_rec, ae_sim;

    std::vector<double> update;
    if (dense_now || config.compressor == CompressorKind::kNone) {
      update = exchange_dense(ex, grads, it32);
    } else if (config.compressor == CompressorKind::kSparseGd ||
               config.compressor == CompressorKind::kDgcLike) {
      if (config.topology.pattern == Topology::Pattern::kRing) {
        update = exchange_ring_sparse_independent(ex, grads, ratio, it32);
      } else {
        update = exchange_ps_sparse(ex, grads, ratio, it32, /*collect_mu=*/false).update;
      }
    } else {  // lgc
      const bool compressed_phase = it >= phase3_start;
      if (config.topology.pattern == Topology::Pattern::kRing) {
        update = compressed_phase ? lgc_ring_phase3(ex, grads, ratio, it32)
                                  : lgc_ring_phase2(ex, grads, ratio, it32, ae_rec);
      } else {
        if (compressed_phase) {
          update = lgc_ps_phase3(ex, grads, ratio, it32);
        } else {
          PsSparseResult r = exchange_ps_sparse(ex, grads, ratio, it32, /*collect_mu=*/true);
          update = std::move(r.update);
          const AeLosses ae_losses =
              ae_train_step_ps(ex.ae, ex.ae_state, r.mu_vectors, config.lambda1,
                               config.lambda2, config.ae_lr, ex.lgc_rng);
          ae_rec = ae_losses.rec;
          ae_sim = ae_losses.sim;
        }
      }
    }

    apply_update_all(ex, update);

    std::vector<std::uint64_t> uplink(K, 0);
    for (std::size_t e = ledger_mark; e < ex.ledger.entries().size(); ++e) {
      const auto& entry = ex.ledger.entries()[e];
      if (entry.sender >= 0 && entry.sender < K) {
        uplink[entry.sender] += entry.bytes;
      }
    }

    const bool eval_now = (it % config.eval_every == config.eval_every - 1) || it + 1 == total;
    std::optional<double> acc;
    if (eval_now) {
      acc = evaluate_accuracy(ex.replicas[0], ex.eval);
      ex.result.weight_checkpoints.emplace_back(it, flatten_params(ex.replicas[0]));
      if (config.check_sync) {
        const auto w0 = flatten_params(ex.replicas[0]);
        for (double w : w0) {
          if (!std::isfinite(w)) {
            throw ProtocolError("non-finite weights at iteration " + std::to_string(it) +
                                "; lower the learning rate");
          }
        }
        for (int k = 1; k < K; ++k) {
          if (flatten_params(ex.replicas[k]) != w0) {
            throw ProtocolError("replica weights diverged at iteration " +
                                std::to_string(it));
          }
        }
      }
    }

    for (int k = 0; k < K; ++k) {
      MetricsRow row;
      row.iter = it;
      row.phase = metrics_phase(ex, it);
      row.node = k;
      row.train_loss = losses[k];
      row.uplink_bytes = uplink[k];
      if (k == 0) {
        row.eval_acc = acc;
        row.ae_rec_loss = ae_rec;
        row.ae_sim_loss = ae_sim;
      }
      ex.result.metrics.rows.push_back(row);
    }
  }

  ex.result.final_eval_accuracy = evaluate_accuracy(ex.replicas[0], ex.eval);
  ex.result.ledger = std::move(ex.ledger);
  return ex.result;
}

RateLedger dense_baseline_ledger(const TrainConfig& config) {
  RateLedger ledger;
  SimTransport transport(&ledger);
  Rng rng(1);
  SeqNet model = build_model(config.model, rng);
  const std::size_t n = model.param_count();
  const int K = config.topology.num_workers;
  for (std::uint64_t it = 0; it < config.phases.total_iters; ++it) {
    const std::uint32_t it32 = static_cast<std::uint32_t>(it);
    if (config.topology.pattern == Topology::Pattern::kRing) {
      std::vector<std::vector<double>> zeros(K, std::vector<double>(n, 0.0));
      ring_allreduce(zeros, config.topology, transport, it32, PayloadKind::kDense,
                     config.wire);
    } else {
      std::vector<std::vector<CompressedPayload>> payloads(K);
      for (int k = 0; k < K; ++k) {
        CompressedPayload p;
        p.kind = PayloadKind::kDense;
        p.iteration = it32;
        p.node_id = static_cast<std::uint16_t>(k);
        p.values.assign(n, 0.0f);
        payloads[k].push_back(std::move(p));
      }
      ps_round(payloads, dense_mean_reducer(), config.topology, transport, it32);
    }
  }
  return ledger;
}

}  // namespace lgc
