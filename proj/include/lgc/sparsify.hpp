#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lgc/errors.hpp"

namespace lgc {

/// A flattened gradient with layer-boundary metadata. Layer segments are
/// contiguous, non-overlapping and cover the whole vector.
struct GradientVector {
  struct Segment {
    int layer_id = 0;
    std::size_t start = 0;
    std::size_t length = 0;
  };

  std::vector<double> values;
  std::vector<Segment> layer_offsets;

  std::span<const double> segment(std::size_t l) const {
    return {values.data() + layer_offsets[l].start, layer_offsets[l].length};
  }
  std::span<double> segment(std::size_t l) {
    return {values.data() + layer_offsets[l].start, layer_offsets[l].length};
  }

  void validate() const;
};

/// Result of top-k selection over one vector: indices are strictly
/// increasing, every selected magnitude >= threshold, ties resolved in
/// favor of the lowest index.
struct SparseSelection {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  double threshold = 0.0;
  std::size_t source_length = 0;

  std::size_t count() const { return indices.size(); }

  /// Scatter values back into a zero vector of source_length entries.
  std::vector<double> densify() const;
};

/// Keep the m = max(1, floor(ratio_percent/100 * len)) largest-magnitude
/// entries.
SparseSelection topk_select(std::span<const double> segment, double ratio_percent);

/// Top inner_ratio_percent of an existing selection, by magnitude; indices
/// stay in the source coordinate space.
SparseSelection extract_innovation(const SparseSelection& selection,
                                   double inner_ratio_percent);

enum class ResidualMode { kPlain, kMomentum };

/// Per-node error-feedback state. `accumulated` is the unsent gradient
/// mass; `momentum_buffer` carries the momentum-corrected velocity when
/// mode == kMomentum.
struct ResidualState {
  std::vector<double> accumulated;
  std::vector<double> momentum_buffer;
  ResidualMode mode = ResidualMode::kPlain;
  double momentum = 0.9;

  static ResidualState zeros(std::size_t n, ResidualMode mode, double momentum = 0.9);
};

struct ErrorFeedbackResult {
  std::vector<SparseSelection> per_layer;  // indices local to each segment
};

/// One error-feedback round: fold the residual into the fresh gradient,
/// select per layer, zero the selected positions in the residual.
/// In momentum mode the DGC-style recurrence runs first:
///   u <- m*u + fresh;  acc <- acc + u;  select on acc;
///   acc, u <- (1-mask) * {acc, u}.
ErrorFeedbackResult error_feedback_step(ResidualState& residual,
                                        const GradientVector& fresh_grad,
                                        double ratio_percent);

/// Sparsification schedules. nullopt means "send dense" (no sparsification).
enum class ScheduleKind { kFixed, kExponentialRampup, kWarmupThenFixed };

struct ScheduleParams {
  ScheduleKind kind = ScheduleKind::kFixed;
  double final_ratio_percent = 0.1;
  double start_ratio_percent = 25.0;  // exponential ramp start
  std::uint64_t ramp_iters = 0;       // exponential ramp length
  std::uint64_t warmup_iters = 0;     // dense iterations before fixed ratio

  void validate() const;
};

std::optional<double> sparsity_schedule(std::uint64_t iteration, const ScheduleParams& params);

}  // namespace lgc
