#include "lgc/sparsify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace lgc {

void GradientVector::validate() const {
  std::size_t expect = 0;
  for (const auto& seg : layer_offsets) {
    if (seg.start != expect) {
      throw ShapeError("gradient segments are not contiguous at layer " +
                       std::to_string(seg.layer_id));
    }
    expect += seg.length;
  }
  if (expect != values.size()) {
    throw ShapeError("gradient segments do not cover the value vector");
  }
}

std::vector<double> SparseSelection::densify() const {
  std::vector<double> dense(source_length, 0.0);
  for (std::size_t n = 0; n < indices.size(); ++n) {
    dense[indices[n]] = values[n];
  }
  return dense;
}

SparseSelection topk_select(std::span<const double> segment, double ratio_percent) {
  if (segment.empty()) {
    throw ShapeError("topk_select: empty segment");
  }
  if (!(ratio_percent > 0.0) || ratio_percent > 100.0) {
    throw ConfigError("topk_select: ratio must be in (0, 100], got " +
                      std::to_string(ratio_percent));
  }
  const std::size_t len = segment.size();
  const std::size_t m = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(ratio_percent / 100.0 * len)));

  std::vector<std::uint32_t> order(len);
  std::iota(order.begin(), order.end(), 0u);
  // magnitude descending, index ascending on ties
  std::nth_element(order.begin(), order.begin() + (m - 1), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ma = std::abs(segment[a]);
                     const double mb = std::abs(segment[b]);
                     if (ma != mb) return ma > mb;
                     return a < b;
                   });
  order.resize(m);
  std::sort(order.begin(), order.end());

  SparseSelection sel;
  sel.source_length = len;
  sel.indices = std::move(order);
  sel.values.reserve(m);
  sel.threshold = std::numeric_limits<double>::infinity();
  for (std::uint32_t idx : sel.indices) {
    sel.values.push_back(segment[idx]);
    sel.threshold = std::min(sel.threshold, std::abs(segment[idx]));
  }
  return sel;
}

SparseSelection extract_innovation(const SparseSelection& selection,
                                   double inner_ratio_percent) {
  if (selection.count() == 0) {
    throw ShapeError("extract_innovation: empty selection");
  }
  if (!(inner_ratio_percent > 0.0) || inner_ratio_percent > 100.0) {
    throw ConfigError("extract_innovation: inner ratio must be in (0, 100]");
  }
  SparseSelection inner = topk_select(selection.values, inner_ratio_percent);
  SparseSelection out;
  out.source_length = selection.source_length;
  out.threshold = inner.threshold;
  out.indices.reserve(inner.count());
  out.values.reserve(inner.count());
  for (std::size_t n = 0; n < inner.count(); ++n) {
    out.indices.push_back(selection.indices[inner.indices[n]]);
    out.values.push_back(inner.values[n]);
  }
  return out;
}

ResidualState ResidualState::zeros(std::size_t n, ResidualMode mode, double momentum) {
  ResidualState s;
  s.accumulated.assign(n, 0.0);
  if (mode == ResidualMode::kMomentum) {
    s.momentum_buffer.assign(n, 0.0);
  }
  s.mode = mode;
  s.momentum = momentum;
  return s;
}

ErrorFeedbackResult error_feedback_step(ResidualState& residual,
                                        const GradientVector& fresh_grad,
                                        double ratio_percent) {
  const std::size_t n = fresh_grad.values.size();
  if (residual.accumulated.size() != n) {
    throw ShapeError("error_feedback_step: residual/gradient length mismatch");
  }
  if (residual.mode == ResidualMode::kMomentum) {
    for (std::size_t i = 0; i < n; ++i) {
      residual.momentum_buffer[i] =
          residual.momentum * residual.momentum_buffer[i] + fresh_grad.values[i];
      residual.accumulated[i] += residual.momentum_buffer[i];
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      residual.accumulated[i] += fresh_grad.values[i];
    }
  }

  ErrorFeedbackResult result;
  result.per_layer.reserve(fresh_grad.layer_offsets.size());
  for (const auto& seg : fresh_grad.layer_offsets) {
    std::span<double> acc(residual.accumulated.data() + seg.start, seg.length);
    SparseSelection sel = topk_select({acc.data(), acc.size()}, ratio_percent);
    for (std::uint32_t idx : sel.indices) {
      acc[idx] = 0.0;
      if (residual.mode == ResidualMode::kMomentum) {
        residual.momentum_buffer[seg.start + idx] = 0.0;
      }
    }
    result.per_layer.push_back(std::move(sel));
  }
  return result;
}

void ScheduleParams::validate() const {
  std::vector<std::string> bad;
  if (!(final_ratio_percent > 0.0) || final_ratio_percent > 100.0) {
    bad.push_back("schedule.final_ratio must be in (0, 100]");
  }
  if (kind == ScheduleKind::kExponentialRampup) {
    if (!(start_ratio_percent > 0.0) || start_ratio_percent > 100.0) {
      bad.push_back("schedule.start_ratio must be in (0, 100]");
    }
    if (ramp_iters == 0) {
      bad.push_back("schedule.ramp_iters must be positive for exponential rampup");
    }
    if (start_ratio_percent < final_ratio_percent) {
      bad.push_back("schedule.start_ratio must be >= final_ratio");
    }
  }
  if (!bad.empty()) throw ConfigError(bad);
}

std::optional<double> sparsity_schedule(std::uint64_t iteration, const ScheduleParams& params) {
  params.validate();
  switch (params.kind) {
    case ScheduleKind::kFixed:
      return params.final_ratio_percent;
    case ScheduleKind::kExponentialRampup: {
      if (iteration >= params.ramp_iters) return params.final_ratio_percent;
      const double t = static_cast<double>(iteration) / static_cast<double>(params.ramp_iters);
      return params.start_ratio_percent *
             std::pow(params.final_ratio_percent / params.start_ratio_percent, t);
    }
    case ScheduleKind::kWarmupThenFixed:
      if (iteration < params.warmup_iters) return std::nullopt;
      return params.final_ratio_percent;
  }
  throw ConfigError("sparsity_schedule: unknown strategy");
}

}  // namespace lgc
