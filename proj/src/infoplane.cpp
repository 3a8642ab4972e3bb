#include "lgc/infoplane.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace lgc {

namespace {

double entropy_of_counts(const std::map<std::uint64_t, std::uint64_t>& counts,
                         std::uint64_t total) {
  double h = 0.0;
  const double inv = 1.0 / static_cast<double>(total);
  for (const auto& [sym, c] : counts) {
    const double p = static_cast<double>(c) * inv;
    h -= p * std::log2(p);
  }
  return h;
}

std::map<std::uint64_t, std::uint64_t> marginal_counts(const QuantizedStream& s) {
  std::map<std::uint64_t, std::uint64_t> counts;
  for (auto sym : s.symbols) ++counts[sym];
  return counts;
}

}  // namespace

QuantizedStream quantize_uniform(std::span<const double> values, int bits, double lo,
                                 double hi) {
  if (values.empty()) {
    throw ShapeError("quantize_uniform: empty input");
  }
  if (bits < 1 || bits > 32) {
    throw ConfigError("quantize_uniform: bits must be in [1, 32]");
  }
  QuantizedStream out;
  out.bits = bits;
  out.lo = lo;
  out.hi = hi;
  out.symbols.resize(values.size());
  const double width = hi - lo;
  const double levels = std::pow(2.0, bits);
  const std::uint32_t top = static_cast<std::uint32_t>(levels - 1.0);
  if (width <= 0.0) {
    return out;  // constant input: all symbol 0
  }
  for (std::size_t n = 0; n < values.size(); ++n) {
    const double b = std::floor((values[n] - lo) / width * levels);
    out.symbols[n] = static_cast<std::uint32_t>(std::clamp(b, 0.0, static_cast<double>(top)));
  }
  return out;
}

QuantizedStream quantize_uniform(std::span<const double> values, int bits) {
  if (values.empty()) {
    throw ShapeError("quantize_uniform: empty input");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return quantize_uniform(values, bits, *lo, *hi);
}

double entropy(const QuantizedStream& stream) {
  if (stream.symbols.empty()) {
    throw ShapeError("entropy: empty stream");
  }
  return entropy_of_counts(marginal_counts(stream), stream.symbols.size());
}

double conditional_entropy(const QuantizedStream& y, const QuantizedStream& x) {
  if (y.symbols.size() != x.symbols.size()) {
    throw ShapeError("conditional_entropy: stream length mismatch");
  }
  std::map<std::uint64_t, std::uint64_t> joint;
  for (std::size_t n = 0; n < x.symbols.size(); ++n) {
    joint[(static_cast<std::uint64_t>(x.symbols[n]) << 32) | y.symbols[n]] += 1;
  }
  const double h_joint = entropy_of_counts(joint, x.symbols.size());
  return h_joint - entropy(x);
}

double mutual_information(const QuantizedStream& x, const QuantizedStream& y) {
  if (x.symbols.size() != y.symbols.size()) {
    throw ShapeError("mutual_information: stream length mismatch");
  }
  std::map<std::uint64_t, std::uint64_t> joint;
  for (std::size_t n = 0; n < x.symbols.size(); ++n) {
    joint[(static_cast<std::uint64_t>(x.symbols[n]) << 32) | y.symbols[n]] += 1;
  }
  const std::uint64_t total = x.symbols.size();
  const double hx = entropy(x);
  const double hy = entropy(y);
  const double hxy = entropy_of_counts(joint, total);
  const double mi = hx + hy - hxy;
  return std::clamp(mi, 0.0, std::min(hx, hy));
}

InfoSummary layer_summary(const std::vector<LayerPairSeries>& series, int bits) {
  InfoSummary summary;
  for (const auto& layer : series) {
    if (layer.node_a.size() != layer.node_b.size()) {
      throw ShapeError("layer_summary: iteration counts differ between nodes");
    }
    double sum_h = 0.0, sum_mi = 0.0;
    for (std::size_t it = 0; it < layer.node_a.size(); ++it) {
      const auto& a = layer.node_a[it];
      const auto& b = layer.node_b[it];
      if (a.size() != b.size()) {
        throw ShapeError("layer_summary: gradient lengths differ between nodes");
      }
      // shared binning over the union range keeps the joint histogram coherent
      double lo = a[0], hi = a[0];
      for (double v : a) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      for (double v : b) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const QuantizedStream qa = quantize_uniform(a, bits, lo, hi);
      const QuantizedStream qb = quantize_uniform(b, bits, lo, hi);
      InfoSummary::Row row;
      row.layer = layer.layer_id;
      row.iteration = static_cast<std::uint32_t>(it);
      row.h_marginal = entropy(qb);
      row.h_conditional = conditional_entropy(qb, qa);
      row.mi = mutual_information(qa, qb);
      row.mi_over_h = row.h_marginal > 0.0 ? row.mi / row.h_marginal : 0.0;
      sum_h += row.h_marginal;
      sum_mi += row.mi;
      summary.rows.push_back(row);
    }
    const double n = static_cast<double>(layer.node_a.size());
    InfoSummary::LayerMean mean;
    mean.layer = layer.layer_id;
    mean.h_marginal = n > 0 ? sum_h / n : 0.0;
    mean.mi = n > 0 ? sum_mi / n : 0.0;
    mean.mi_over_h = mean.h_marginal > 0.0 ? mean.mi / mean.h_marginal : 0.0;
    summary.per_layer.push_back(mean);
  }
  return summary;
}

void write_infoplane_csv(std::ostream& out, const InfoSummary& summary) {
  out << "layer,iteration,H_marginal_bits,H_conditional_bits,MI_bits,MI_over_H\n";
  char line[160];
  for (const auto& r : summary.rows) {
    std::snprintf(line, sizeof(line), "%d,%u,%.10g,%.10g,%.10g,%.10g\n", r.layer, r.iteration,
                  r.h_marginal, r.h_conditional, r.mi, r.mi_over_h);
    out << line;
  }
}

}  // namespace lgc
