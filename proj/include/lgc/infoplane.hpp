#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "lgc/errors.hpp"

namespace lgc {

/// Uniformly quantized stream: 0 <= symbol < 2^bits over [lo, hi].
struct QuantizedStream {
  std::vector<std::uint32_t> symbols;
  int bits = 8;
  double lo = 0.0;
  double hi = 0.0;
};

/// Linear binning over the data's own [min, max]; a constant input maps to
/// symbol 0. bin = min(floor((x - lo)/width * 2^bits), 2^bits - 1).
QuantizedStream quantize_uniform(std::span<const double> values, int bits);

/// Same with an explicit range (used for shared binning across streams).
QuantizedStream quantize_uniform(std::span<const double> values, int bits, double lo,
                                 double hi);

/// Plug-in empirical entropy in bits; 0 log 0 == 0.
double entropy(const QuantizedStream& stream);

/// H(y|x) via the joint histogram.
double conditional_entropy(const QuantizedStream& y, const QuantizedStream& x);

/// I(x;y) = H(x) + H(y) - H(x,y), clamped into [0, min(H(x), H(y))] so the
/// information inequalities hold exactly in floating point.
double mutual_information(const QuantizedStream& x, const QuantizedStream& y);

/// Aligned per-iteration gradient vectors of one layer on two nodes.
struct LayerPairSeries {
  int layer_id = 0;
  std::vector<std::vector<double>> node_a;  // [iteration][n_l]
  std::vector<std::vector<double>> node_b;
};

struct InfoSummary {
  struct Row {
    int layer = 0;
    std::uint32_t iteration = 0;
    double h_marginal = 0.0;     // H(g_{l,2})
    double h_conditional = 0.0;  // H(g_{l,2} | g_{l,1})
    double mi = 0.0;
    double mi_over_h = 0.0;
  };
  struct LayerMean {
    int layer = 0;
    double h_marginal = 0.0;
    double mi = 0.0;
    double mi_over_h = 0.0;
  };
  std::vector<Row> rows;
  std::vector<LayerMean> per_layer;
};

/// Per-iteration and per-layer-mean entropy/MI between the two nodes'
/// gradient streams. Binning range per pair is the union of both streams.
InfoSummary layer_summary(const std::vector<LayerPairSeries>& series, int bits);

/// CSV columns layer,iteration,H_marginal_bits,H_conditional_bits,MI_bits,MI_over_H.
void write_infoplane_csv(std::ostream& out, const InfoSummary& summary);

}  // namespace lgc
