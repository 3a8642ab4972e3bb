#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "lgc/infoplane.hpp"

namespace lgc {

/// Framed binary gradient dump. Header: magic "LGCD", version u8,
/// node_count u16 LE, layer_count u16 LE. Then one record per
/// (iteration, node, layer) in that nested order:
///   layer_id u32 LE | length u32 LE | values f32 LE [length]
struct GradientDump {
  std::uint16_t num_nodes = 0;
  std::uint16_t num_layers = 0;
  struct Record {
    std::uint32_t layer_id = 0;
    std::vector<float> values;
  };
  // records.size() == iterations * num_nodes * num_layers
  std::vector<Record> records;

  std::size_t iterations() const {
    const std::size_t per_iter =
        static_cast<std::size_t>(num_nodes) * static_cast<std::size_t>(num_layers);
    return per_iter == 0 ? 0 : records.size() / per_iter;
  }
  const Record& at(std::size_t iteration, std::uint16_t node, std::uint16_t layer) const {
    return records[(iteration * num_nodes + node) * num_layers + layer];
  }
};

void write_gradient_dump(std::ostream& out, const GradientDump& dump);
GradientDump read_gradient_dump(std::istream& in);

/// Pull one node pair out of a dump, shaped for layer_summary.
std::vector<LayerPairSeries> dump_pair_series(const GradientDump& dump, std::uint16_t node_a,
                                              std::uint16_t node_b);

}  // namespace lgc
