#include "lgc/dataset.hpp"

#include <cmath>

namespace lgc {

namespace {

double prototype_value(int cls, int row, int col) {
  switch (cls) {
    case 0: return row % 2 == 0 ? 1.0 : -1.0;                    // horizontal stripes
    case 1: return col % 2 == 0 ? 1.0 : -1.0;                    // vertical stripes
    case 2: return (row + col) % 2 == 0 ? 1.0 : -1.0;            // checkerboard
    default: {                                                   // center blob
      const double dr = row - 3.5;
      const double dc = col - 3.5;
      return std::sqrt(dr * dr + dc * dc) < 2.5 ? 1.0 : -1.0;
    }
  }
}

}  // namespace

Dataset make_pattern_dataset(std::size_t samples, std::uint64_t seed, double noise) {
  Dataset ds;
  ds.inputs.reserve(samples);
  ds.labels.reserve(samples);
  Rng rng(seed);
  for (std::size_t s = 0; s < samples; ++s) {
    const int cls = static_cast<int>(s % ds.classes);
    const int shift_r = static_cast<int>(rng.index(2));
    const int shift_c = static_cast<int>(rng.index(2));
    std::vector<double> img(64);
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) {
        const double base = prototype_value(cls, (r + shift_r) % 8, (c + shift_c) % 8);
        img[r * 8 + c] = base + rng.normal(0.0, noise);
      }
    }
    ds.inputs.push_back(std::move(img));
    ds.labels.push_back(cls);
  }
  return ds;
}

std::vector<std::size_t> shard_indices(std::size_t dataset_size, int node, int num_nodes) {
  std::vector<std::size_t> idx;
  for (std::size_t s = static_cast<std::size_t>(node); s < dataset_size;
       s += static_cast<std::size_t>(num_nodes)) {
    idx.push_back(s);
  }
  return idx;
}

}  // namespace lgc
