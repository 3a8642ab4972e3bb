#pragma once

#include <cstdint>
#include <vector>

#include "lgc/rng.hpp"

namespace lgc {

/// Synthetic 8x8 pattern-classification task: four texture families
/// (horizontal stripes, vertical stripes, checkerboard, center blob) under
/// Gaussian noise and circular shifts. Inputs are flattened row-major to
/// one channel of length 64.
struct Dataset {
  int classes = 4;
  int input_length = 64;
  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
};

Dataset make_pattern_dataset(std::size_t samples, std::uint64_t seed, double noise = 0.3);

/// Round-robin shard: sample i goes to node i % K. Shards are disjoint and
/// cover the dataset.
std::vector<std::size_t> shard_indices(std::size_t dataset_size, int node, int num_nodes);

}  // namespace lgc
