#pragma once

#include <string>

#include "lgc/trainer.hpp"

namespace lgc {

/// Full experiment description: the training run plus output paths and
/// analysis toggles. Parsed from a dotted key = value text file; unknown
/// keys are rejected and every violation is reported, not just the first.
struct ExperimentConfig {
  TrainConfig train;
  std::string out_dir = "out";
  int infoplane_bits = 8;
  int infoplane_node_a = 0;
  int infoplane_node_b = 1;

  bool operator==(const ExperimentConfig& other) const;
};

/// Parse and fully validate; throws ConfigError carrying every violation.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

/// Resolved config (defaults filled in); re-parsing the output yields an
/// equal config.
std::string render_config(const ExperimentConfig& config);

/// Write atomically: temp file in the same directory, then rename.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace lgc
