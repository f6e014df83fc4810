// SPDX-License-Identifier: Apache-2.0
//
// Flat key=value experiment configuration covering the render, slice,
// extractor, acoustic and train settings. Unknown keys are errors.
#pragma once

#include <map>
#include <string>

#include "vtts/acoustic.hpp"
#include "vtts/train.hpp"

namespace vtts::config {

struct ExperimentConfig {
  textimg::RenderSpec render;
  slicer::SliceSpec slice;
  features::ExtractorConfig extractor;
  acoustic::AcousticConfig acoustic;
  train::TrainConfig train;

  /// Wires cross-struct fields: slice.c drives train.context_c and the
  /// extractor input dimensions follow the render/slice geometry.
  void finalize();
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string to_text(const ExperimentConfig& cfg);

/// Applies one key=value assignment; throws ConfigError on unknown keys or
/// unparsable values.
void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);

}  // namespace vtts::config
