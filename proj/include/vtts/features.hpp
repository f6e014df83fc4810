// SPDX-License-Identifier: Apache-2.0
//
// Visual feature extractor: stacked conv -> batch-norm -> ReLU -> max-pool
// blocks over each sliced character window, then a linear layer on the
// flattened map. Produces one feature vector per character and replaces the
// character embedding lookup of a conventional acoustic model.
#pragma once

#include <string>
#include <vector>

#include "vtts/common.hpp"
#include "vtts/nn.hpp"
#include "vtts/slicer.hpp"

namespace vtts::features {

struct ExtractorConfig {
  int num_blocks = 2;
  int channels = 1;  // conv channels per block
  int kernel = 3;
  int padding = 1;
  int stride = 1;
  bool pool = true;  // 2x2 max-pool after each block
  int output_dim = 256;
  int input_height = 30;  // h
  int input_width = 90;   // w*c; one extractor instance is bound to one c

  void validate() const;        // throws ConfigError
  int flattened_size() const;   // post-pooling flat size; throws if a dim collapses
};

struct VisualFeatureSequence {
  Mat features;  // n x output_dim
  int context_chars = 0;
  int char_width = 0;
  int char_height = 0;
};

constexpr double kBatchNormEps = 1e-5;
constexpr double kBatchNormMomentum = 0.1;

/// Registers "fe.*" parameters and "fe.bn*" running statistics.
void register_params(nn::ParamStore& params, nn::StatStore& stats,
                     const ExtractorConfig& cfg, const std::string& prefix = "fe.");

/// Uniform fan-in init for conv/linear; batch-norm scale 1, shift 0,
/// running mean 0 / var 1. Deterministic given the Rng state.
void init_params(nn::ParamStore& params, nn::StatStore& stats, const ExtractorConfig& cfg,
                 Rng& rng, const std::string& prefix = "fe.");

struct ExtractOut {
  int node = -1;  // n x output_dim tape node
  std::vector<nn::BatchNormStats> bn_stats;  // train mode only
};

/// Builds the extractor graph on an existing tape. `stats` supplies running
/// statistics for eval mode; in train mode per-layer batch statistics are
/// reported through the result for the caller to fold into `stats`.
ExtractOut extract_on_tape(nn::Tape& tape, const slicer::SlicedSequence& slices,
                           const nn::StatStore& stats, const ExtractorConfig& cfg,
                           nn::Mode mode, const std::string& prefix = "fe.");

/// Convenience forward. Eval mode is deterministic per sample and
/// independent of batch composition.
VisualFeatureSequence extract(const slicer::SlicedSequence& slices,
                              const nn::ParamStore& params, const nn::StatStore& stats,
                              const ExtractorConfig& cfg, nn::Mode mode);

/// Backpropagates an upstream gradient (n x output_dim) through the
/// extractor; returns the flat parameter gradient aligned with the
/// ParamStore layout.
std::vector<double> extract_grad(const slicer::SlicedSequence& slices,
                                 const nn::ParamStore& params, const nn::StatStore& stats,
                                 const ExtractorConfig& cfg, const Mat& upstream,
                                 nn::Mode mode = nn::Mode::Train);

/// Applies momentum updates of reported batch statistics onto the running
/// statistics, in the order given.
void update_running_stats(nn::StatStore& stats,
                          const std::vector<nn::BatchNormStats>& batch_stats);

}  // namespace vtts::features
