// SPDX-License-Identifier: Apache-2.0
#include "vtts/features.hpp"

#include <cmath>

namespace vtts::features {

void ExtractorConfig::validate() const {
  if (num_blocks <= 0) throw ConfigError("extractor: num_blocks must be positive");
  if (channels <= 0) throw ConfigError("extractor: channels must be positive");
  if (output_dim <= 0) throw ConfigError("extractor: output_dim must be positive");
  if (kernel <= 0 || kernel % 2 == 0)
    throw ConfigError("extractor: kernel must be a positive odd size");
  if (padding != (kernel - 1) / 2)
    throw ConfigError("extractor: padding must equal (kernel-1)/2 (same-size maps)");
  if (stride != 1) throw ConfigError("extractor: stride must be 1");
  if (input_height <= 0 || input_width <= 0)
    throw ConfigError("extractor: input dimensions must be positive");
  flattened_size();
}

int ExtractorConfig::flattened_size() const {
  int h = input_height;
  int w = input_width;
  for (int b = 0; b < num_blocks; ++b) {
    // conv is same-size; pooling halves with floor semantics
    if (pool) {
      h /= 2;
      w /= 2;
    }
    if (h < 1 || w < 1)
      throw ConfigError("extractor: pooling collapses the " + std::to_string(input_height) +
                        "x" + std::to_string(input_width) + " map to zero size at block " +
                        std::to_string(b + 1));
  }
  return channels * h * w;
}

void register_params(nn::ParamStore& params, nn::StatStore& stats,
                     const ExtractorConfig& cfg, const std::string& prefix) {
  cfg.validate();
  for (int b = 0; b < cfg.num_blocks; ++b) {
    int cin = (b == 0) ? 1 : cfg.channels;
    std::string base = prefix + "conv" + std::to_string(b);
    params.add(base + ".w", {cfg.channels, cin * cfg.kernel * cfg.kernel});
    params.add(base + ".b", {cfg.channels});
    std::string bn = prefix + "bn" + std::to_string(b);
    params.add(bn + ".gamma", {cfg.channels});
    params.add(bn + ".beta", {cfg.channels});
    stats.add(bn + ".rmean", {cfg.channels});
    stats.add(bn + ".rvar", {cfg.channels});
  }
  params.add(prefix + "fc.w", {cfg.output_dim, cfg.flattened_size()});
  params.add(prefix + "fc.b", {cfg.output_dim});
}

namespace {

void fill_uniform(double* p, size_t n, double bound, Rng& rng) {
  for (size_t i = 0; i < n; ++i) p[i] = rng.uniform(-bound, bound);
}

}  // namespace

void init_params(nn::ParamStore& params, nn::StatStore& stats, const ExtractorConfig& cfg,
                 Rng& rng, const std::string& prefix) {
  for (int b = 0; b < cfg.num_blocks; ++b) {
    int cin = (b == 0) ? 1 : cfg.channels;
    double bound = 1.0 / std::sqrt(static_cast<double>(cin) * cfg.kernel * cfg.kernel);
    std::string base = prefix + "conv" + std::to_string(b);
    auto& we = params.entry(base + ".w");
    fill_uniform(params.data(base + ".w"), we.size, bound, rng);
    // zero biases: a random bias can dominate the sparse glyph activations
    // and leave a ReLU block dead before any training has run
    auto& be = params.entry(base + ".b");
    std::fill(params.data(base + ".b"), params.data(base + ".b") + be.size, 0.0);
    std::string bn = prefix + "bn" + std::to_string(b);
    for (size_t i = 0; i < params.entry(bn + ".gamma").size; ++i) {
      params.data(bn + ".gamma")[i] = 1.0;
      params.data(bn + ".beta")[i] = 0.0;
      stats.data(bn + ".rmean")[i] = 0.0;
      stats.data(bn + ".rvar")[i] = 1.0;
    }
  }
  double fc_bound = 1.0 / std::sqrt(static_cast<double>(cfg.flattened_size()));
  fill_uniform(params.data(prefix + "fc.w"), params.entry(prefix + "fc.w").size, fc_bound, rng);
  std::fill(params.data(prefix + "fc.b"),
            params.data(prefix + "fc.b") + params.entry(prefix + "fc.b").size, 0.0);
}

namespace {

int slices_to_node(nn::Tape& tape, const slicer::SlicedSequence& slices,
                   const ExtractorConfig& cfg) {
  const int n = slices.char_count;
  const int h = cfg.input_height;
  const int w = cfg.input_width;
  std::vector<double> data(static_cast<size_t>(n) * h * w);
  for (int i = 0; i < n; ++i) {
    const Mat& s = slices.slices[i];
    if (s.rows != h || s.cols != w)
      throw InputError("extract: slice " + std::to_string(i) + " has shape " +
                       std::to_string(s.rows) + "x" + std::to_string(s.cols) +
                       ", expected " + std::to_string(h) + "x" + std::to_string(w));
    std::copy(s.a.begin(), s.a.end(), data.begin() + static_cast<size_t>(i) * h * w);
  }
  return tape.input({n, 1, h, w}, std::move(data));
}

}  // namespace

ExtractOut extract_on_tape(nn::Tape& tape, const slicer::SlicedSequence& slices,
                           const nn::StatStore& stats, const ExtractorConfig& cfg,
                           nn::Mode mode, const std::string& prefix) {
  cfg.validate();
  if (slices.char_count == 0) throw InputError("extract: empty slice sequence");
  ExtractOut out;
  int x = slices_to_node(tape, slices, cfg);
  if (mode == nn::Mode::Train) out.bn_stats.resize(cfg.num_blocks);
  for (int b = 0; b < cfg.num_blocks; ++b) {
    std::string base = prefix + "conv" + std::to_string(b);
    std::string bn = prefix + "bn" + std::to_string(b);
    x = tape.conv2d(x, tape.param(base + ".w"), tape.param(base + ".b"), cfg.kernel,
                    cfg.padding);
    nn::BatchNormStats* sink = nullptr;
    if (mode == nn::Mode::Train) {
      out.bn_stats[b].stat_prefix = bn;
      sink = &out.bn_stats[b];
    }
    x = tape.batch_norm2d(x, tape.param(bn + ".gamma"), tape.param(bn + ".beta"),
                          stats.data(bn + ".rmean"), stats.data(bn + ".rvar"), mode,
                          kBatchNormEps, sink);
    x = tape.relu(x);
    if (cfg.pool) x = tape.max_pool2(x);
  }
  x = tape.reshape(x, {slices.char_count, cfg.flattened_size()});
  out.node = tape.linear(x, tape.param(prefix + "fc.w"), tape.param(prefix + "fc.b"));
  return out;
}

VisualFeatureSequence extract(const slicer::SlicedSequence& slices,
                              const nn::ParamStore& params, const nn::StatStore& stats,
                              const ExtractorConfig& cfg, nn::Mode mode) {
  nn::Tape tape(&params, nullptr);
  ExtractOut out = extract_on_tape(tape, slices, stats, cfg, mode);
  VisualFeatureSequence seq;
  seq.features = tape.mat(out.node);
  seq.context_chars = slices.spec.context_chars;
  seq.char_width = slices.char_width;
  seq.char_height = slices.char_height;
  return seq;
}

std::vector<double> extract_grad(const slicer::SlicedSequence& slices,
                                 const nn::ParamStore& params, const nn::StatStore& stats,
                                 const ExtractorConfig& cfg, const Mat& upstream,
                                 nn::Mode mode) {
  std::vector<double> grad(params.total_size(), 0.0);
  nn::Tape tape(&params, grad.data());
  ExtractOut out = extract_on_tape(tape, slices, stats, cfg, mode);
  if (upstream.rows != slices.char_count || upstream.cols != cfg.output_dim)
    throw InputError("extract_grad: upstream gradient has shape " +
                     std::to_string(upstream.rows) + "x" + std::to_string(upstream.cols) +
                     ", expected " + std::to_string(slices.char_count) + "x" +
                     std::to_string(cfg.output_dim));
  tape.backward(out.node, upstream.a);
  return grad;
}

void update_running_stats(nn::StatStore& stats,
                          const std::vector<nn::BatchNormStats>& batch_stats) {
  for (const auto& bs : batch_stats) {
    if (bs.stat_prefix.empty()) continue;
    double* rmean = stats.data(bs.stat_prefix + ".rmean");
    double* rvar = stats.data(bs.stat_prefix + ".rvar");
    for (size_t i = 0; i < bs.mean.size(); ++i) {
      rmean[i] = (1.0 - kBatchNormMomentum) * rmean[i] + kBatchNormMomentum * bs.mean[i];
      rvar[i] = (1.0 - kBatchNormMomentum) * rvar[i] + kBatchNormMomentum * bs.var_unbiased[i];
    }
  }
}

}  // namespace vtts::features
