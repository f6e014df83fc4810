// SPDX-License-Identifier: Apache-2.0
//
// Non-autoregressive acoustic model: encoder, variance adapter
// (duration/pitch/energy), length regulator and decoder, mapping an n x d
// feature sequence to a T x n_mels spectrogram. The front-end is swappable:
// the visual feature extractor, or a character-lookup embedding baseline
// with a shared "unknown" row for out-of-vocabulary characters.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vtts/common.hpp"
#include "vtts/features.hpp"
#include "vtts/nn.hpp"
#include "vtts/slicer.hpp"
#include "vtts/textimg.hpp"

namespace vtts::acoustic {

struct AcousticConfig {
  int model_dim = 256;  // equals the extractor output dim
  int encoder_blocks = 2;
  int decoder_blocks = 2;
  int attention_heads = 2;
  int ff_conv_kernel = 9;
  int ff_hidden = 256;
  int predictor_hidden = 256;
  int predictor_kernel = 3;
  int n_mels = 80;
  int pitch_bins = 256;
  int energy_bins = 256;
  double pitch_min = 2.0;
  double pitch_max = 8.0;
  double energy_min = 0.0;
  double energy_max = 4.0;
  double dropout = 0.1;
  int max_frames = 4000;

  void validate() const;
};

constexpr double kLayerNormEps = 1e-5;
constexpr int kSampleRate = 22050;
constexpr int kHopLength = 256;

struct VarianceTargets {
  std::vector<int> durations;   // frames per character, sum == T
  std::vector<double> pitch;    // per character, log-F0 domain
  std::vector<double> energy;   // per character

  void validate(int char_count) const;
};

struct VariancePrediction {
  std::vector<double> log_duration;  // log(duration+1) domain
  std::vector<double> pitch;
  std::vector<double> energy;
  std::vector<int> durations_used;   // what drove the length regulator
};

struct MelSpectrogram {
  Mat frames;  // T x n_mels
  int sample_rate = kSampleRate;
  int hop = kHopLength;
};

/// Character -> id map for the baseline front-end. Id 0 is the reserved
/// unknown id; every character absent from the map lands there.
struct CharVocab {
  static constexpr int kUnknownId = 0;
  std::map<uint32_t, int> to_id;  // ids 1..size, insertion by sorted codepoint

  int id_of(uint32_t cp) const;
  int table_rows() const { return static_cast<int>(to_id.size()) + 1; }
  static CharVocab build(const std::vector<std::string>& texts);
};

enum class FrontEnd { Visual, Baseline };

/// Everything needed to run either front-end plus the acoustic stack.
struct Model {
  FrontEnd front_end = FrontEnd::Visual;
  textimg::RenderSpec render_spec;
  slicer::SliceSpec slice_spec;
  features::ExtractorConfig fe_cfg;
  AcousticConfig ac_cfg;
  CharVocab vocab;  // baseline front-end only
  nn::ParamStore params;
  nn::StatStore stats;
};

/// Registers and initializes all parameter groups. The downstream
/// (encoder/variance adapter/decoder) layout is identical for both
/// front-ends; only the front-end group differs.
Model make_model(FrontEnd front_end, const textimg::RenderSpec& render_spec,
                 const slicer::SliceSpec& slice_spec, const features::ExtractorConfig& fe_cfg,
                 const AcousticConfig& ac_cfg, const CharVocab& vocab, uint64_t seed);

/// floor(v-lo scaled to bins); values exactly on a bin edge go to the
/// higher bin; clamped to [0, bins-1].
int quantize_to_bin(double v, double lo, double hi, int bins);

/// Inference duration rounding: round-half-up of expm1(log_dur), clamped at
/// 0; if everything rounds to 0 the argmax character gets one frame.
std::vector<int> round_durations(const std::vector<double>& log_duration);

/// Row i repeated durations[i] times, in order. Throws InputError when all
/// durations are zero.
Mat length_regulate(const Mat& hidden, const std::vector<int>& durations);

struct ForwardInput {
  const slicer::SlicedSequence* slices = nullptr;  // visual front-end
  const std::vector<uint32_t>* text = nullptr;     // baseline front-end
};

struct ForwardNodes {
  int features = -1;   // n x d
  int encoded = -1;    // n x d
  int regulated = -1;  // T x d
  int mel = -1;        // T x n_mels
  int log_duration = -1;  // n x 1
  int pitch = -1;         // n x 1
  int energy = -1;        // n x 1
  std::vector<int> durations_used;
  std::vector<nn::BatchNormStats> bn_stats;  // extractor, train mode
};

/// Builds the full graph on an existing tape. Teacher forcing when targets
/// are present: ground-truth durations drive the length regulator and
/// ground-truth pitch/energy drive the bin embeddings.
ForwardNodes forward_on_tape(nn::Tape& tape, const Model& model, const ForwardInput& input,
                             const VarianceTargets* targets, nn::Mode mode, Rng& dropout_rng);

struct ForwardResult {
  Mat mel;
  VariancePrediction variance;
};

/// Convenience eval-mode forward (deterministic).
ForwardResult forward(const Model& model, const ForwardInput& input,
                      const VarianceTargets* targets = nullptr);

// ---- spec-level operations on explicit matrices (eval mode) ----

/// n x d -> n x d through position encoding and the encoder blocks.
Mat encode(const Mat& features, const Model& model);

/// Variance adapter on an encoded sequence.
std::pair<Mat, VariancePrediction> variance_adapt(const Mat& hidden, const Model& model,
                                                  const VarianceTargets* targets);

/// T x d -> T x n_mels through the decoder blocks.
MelSpectrogram decode(const Mat& regulated, const Model& model);

/// Lookup-table embedding; OOV characters share the unknown row.
Mat baseline_embed(const std::vector<uint32_t>& text, const CharVocab& vocab,
                   const nn::ParamStore& params);

}  // namespace vtts::acoustic
