// SPDX-License-Identifier: Apache-2.0
//
// Loss computation, optimization loop, checkpointing and reproducible runs.
// A training step computes per-sample gradients (optionally on worker
// threads with a fixed sample-to-thread assignment so the floating-point
// reduction order is independent of scheduling), clips by global norm and
// applies the optimizer.
#pragma once

#include <string>
#include <vector>

#include "vtts/acoustic.hpp"
#include "vtts/data.hpp"

namespace vtts::train {

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
  uint64_t seed = 0;
  double learning_rate = 1e-3;
  int batch_size = 8;
  int max_steps = 1000;
  double grad_clip_norm = 1.0;
  double w_mel = 1.0;
  double w_duration = 1.0;
  double w_pitch = 1.0;
  double w_energy = 1.0;
  acoustic::FrontEnd front_end = acoustic::FrontEnd::Visual;
  int context_c = 3;
  Optimizer optimizer = Optimizer::Adam;
  int checkpoint_interval = 0;  // 0: write only the final checkpoint
  int threads = 0;              // 0: hardware concurrency, capped at batch size
  std::string init_checkpoint;  // resume or fine-tune when non-empty

  void validate() const;
};

struct LossReport {
  double mel_l1 = 0.0;
  double duration_mse = 0.0;  // log(duration+1) domain
  double pitch_mse = 0.0;
  double energy_mse = 0.0;
  double total = 0.0;
};

/// A record preprocessed for training: rendered + sliced input for the
/// visual front-end (or codepoints for the baseline), supervision targets
/// and the target mel.
struct Sample {
  std::string utterance_id;
  slicer::SlicedSequence slices;
  std::vector<uint32_t> text;
  acoustic::VarianceTargets targets;
  Mat mel;
};

Sample prepare_sample(const data::UtteranceRecord& record, const acoustic::Model& model);

/// Pure loss: mel L1 plus MSE on log(duration+1), pitch and energy.
LossReport compute_loss(const Mat& mel_pred, const Mat& mel_target,
                        const acoustic::VariancePrediction& pred,
                        const acoustic::VarianceTargets& targets, double w_mel,
                        double w_duration, double w_pitch, double w_energy);

struct SampleLoss {
  int total_node = -1;
  LossReport report;
  std::vector<nn::BatchNormStats> bn_stats;
};

/// Builds forward + loss for one sample on a tape (teacher forcing).
SampleLoss sample_loss_on_tape(nn::Tape& tape, const acoustic::Model& model,
                               const Sample& sample, const TrainConfig& cfg, nn::Mode mode,
                               Rng& dropout_rng);

struct TrainState {
  acoustic::Model model;
  TrainConfig cfg;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  long long step = 0;
};

TrainState init_training(const TrainConfig& cfg, const textimg::RenderSpec& render_spec,
                         const features::ExtractorConfig& fe_cfg,
                         const acoustic::AcousticConfig& ac_cfg,
                         const acoustic::CharVocab& vocab);

/// One gradient step over the batch. Deterministic given (state, batch,
/// configured thread count). Throws on a non-finite loss.
LossReport train_step(TrainState& state, const std::vector<const Sample*>& batch);

// ---- checkpoint container ----

void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);
/// Inference-only convenience (drops optimizer state).
acoustic::Model load_model(const std::string& path);

struct FitResult {
  std::string final_checkpoint;
  std::string loss_log;
  LossReport final_loss;
  long long steps_run = 0;
};

/// Runs max_steps of training over the manifest, writing
/// out_dir/loss_log.tsv (one line per step: step then the five LossReport
/// fields, tab-separated), periodic checkpoints when configured, and
/// out_dir/ckpt_final.vtts.
FitResult fit(const TrainConfig& cfg, const textimg::RenderSpec& render_spec,
              const features::ExtractorConfig& fe_cfg, const acoustic::AcousticConfig& ac_cfg,
              const std::string& manifest_path, const std::string& out_dir);

}  // namespace vtts::train
