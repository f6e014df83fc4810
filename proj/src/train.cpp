// SPDX-License-Identifier: Apache-2.0
#include "vtts/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "vtts/tensor_io.hpp"

namespace fs = std::filesystem;

namespace vtts::train {

namespace {
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
}  // namespace

void TrainConfig::validate() const {
  if (max_steps < 1) throw ConfigError("train: max_steps must be >= 1");
  if (learning_rate < 0.0) throw ConfigError("train: learning_rate must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (grad_clip_norm < 0.0) throw ConfigError("train: grad_clip_norm must be >= 0");
  if (context_c < 1 || context_c % 2 == 0)
    throw ConfigError("train: context c must be odd and positive");
  if (threads < 0) throw ConfigError("train: threads must be >= 0");
}

Sample prepare_sample(const data::UtteranceRecord& record, const acoustic::Model& model) {
  Sample s;
  s.utterance_id = record.utterance_id;
  s.text = utf8_decode(record.text);
  s.targets.durations = record.durations;
  s.targets.pitch = record.pitch;
  s.targets.energy = record.energy;
  s.mel = io::read_tensor_mat(record.mel_path);
  if (model.front_end == acoustic::FrontEnd::Visual) {
    textimg::RenderSpec spec = model.render_spec;
    spec.synthetic_variant = record.typeface_variant;
    auto image = textimg::render(s.text, spec, record.decorations);
    s.slices = slicer::slice(image, model.slice_spec);
  }
  return s;
}

LossReport compute_loss(const Mat& mel_pred, const Mat& mel_target,
                        const acoustic::VariancePrediction& pred,
                        const acoustic::VarianceTargets& targets, double w_mel,
                        double w_duration, double w_pitch, double w_energy) {
  if (!mel_pred.same_shape(mel_target))
    throw InputError("compute_loss: mel shapes differ: " + std::to_string(mel_pred.rows) +
                     "x" + std::to_string(mel_pred.cols) + " vs " +
                     std::to_string(mel_target.rows) + "x" + std::to_string(mel_target.cols));
  size_t n = targets.durations.size();
  if (pred.log_duration.size() != n || pred.pitch.size() != n || pred.energy.size() != n ||
      targets.pitch.size() != n || targets.energy.size() != n)
    throw InputError("compute_loss: variance shapes differ");
  LossReport r;
  for (size_t i = 0; i < mel_pred.a.size(); ++i)
    r.mel_l1 += std::abs(mel_pred.a[i] - mel_target.a[i]);
  if (!mel_pred.a.empty()) r.mel_l1 /= static_cast<double>(mel_pred.a.size());
  for (size_t i = 0; i < n; ++i) {
    double d = pred.log_duration[i] - std::log1p(static_cast<double>(targets.durations[i]));
    r.duration_mse += d * d;
    double p = pred.pitch[i] - targets.pitch[i];
    r.pitch_mse += p * p;
    double e = pred.energy[i] - targets.energy[i];
    r.energy_mse += e * e;
  }
  if (n) {
    r.duration_mse /= static_cast<double>(n);
    r.pitch_mse /= static_cast<double>(n);
    r.energy_mse /= static_cast<double>(n);
  }
  r.total = w_mel * r.mel_l1 + w_duration * r.duration_mse + w_pitch * r.pitch_mse +
            w_energy * r.energy_mse;
  return r;
}

SampleLoss sample_loss_on_tape(nn::Tape& tape, const acoustic::Model& model,
                               const Sample& sample, const TrainConfig& cfg, nn::Mode mode,
                               Rng& dropout_rng) {
  acoustic::ForwardInput input;
  if (model.front_end == acoustic::FrontEnd::Visual)
    input.slices = &sample.slices;
  else
    input.text = &sample.text;
  auto nodes =
      acoustic::forward_on_tape(tape, model, input, &sample.targets, mode, dropout_rng);

  const int n = static_cast<int>(sample.targets.durations.size());
  std::vector<double> log_dur_target(n), pitch_target(n), energy_target(n);
  for (int i = 0; i < n; ++i) {
    log_dur_target[i] = std::log1p(static_cast<double>(sample.targets.durations[i]));
    pitch_target[i] = sample.targets.pitch[i];
    energy_target[i] = sample.targets.energy[i];
  }
  int mel_target = tape.input(sample.mel);
  int dur_t = tape.input({n, 1}, log_dur_target);
  int pitch_t = tape.input({n, 1}, pitch_target);
  int energy_t = tape.input({n, 1}, energy_target);

  int mel_l1 = tape.l1_loss(nodes.mel, mel_target);
  int dur_mse = tape.mse_loss(nodes.log_duration, dur_t);
  int pitch_mse = tape.mse_loss(nodes.pitch, pitch_t);
  int energy_mse = tape.mse_loss(nodes.energy, energy_t);

  SampleLoss out;
  out.total_node = tape.weighted_sum({{cfg.w_mel, mel_l1},
                                      {cfg.w_duration, dur_mse},
                                      {cfg.w_pitch, pitch_mse},
                                      {cfg.w_energy, energy_mse}});
  out.report.mel_l1 = tape.scalar(mel_l1);
  out.report.duration_mse = tape.scalar(dur_mse);
  out.report.pitch_mse = tape.scalar(pitch_mse);
  out.report.energy_mse = tape.scalar(energy_mse);
  out.report.total = tape.scalar(out.total_node);
  out.bn_stats = std::move(nodes.bn_stats);
  return out;
}

TrainState init_training(const TrainConfig& cfg, const textimg::RenderSpec& render_spec,
                         const features::ExtractorConfig& fe_cfg,
                         const acoustic::AcousticConfig& ac_cfg,
                         const acoustic::CharVocab& vocab) {
  cfg.validate();
  TrainState st;
  st.cfg = cfg;
  st.model = acoustic::make_model(cfg.front_end, render_spec,
                                  slicer::SliceSpec{cfg.context_c}, fe_cfg, ac_cfg, vocab,
                                  cfg.seed);
  st.adam_m.assign(st.model.params.total_size(), 0.0);
  st.adam_v.assign(st.model.params.total_size(), 0.0);
  return st;
}

namespace {

struct WorkerResult {
  std::vector<double> grad;
  std::vector<LossReport> reports;                          // by local order
  std::vector<std::vector<nn::BatchNormStats>> bn_stats;    // by local order
};

uint64_t sample_dropout_seed(uint64_t seed, long long step, int sample_index) {
  return splitmix64(seed ^ (static_cast<uint64_t>(step) * 0x9E3779B97F4A7C15ULL) ^
                    (static_cast<uint64_t>(sample_index) << 20));
}

}  // namespace

LossReport train_step(TrainState& state, const std::vector<const Sample*>& batch) {
  if (batch.empty()) throw InputError("train_step: empty batch");
  const size_t P = state.model.params.total_size();
  const int B = static_cast<int>(batch.size());
  int threads = state.cfg.threads > 0 ? state.cfg.threads
                                      : static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  threads = std::min(threads, B);

  // thread k owns samples k, k+threads, ... and accumulates their gradients
  // in that order; the final reduction runs in thread order, so the result
  // does not depend on scheduling
  std::vector<WorkerResult> results(threads);
  auto work = [&](int k) {
    WorkerResult& res = results[k];
    res.grad.assign(P, 0.0);
    for (int i = k; i < B; i += threads) {
      nn::Tape tape(&state.model.params, res.grad.data());
      Rng rng(sample_dropout_seed(state.cfg.seed, state.step, i));
      SampleLoss sl = sample_loss_on_tape(tape, state.model, *batch[i], state.cfg,
                                          nn::Mode::Train, rng);
      // mean over the batch
      tape.backward(tape.scale(sl.total_node, 1.0 / B));
      res.reports.push_back(sl.report);
      res.bn_stats.push_back(std::move(sl.bn_stats));
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(work, k);
    for (auto& t : pool) t.join();
  }

  std::vector<double>& grad = results[0].grad;
  for (int k = 1; k < threads; ++k)
    for (size_t i = 0; i < P; ++i) grad[i] += results[k].grad[i];

  LossReport mean;
  int counted = 0;
  for (int i = 0; i < B; ++i) {
    const LossReport& r = results[i % threads].reports[i / threads];
    mean.mel_l1 += r.mel_l1;
    mean.duration_mse += r.duration_mse;
    mean.pitch_mse += r.pitch_mse;
    mean.energy_mse += r.energy_mse;
    mean.total += r.total;
    ++counted;
  }
  mean.mel_l1 /= counted;
  mean.duration_mse /= counted;
  mean.pitch_mse /= counted;
  mean.energy_mse /= counted;
  mean.total /= counted;
  if (!std::isfinite(mean.total))
    throw std::runtime_error("train_step: non-finite loss at step " +
                             std::to_string(state.step) + " (total=" +
                             std::to_string(mean.total) + ")");

  // batch-norm running statistics, folded in sample order
  for (int i = 0; i < B; ++i)
    features::update_running_stats(state.model.stats, results[i % threads].bn_stats[i / threads]);

  // global-norm clip
  if (state.cfg.grad_clip_norm > 0.0) {
    double norm = nn::l2_norm(grad);
    if (norm > state.cfg.grad_clip_norm) {
      double s = state.cfg.grad_clip_norm / norm;
      for (double& g : grad) g *= s;
    }
  }

  double* theta = state.model.params.flat().data();
  const double lr = state.cfg.learning_rate;
  if (state.cfg.optimizer == Optimizer::Sgd) {
    for (size_t i = 0; i < P; ++i) theta[i] -= lr * grad[i];
  } else {
    const double t = static_cast<double>(state.step + 1);
    const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
    const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
    for (size_t i = 0; i < P; ++i) {
      state.adam_m[i] = kAdamBeta1 * state.adam_m[i] + (1.0 - kAdamBeta1) * grad[i];
      state.adam_v[i] = kAdamBeta2 * state.adam_v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
      double mhat = state.adam_m[i] / bc1;
      double vhat = state.adam_v[i] / bc2;
      theta[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
    }
  }
  ++state.step;
  return mean;
}

// -------------------------------------------------------------- checkpoint

namespace {

void put_render(io::BlockFile& f, const textimg::RenderSpec& r) {
  f.put_scalar("cfg.render.w", r.char_width_px);
  f.put_scalar("cfg.render.h", r.char_height_px);
  f.put_scalar("cfg.render.fs", r.font_size_pt);
  f.put_scalar("cfg.render.font_kind", r.font_kind == textimg::FontKind::File ? 1.0 : 0.0);
  f.put_scalar("cfg.render.variant", r.synthetic_variant);
  f.put_scalar("cfg.render.typeface", r.typeface_id);
}

textimg::RenderSpec get_render(const io::BlockFile& f) {
  textimg::RenderSpec r;
  r.char_width_px = static_cast<int>(f.get_scalar("cfg.render.w"));
  r.char_height_px = static_cast<int>(f.get_scalar("cfg.render.h"));
  r.font_size_pt = static_cast<int>(f.get_scalar("cfg.render.fs"));
  r.font_kind = f.get_scalar("cfg.render.font_kind") != 0.0 ? textimg::FontKind::File
                                                            : textimg::FontKind::Synthetic;
  r.synthetic_variant = static_cast<int>(f.get_scalar("cfg.render.variant"));
  r.typeface_id = static_cast<int>(f.get_scalar("cfg.render.typeface"));
  return r;
}

void put_fe(io::BlockFile& f, const features::ExtractorConfig& c) {
  f.put_scalar("cfg.fe.blocks", c.num_blocks);
  f.put_scalar("cfg.fe.channels", c.channels);
  f.put_scalar("cfg.fe.kernel", c.kernel);
  f.put_scalar("cfg.fe.padding", c.padding);
  f.put_scalar("cfg.fe.stride", c.stride);
  f.put_scalar("cfg.fe.pool", c.pool ? 1.0 : 0.0);
  f.put_scalar("cfg.fe.dim", c.output_dim);
  f.put_scalar("cfg.fe.in_h", c.input_height);
  f.put_scalar("cfg.fe.in_w", c.input_width);
}

features::ExtractorConfig get_fe(const io::BlockFile& f) {
  features::ExtractorConfig c;
  c.num_blocks = static_cast<int>(f.get_scalar("cfg.fe.blocks"));
  c.channels = static_cast<int>(f.get_scalar("cfg.fe.channels"));
  c.kernel = static_cast<int>(f.get_scalar("cfg.fe.kernel"));
  c.padding = static_cast<int>(f.get_scalar("cfg.fe.padding"));
  c.stride = static_cast<int>(f.get_scalar("cfg.fe.stride"));
  c.pool = f.get_scalar("cfg.fe.pool") != 0.0;
  c.output_dim = static_cast<int>(f.get_scalar("cfg.fe.dim"));
  c.input_height = static_cast<int>(f.get_scalar("cfg.fe.in_h"));
  c.input_width = static_cast<int>(f.get_scalar("cfg.fe.in_w"));
  return c;
}

void put_ac(io::BlockFile& f, const acoustic::AcousticConfig& c) {
  f.put_scalar("cfg.ac.dim", c.model_dim);
  f.put_scalar("cfg.ac.enc", c.encoder_blocks);
  f.put_scalar("cfg.ac.dec", c.decoder_blocks);
  f.put_scalar("cfg.ac.heads", c.attention_heads);
  f.put_scalar("cfg.ac.ffk", c.ff_conv_kernel);
  f.put_scalar("cfg.ac.ffh", c.ff_hidden);
  f.put_scalar("cfg.ac.ph", c.predictor_hidden);
  f.put_scalar("cfg.ac.pk", c.predictor_kernel);
  f.put_scalar("cfg.ac.n_mels", c.n_mels);
  f.put_scalar("cfg.ac.pitch_bins", c.pitch_bins);
  f.put_scalar("cfg.ac.energy_bins", c.energy_bins);
  f.put_scalar("cfg.ac.pitch_min", c.pitch_min);
  f.put_scalar("cfg.ac.pitch_max", c.pitch_max);
  f.put_scalar("cfg.ac.energy_min", c.energy_min);
  f.put_scalar("cfg.ac.energy_max", c.energy_max);
  f.put_scalar("cfg.ac.dropout", c.dropout);
  f.put_scalar("cfg.ac.max_frames", c.max_frames);
}

acoustic::AcousticConfig get_ac(const io::BlockFile& f) {
  acoustic::AcousticConfig c;
  c.model_dim = static_cast<int>(f.get_scalar("cfg.ac.dim"));
  c.encoder_blocks = static_cast<int>(f.get_scalar("cfg.ac.enc"));
  c.decoder_blocks = static_cast<int>(f.get_scalar("cfg.ac.dec"));
  c.attention_heads = static_cast<int>(f.get_scalar("cfg.ac.heads"));
  c.ff_conv_kernel = static_cast<int>(f.get_scalar("cfg.ac.ffk"));
  c.ff_hidden = static_cast<int>(f.get_scalar("cfg.ac.ffh"));
  c.predictor_hidden = static_cast<int>(f.get_scalar("cfg.ac.ph"));
  c.predictor_kernel = static_cast<int>(f.get_scalar("cfg.ac.pk"));
  c.n_mels = static_cast<int>(f.get_scalar("cfg.ac.n_mels"));
  c.pitch_bins = static_cast<int>(f.get_scalar("cfg.ac.pitch_bins"));
  c.energy_bins = static_cast<int>(f.get_scalar("cfg.ac.energy_bins"));
  c.pitch_min = f.get_scalar("cfg.ac.pitch_min");
  c.pitch_max = f.get_scalar("cfg.ac.pitch_max");
  c.energy_min = f.get_scalar("cfg.ac.energy_min");
  c.energy_max = f.get_scalar("cfg.ac.energy_max");
  c.dropout = f.get_scalar("cfg.ac.dropout");
  c.max_frames = static_cast<int>(f.get_scalar("cfg.ac.max_frames"));
  return c;
}

void put_train(io::BlockFile& f, const TrainConfig& c) {
  f.put_scalar("cfg.train.seed", static_cast<double>(c.seed));
  f.put_scalar("cfg.train.lr", c.learning_rate);
  f.put_scalar("cfg.train.batch_size", c.batch_size);
  f.put_scalar("cfg.train.max_steps", c.max_steps);
  f.put_scalar("cfg.train.grad_clip", c.grad_clip_norm);
  f.put_scalar("cfg.train.w_mel", c.w_mel);
  f.put_scalar("cfg.train.w_duration", c.w_duration);
  f.put_scalar("cfg.train.w_pitch", c.w_pitch);
  f.put_scalar("cfg.train.w_energy", c.w_energy);
  f.put_scalar("cfg.train.front_end",
               c.front_end == acoustic::FrontEnd::Baseline ? 1.0 : 0.0);
  f.put_scalar("cfg.train.context_c", c.context_c);
  f.put_scalar("cfg.train.optimizer", c.optimizer == Optimizer::Sgd ? 1.0 : 0.0);
  f.put_scalar("cfg.train.checkpoint_interval", c.checkpoint_interval);
  f.put_scalar("cfg.train.threads", c.threads);
}

TrainConfig get_train(const io::BlockFile& f) {
  TrainConfig c;
  c.seed = static_cast<uint64_t>(f.get_scalar("cfg.train.seed"));
  c.learning_rate = f.get_scalar("cfg.train.lr");
  c.batch_size = static_cast<int>(f.get_scalar("cfg.train.batch_size"));
  c.max_steps = static_cast<int>(f.get_scalar("cfg.train.max_steps"));
  c.grad_clip_norm = f.get_scalar("cfg.train.grad_clip");
  c.w_mel = f.get_scalar("cfg.train.w_mel");
  c.w_duration = f.get_scalar("cfg.train.w_duration");
  c.w_pitch = f.get_scalar("cfg.train.w_pitch");
  c.w_energy = f.get_scalar("cfg.train.w_energy");
  c.front_end = f.get_scalar("cfg.train.front_end") != 0.0 ? acoustic::FrontEnd::Baseline
                                                           : acoustic::FrontEnd::Visual;
  c.context_c = static_cast<int>(f.get_scalar("cfg.train.context_c"));
  c.optimizer = f.get_scalar("cfg.train.optimizer") != 0.0 ? Optimizer::Sgd : Optimizer::Adam;
  c.checkpoint_interval = static_cast<int>(f.get_scalar("cfg.train.checkpoint_interval"));
  c.threads = static_cast<int>(f.get_scalar("cfg.train.threads"));
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainState& state) {
  io::BlockFile f;
  put_render(f, state.model.render_spec);
  f.put_scalar("cfg.slice.c", state.model.slice_spec.context_chars);
  put_fe(f, state.model.fe_cfg);
  put_ac(f, state.model.ac_cfg);
  put_train(f, state.cfg);
  std::vector<double> vocab_chars;
  for (const auto& [cp, id] : state.model.vocab.to_id)
    vocab_chars.push_back(static_cast<double>(cp));
  f.put_vector("vocab.chars", vocab_chars);
  f.put_scalar("meta.step", static_cast<double>(state.step));
  for (const auto& e : state.model.params.entries()) {
    std::vector<uint32_t> dims(e.shape.begin(), e.shape.end());
    const double* d = state.model.params.flat().data() + e.offset;
    f.put("param." + e.name, dims, std::vector<double>(d, d + e.size));
  }
  for (const auto& e : state.model.stats.entries()) {
    std::vector<uint32_t> dims(e.shape.begin(), e.shape.end());
    const double* d = state.model.stats.flat().data() + e.offset;
    f.put("stat." + e.name, dims, std::vector<double>(d, d + e.size));
  }
  f.put_vector("opt.m", state.adam_m);
  f.put_vector("opt.v", state.adam_v);
  io::write_block_file(path, f);
}

TrainState load_checkpoint(const std::string& path) {
  io::BlockFile f = io::read_block_file(path);
  TrainConfig cfg = get_train(f);
  textimg::RenderSpec render = get_render(f);
  features::ExtractorConfig fe = get_fe(f);
  acoustic::AcousticConfig ac = get_ac(f);
  acoustic::CharVocab vocab;
  int next = 1;
  for (double cp : f.get("vocab.chars")) vocab.to_id[static_cast<uint32_t>(cp)] = next++;
  TrainState st;
  st.cfg = cfg;
  st.model = acoustic::make_model(cfg.front_end, render,
                                  slicer::SliceSpec{static_cast<int>(f.get_scalar("cfg.slice.c"))},
                                  fe, ac, vocab, cfg.seed);
  for (const auto& e : st.model.params.entries()) {
    const auto& v = f.get("param." + e.name);
    if (v.size() != e.size)
      throw IoError(path + ": parameter block param." + e.name + " has wrong size");
    std::copy(v.begin(), v.end(), st.model.params.flat().begin() + e.offset);
  }
  for (const auto& e : st.model.stats.entries()) {
    const auto& v = f.get("stat." + e.name);
    if (v.size() != e.size)
      throw IoError(path + ": statistics block stat." + e.name + " has wrong size");
    std::copy(v.begin(), v.end(), st.model.stats.flat().begin() + e.offset);
  }
  st.adam_m = f.get("opt.m");
  st.adam_v = f.get("opt.v");
  if (st.adam_m.size() != st.model.params.total_size() ||
      st.adam_v.size() != st.model.params.total_size())
    throw IoError(path + ": optimizer state size mismatch");
  st.step = static_cast<long long>(f.get_scalar("meta.step"));
  return st;
}

acoustic::Model load_model(const std::string& path) {
  return load_checkpoint(path).model;
}

FitResult fit(const TrainConfig& cfg, const textimg::RenderSpec& render_spec,
              const features::ExtractorConfig& fe_cfg, const acoustic::AcousticConfig& ac_cfg,
              const std::string& manifest_path, const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  auto records = data::load_manifest(manifest_path);
  if (records.empty()) throw InputError("fit: manifest has no records");

  TrainState state;
  if (!cfg.init_checkpoint.empty()) {
    state = load_checkpoint(cfg.init_checkpoint);
    // the new run's schedule-level settings win; model and step carry over
    state.cfg = cfg;
  } else {
    std::vector<std::string> texts;
    for (const auto& r : records) texts.push_back(r.text);
    acoustic::CharVocab vocab = acoustic::CharVocab::build(texts);
    state = init_training(cfg, render_spec, fe_cfg, ac_cfg, vocab);
  }

  std::vector<Sample> samples;
  samples.reserve(records.size());
  for (const auto& r : records) samples.push_back(prepare_sample(r, state.model));

  std::ofstream loss_log(fs::path(out_dir) / "loss_log.tsv");
  if (!loss_log) throw IoError("cannot open loss log in " + out_dir);
  loss_log.precision(10);

  Rng order_rng(splitmix64(cfg.seed ^ 0x6F72646572ULL ^
                           static_cast<uint64_t>(state.step)));
  std::vector<int> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  size_t pos = order.size();  // trigger reshuffle on first use

  FitResult result;
  LossReport last;
  for (int s = 0; s < cfg.max_steps; ++s) {
    std::vector<const Sample*> batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (pos >= order.size()) {
        order_rng.shuffle(order);
        pos = 0;
      }
      batch.push_back(&samples[order[pos++]]);
    }
    last = train_step(state, batch);
    loss_log << state.step << '\t' << last.mel_l1 << '\t' << last.duration_mse << '\t'
             << last.pitch_mse << '\t' << last.energy_mse << '\t' << last.total << '\n';
    if (cfg.checkpoint_interval > 0 && (s + 1) % cfg.checkpoint_interval == 0 &&
        s + 1 < cfg.max_steps) {
      save_checkpoint(
          (fs::path(out_dir) / ("ckpt_step" + std::to_string(state.step) + ".vtts")).string(),
          state);
    }
  }
  loss_log.flush();
  std::string final_path = (fs::path(out_dir) / "ckpt_final.vtts").string();
  save_checkpoint(final_path, state);
  result.final_checkpoint = final_path;
  result.loss_log = (fs::path(out_dir) / "loss_log.tsv").string();
  result.final_loss = last;
  result.steps_run = state.step;
  return result;
}

}  // namespace vtts::train
