// SPDX-License-Identifier: Apache-2.0
#include "vtts/acoustic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace vtts::acoustic {

void AcousticConfig::validate() const {
  if (model_dim <= 0 || n_mels <= 0) throw ConfigError("acoustic: dimensions must be positive");
  if (attention_heads <= 0 || model_dim % attention_heads != 0)
    throw ConfigError("acoustic: model_dim must divide evenly into attention heads");
  if (encoder_blocks <= 0 || decoder_blocks <= 0)
    throw ConfigError("acoustic: block counts must be positive");
  if (ff_conv_kernel <= 0 || ff_conv_kernel % 2 == 0)
    throw ConfigError("acoustic: ff_conv_kernel must be odd");
  if (predictor_kernel <= 0 || predictor_kernel % 2 == 0)
    throw ConfigError("acoustic: predictor_kernel must be odd");
  if (ff_hidden <= 0 || predictor_hidden <= 0)
    throw ConfigError("acoustic: hidden sizes must be positive");
  if (pitch_bins < 2 || energy_bins < 2) throw ConfigError("acoustic: need at least 2 bins");
  if (!(pitch_min < pitch_max) || !(energy_min < energy_max))
    throw ConfigError("acoustic: bin ranges must be strictly increasing");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("acoustic: dropout must be in [0,1)");
  if (max_frames <= 0) throw ConfigError("acoustic: max_frames must be positive");
}

void VarianceTargets::validate(int char_count) const {
  size_t n = static_cast<size_t>(char_count);
  if (durations.size() != n || pitch.size() != n || energy.size() != n)
    throw InputError("variance targets do not match the character count");
  bool any = false;
  for (int d : durations) {
    if (d < 0) throw InputError("negative duration target");
    if (d > 0) any = true;
  }
  if (!any && char_count > 0) throw InputError("all duration targets are zero");
}

int CharVocab::id_of(uint32_t cp) const {
  auto it = to_id.find(cp);
  return it == to_id.end() ? kUnknownId : it->second;
}

CharVocab CharVocab::build(const std::vector<std::string>& texts) {
  std::set<uint32_t> chars;
  for (const auto& t : texts)
    for (uint32_t cp : utf8_decode(t)) chars.insert(cp);
  CharVocab v;
  int next = 1;
  for (uint32_t cp : chars) v.to_id[cp] = next++;
  return v;
}

namespace {

void register_linear(nn::ParamStore& p, const std::string& base, int out, int in) {
  p.add(base + ".w", {out, in});
  p.add(base + ".b", {out});
}

void register_ln(nn::ParamStore& p, const std::string& base, int dim) {
  p.add(base + ".gamma", {dim});
  p.add(base + ".beta", {dim});
}

void register_fft_block(nn::ParamStore& p, const std::string& base,
                        const AcousticConfig& cfg) {
  const int d = cfg.model_dim;
  register_linear(p, base + ".attn.wq", d, d);
  register_linear(p, base + ".attn.wk", d, d);
  register_linear(p, base + ".attn.wv", d, d);
  register_linear(p, base + ".attn.wo", d, d);
  register_ln(p, base + ".ln1", d);
  p.add(base + ".ff.w1", {cfg.ff_hidden, d * cfg.ff_conv_kernel});
  p.add(base + ".ff.b1", {cfg.ff_hidden});
  p.add(base + ".ff.w2", {d, cfg.ff_hidden});
  p.add(base + ".ff.b2", {d});
  register_ln(p, base + ".ln2", d);
}

void register_predictor(nn::ParamStore& p, const std::string& base,
                        const AcousticConfig& cfg) {
  const int d = cfg.model_dim;
  const int ph = cfg.predictor_hidden;
  const int k = cfg.predictor_kernel;
  p.add(base + ".conv1.w", {ph, d * k});
  p.add(base + ".conv1.b", {ph});
  register_ln(p, base + ".ln1", ph);
  p.add(base + ".conv2.w", {ph, ph * k});
  p.add(base + ".conv2.b", {ph});
  register_ln(p, base + ".ln2", ph);
  register_linear(p, base + ".out", 1, ph);
}

void register_acoustic(nn::ParamStore& p, const AcousticConfig& cfg) {
  for (int i = 0; i < cfg.encoder_blocks; ++i)
    register_fft_block(p, "enc.b" + std::to_string(i), cfg);
  register_predictor(p, "va.dur", cfg);
  register_predictor(p, "va.pitch", cfg);
  p.add("va.pitch_emb", {cfg.pitch_bins, cfg.model_dim});
  register_predictor(p, "va.energy", cfg);
  p.add("va.energy_emb", {cfg.energy_bins, cfg.model_dim});
  for (int i = 0; i < cfg.decoder_blocks; ++i)
    register_fft_block(p, "dec.b" + std::to_string(i), cfg);
  register_linear(p, "mel", cfg.n_mels, cfg.model_dim);
}

// Generic init: weights uniform in +-1/sqrt(fan_in) with fan_in the
// trailing dimension; biases zero (a random bias easily dominates sparse
// activations before training); layer/batch norm scales 1 and shifts 0.
// The baseline lookup table is the front-end's feature source, not a linear
// map, and gets standard-normal rows so its features live at the same scale
// as the extractor's output and the position encoding.
void init_all_params(nn::ParamStore& params, Rng& rng) {
  for (const auto& e : params.entries()) {
    double* data = params.flat().data() + e.offset;
    auto ends_with = [&](const char* suffix) {
      std::string s(suffix);
      return e.name.size() >= s.size() &&
             e.name.compare(e.name.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".gamma")) {
      std::fill(data, data + e.size, 1.0);
    } else if (ends_with(".beta")) {
      std::fill(data, data + e.size, 0.0);
    } else if (e.name == "be.table") {
      for (size_t i = 0; i < e.size; ++i) data[i] = rng.normal();
    } else if (e.shape.size() == 2) {
      double bound = 1.0 / std::sqrt(static_cast<double>(e.shape.back()));
      for (size_t i = 0; i < e.size; ++i) data[i] = rng.uniform(-bound, bound);
    } else {
      std::fill(data, data + e.size, 0.0);
    }
  }
}

void init_stats(nn::StatStore& stats) {
  for (const auto& e : stats.entries()) {
    double* data = stats.flat().data() + e.offset;
    bool var = e.name.size() >= 5 && e.name.compare(e.name.size() - 5, 5, ".rvar") == 0;
    std::fill(data, data + e.size, var ? 1.0 : 0.0);
  }
}

}  // namespace

Model make_model(FrontEnd front_end, const textimg::RenderSpec& render_spec,
                 const slicer::SliceSpec& slice_spec, const features::ExtractorConfig& fe_cfg,
                 const AcousticConfig& ac_cfg, const CharVocab& vocab, uint64_t seed) {
  render_spec.validate();
  slice_spec.validate();
  ac_cfg.validate();
  Model m;
  m.front_end = front_end;
  m.render_spec = render_spec;
  m.slice_spec = slice_spec;
  m.fe_cfg = fe_cfg;
  m.fe_cfg.input_height = render_spec.char_height_px;
  m.fe_cfg.input_width = render_spec.char_width_px * slice_spec.context_chars;
  m.fe_cfg.output_dim = ac_cfg.model_dim;
  m.ac_cfg = ac_cfg;
  m.vocab = vocab;
  if (front_end == FrontEnd::Visual) {
    features::register_params(m.params, m.stats, m.fe_cfg);
  } else {
    m.params.add("be.table", {vocab.table_rows(), ac_cfg.model_dim});
  }
  register_acoustic(m.params, ac_cfg);
  Rng rng(splitmix64(seed ^ 0x76747473ULL));
  init_all_params(m.params, rng);
  init_stats(m.stats);
  return m;
}

int quantize_to_bin(double v, double lo, double hi, int bins) {
  double t = (v - lo) * static_cast<double>(bins) / (hi - lo);
  int b = static_cast<int>(std::floor(t));
  if (b < 0) b = 0;
  if (b > bins - 1) b = bins - 1;
  return b;
}

std::vector<int> round_durations(const std::vector<double>& log_duration) {
  std::vector<int> out(log_duration.size(), 0);
  long long total = 0;
  for (size_t i = 0; i < log_duration.size(); ++i) {
    double frames = std::expm1(log_duration[i]);
    int d = static_cast<int>(std::floor(frames + 0.5));
    if (d < 0) d = 0;
    out[i] = d;
    total += d;
  }
  if (total == 0 && !out.empty()) {
    size_t best = 0;
    for (size_t i = 1; i < log_duration.size(); ++i)
      if (log_duration[i] > log_duration[best]) best = i;
    out[best] = 1;
  }
  return out;
}

Mat length_regulate(const Mat& hidden, const std::vector<int>& durations) {
  if (static_cast<int>(durations.size()) != hidden.rows)
    throw InputError("length_regulate: durations do not match the row count");
  long long total = 0;
  for (int d : durations) {
    if (d < 0) throw InputError("length_regulate: negative duration");
    total += d;
  }
  if (total == 0) throw InputError("length_regulate: all durations are zero");
  Mat out(static_cast<int>(total), hidden.cols);
  int row = 0;
  for (int i = 0; i < hidden.rows; ++i)
    for (int r = 0; r < durations[i]; ++r) {
      for (int c = 0; c < hidden.cols; ++c) out.at(row, c) = hidden.at(i, c);
      ++row;
    }
  return out;
}

namespace {

int add_position_encoding(nn::Tape& t, int x) {
  const auto& shape = t.shape(x);
  Mat pe = nn::position_encoding(shape[0], shape[1]);
  return t.add(x, t.input(pe));
}

int fft_block(nn::Tape& t, int x, const std::string& base, const AcousticConfig& cfg,
              nn::Mode mode, Rng& rng) {
  const int d = cfg.model_dim;
  const int heads = cfg.attention_heads;
  const int dh = d / heads;
  int q = t.linear(x, t.param(base + ".attn.wq.w"), t.param(base + ".attn.wq.b"));
  int k = t.linear(x, t.param(base + ".attn.wk.w"), t.param(base + ".attn.wk.b"));
  int v = t.linear(x, t.param(base + ".attn.wv.w"), t.param(base + ".attn.wv.b"));
  std::vector<int> outs;
  for (int h = 0; h < heads; ++h) {
    int qh = t.slice_cols(q, h * dh, (h + 1) * dh);
    int kh = t.slice_cols(k, h * dh, (h + 1) * dh);
    int vh = t.slice_cols(v, h * dh, (h + 1) * dh);
    int scores = t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    outs.push_back(t.matmul(t.softmax_rows(scores), vh));
  }
  int o = heads == 1 ? outs[0] : t.concat_cols(outs);
  o = t.linear(o, t.param(base + ".attn.wo.w"), t.param(base + ".attn.wo.b"));
  o = t.dropout(o, cfg.dropout, rng, mode);
  x = t.layer_norm(t.add(x, o), t.param(base + ".ln1.gamma"), t.param(base + ".ln1.beta"),
                   kLayerNormEps);
  int h1 = t.conv1d(x, t.param(base + ".ff.w1"), t.param(base + ".ff.b1"),
                    cfg.ff_conv_kernel, (cfg.ff_conv_kernel - 1) / 2);
  h1 = t.relu(h1);
  int h2 = t.conv1d(h1, t.param(base + ".ff.w2"), t.param(base + ".ff.b2"), 1, 0);
  h2 = t.dropout(h2, cfg.dropout, rng, mode);
  return t.layer_norm(t.add(x, h2), t.param(base + ".ln2.gamma"),
                      t.param(base + ".ln2.beta"), kLayerNormEps);
}

int predictor(nn::Tape& t, int x, const std::string& base, const AcousticConfig& cfg,
              nn::Mode mode, Rng& rng) {
  const int k = cfg.predictor_kernel;
  const int pad = (k - 1) / 2;
  int h = t.conv1d(x, t.param(base + ".conv1.w"), t.param(base + ".conv1.b"), k, pad);
  h = t.relu(h);
  h = t.layer_norm(h, t.param(base + ".ln1.gamma"), t.param(base + ".ln1.beta"),
                   kLayerNormEps);
  h = t.dropout(h, cfg.dropout, rng, mode);
  h = t.conv1d(h, t.param(base + ".conv2.w"), t.param(base + ".conv2.b"), k, pad);
  h = t.relu(h);
  h = t.layer_norm(h, t.param(base + ".ln2.gamma"), t.param(base + ".ln2.beta"),
                   kLayerNormEps);
  h = t.dropout(h, cfg.dropout, rng, mode);
  return t.linear(h, t.param(base + ".out.w"), t.param(base + ".out.b"));  // [n,1]
}

std::vector<double> column0(nn::Tape& t, int node) {
  Mat m = t.mat(node);
  std::vector<double> out(m.rows);
  for (int r = 0; r < m.rows; ++r) out[r] = m.at(r, 0);
  return out;
}

}  // namespace

ForwardNodes forward_on_tape(nn::Tape& tape, const Model& model, const ForwardInput& input,
                             const VarianceTargets* targets, nn::Mode mode, Rng& dropout_rng) {
  const AcousticConfig& cfg = model.ac_cfg;
  ForwardNodes out;
  int n = 0;
  if (model.front_end == FrontEnd::Visual) {
    if (!input.slices) throw InputError("forward: visual front-end needs slices");
    n = input.slices->char_count;
    if (n == 0) throw InputError("forward: empty input sequence");
    auto ex = features::extract_on_tape(tape, *input.slices, model.stats, model.fe_cfg, mode);
    out.features = ex.node;
    out.bn_stats = std::move(ex.bn_stats);
  } else {
    if (!input.text) throw InputError("forward: baseline front-end needs text");
    n = static_cast<int>(input.text->size());
    if (n == 0) throw InputError("forward: empty input sequence");
    std::vector<int> ids;
    ids.reserve(n);
    for (uint32_t cp : *input.text) ids.push_back(model.vocab.id_of(cp));
    out.features = tape.gather_rows(tape.param("be.table"), std::move(ids));
  }

  int x = add_position_encoding(tape, out.features);
  for (int i = 0; i < cfg.encoder_blocks; ++i)
    x = fft_block(tape, x, "enc.b" + std::to_string(i), cfg, mode, dropout_rng);
  out.encoded = x;

  out.log_duration = predictor(tape, x, "va.dur", cfg, mode, dropout_rng);
  out.pitch = predictor(tape, x, "va.pitch", cfg, mode, dropout_rng);

  if (targets) targets->validate(n);
  std::vector<double> pitch_driver =
      targets ? targets->pitch : column0(tape, out.pitch);
  std::vector<int> pitch_ids(n);
  for (int i = 0; i < n; ++i)
    pitch_ids[i] = quantize_to_bin(pitch_driver[i], cfg.pitch_min, cfg.pitch_max,
                                   cfg.pitch_bins);
  x = tape.add(x, tape.gather_rows(tape.param("va.pitch_emb"), pitch_ids));

  out.energy = predictor(tape, x, "va.energy", cfg, mode, dropout_rng);
  std::vector<double> energy_driver =
      targets ? targets->energy : column0(tape, out.energy);
  std::vector<int> energy_ids(n);
  for (int i = 0; i < n; ++i)
    energy_ids[i] = quantize_to_bin(energy_driver[i], cfg.energy_min, cfg.energy_max,
                                    cfg.energy_bins);
  x = tape.add(x, tape.gather_rows(tape.param("va.energy_emb"), energy_ids));

  out.durations_used =
      targets ? targets->durations : round_durations(column0(tape, out.log_duration));
  long long total = 0;
  for (int d : out.durations_used) total += d;
  if (total == 0) throw InputError("forward: all durations are zero");
  if (total > cfg.max_frames)
    throw InputError("forward: " + std::to_string(total) + " frames exceed max_frames=" +
                     std::to_string(cfg.max_frames));
  std::vector<int> reg_idx;
  reg_idx.reserve(static_cast<size_t>(total));
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < out.durations_used[i]; ++r) reg_idx.push_back(i);
  out.regulated = tape.gather_rows(x, std::move(reg_idx));

  int y = add_position_encoding(tape, out.regulated);
  for (int i = 0; i < cfg.decoder_blocks; ++i)
    y = fft_block(tape, y, "dec.b" + std::to_string(i), cfg, mode, dropout_rng);
  out.mel = tape.linear(y, tape.param("mel.w"), tape.param("mel.b"));
  return out;
}

ForwardResult forward(const Model& model, const ForwardInput& input,
                      const VarianceTargets* targets) {
  nn::Tape tape(&model.params, nullptr);
  Rng rng(0);
  ForwardNodes nodes = forward_on_tape(tape, model, input, targets, nn::Mode::Eval, rng);
  ForwardResult res;
  res.mel = tape.mat(nodes.mel);
  res.variance.log_duration = column0(tape, nodes.log_duration);
  res.variance.pitch = column0(tape, nodes.pitch);
  res.variance.energy = column0(tape, nodes.energy);
  res.variance.durations_used = nodes.durations_used;
  return res;
}

Mat encode(const Mat& features, const Model& model) {
  if (features.rows == 0) throw InputError("encode: zero-length input");
  if (features.cols != model.ac_cfg.model_dim)
    throw InputError("encode: feature width " + std::to_string(features.cols) +
                     " does not match model_dim " + std::to_string(model.ac_cfg.model_dim));
  nn::Tape tape(&model.params, nullptr);
  Rng rng(0);
  int x = add_position_encoding(tape, tape.input(features));
  for (int i = 0; i < model.ac_cfg.encoder_blocks; ++i)
    x = fft_block(tape, x, "enc.b" + std::to_string(i), model.ac_cfg, nn::Mode::Eval, rng);
  return tape.mat(x);
}

std::pair<Mat, VariancePrediction> variance_adapt(const Mat& hidden, const Model& model,
                                                  const VarianceTargets* targets) {
  if (hidden.rows == 0) throw InputError("variance_adapt: zero-length input");
  const AcousticConfig& cfg = model.ac_cfg;
  nn::Tape tape(&model.params, nullptr);
  Rng rng(0);
  const int n = hidden.rows;
  int x = tape.input(hidden);
  int log_dur = predictor(tape, x, "va.dur", cfg, nn::Mode::Eval, rng);
  int pitch = predictor(tape, x, "va.pitch", cfg, nn::Mode::Eval, rng);
  if (targets) targets->validate(n);
  VariancePrediction pred;
  pred.log_duration = column0(tape, log_dur);
  pred.pitch = column0(tape, pitch);
  std::vector<double> pitch_driver = targets ? targets->pitch : pred.pitch;
  std::vector<int> pitch_ids(n);
  for (int i = 0; i < n; ++i)
    pitch_ids[i] = quantize_to_bin(pitch_driver[i], cfg.pitch_min, cfg.pitch_max,
                                   cfg.pitch_bins);
  x = tape.add(x, tape.gather_rows(tape.param("va.pitch_emb"), pitch_ids));
  int energy = predictor(tape, x, "va.energy", cfg, nn::Mode::Eval, rng);
  pred.energy = column0(tape, energy);
  std::vector<double> energy_driver = targets ? targets->energy : pred.energy;
  std::vector<int> energy_ids(n);
  for (int i = 0; i < n; ++i)
    energy_ids[i] = quantize_to_bin(energy_driver[i], cfg.energy_min, cfg.energy_max,
                                    cfg.energy_bins);
  x = tape.add(x, tape.gather_rows(tape.param("va.energy_emb"), energy_ids));
  pred.durations_used = targets ? targets->durations : round_durations(pred.log_duration);
  Mat regulated = length_regulate(tape.mat(x), pred.durations_used);
  return {regulated, pred};
}

MelSpectrogram decode(const Mat& regulated, const Model& model) {
  if (regulated.rows < 1) throw InputError("decode: need at least one frame");
  nn::Tape tape(&model.params, nullptr);
  Rng rng(0);
  int y = add_position_encoding(tape, tape.input(regulated));
  for (int i = 0; i < model.ac_cfg.decoder_blocks; ++i)
    y = fft_block(tape, y, "dec.b" + std::to_string(i), model.ac_cfg, nn::Mode::Eval, rng);
  int mel = tape.linear(y, tape.param("mel.w"), tape.param("mel.b"));
  MelSpectrogram out;
  out.frames = tape.mat(mel);
  return out;
}

Mat baseline_embed(const std::vector<uint32_t>& text, const CharVocab& vocab,
                   const nn::ParamStore& params) {
  const auto& e = params.entry("be.table");
  const int d = e.shape[1];
  Mat out(static_cast<int>(text.size()), d);
  const double* table = params.data("be.table");
  for (size_t i = 0; i < text.size(); ++i) {
    int id = vocab.id_of(text[i]);
    std::copy(table + static_cast<size_t>(id) * d, table + static_cast<size_t>(id + 1) * d,
              out.a.begin() + i * d);
  }
  return out;
}

}  // namespace vtts::acoustic
