// SPDX-License-Identifier: Apache-2.0
#include "vtts/config.hpp"

#include <fstream>
#include <sstream>

namespace vtts::config {

namespace {

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected a number, got '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    unsigned long long out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected an unsigned integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("config key " + key + ": expected a boolean, got '" + v + "'");
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace

void ExperimentConfig::finalize() {
  render.validate();
  slice.validate();
  train.context_c = slice.context_chars;
  extractor.input_height = render.char_height_px;
  extractor.input_width = render.char_width_px * slice.context_chars;
  extractor.output_dim = acoustic.model_dim;
  extractor.validate();
  acoustic.validate();
  train.validate();
}

void apply_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "render.w") c.render.char_width_px = parse_int(key, value);
  else if (key == "render.h") c.render.char_height_px = parse_int(key, value);
  else if (key == "render.fs") c.render.font_size_pt = parse_int(key, value);
  else if (key == "render.font") {
    if (value == "synthetic") c.render.font_kind = textimg::FontKind::Synthetic;
    else if (value == "file") c.render.font_kind = textimg::FontKind::File;
    else throw ConfigError("config key render.font: expected synthetic|file, got '" + value + "'");
  } else if (key == "render.variant") c.render.synthetic_variant = parse_int(key, value);
  else if (key == "render.font_path") c.render.font_path = value;
  else if (key == "render.typeface") c.render.typeface_id = parse_int(key, value);
  else if (key == "slice.c") c.slice.context_chars = parse_int(key, value);
  else if (key == "extractor.blocks") c.extractor.num_blocks = parse_int(key, value);
  else if (key == "extractor.channels") c.extractor.channels = parse_int(key, value);
  else if (key == "extractor.kernel") c.extractor.kernel = parse_int(key, value);
  else if (key == "extractor.padding") c.extractor.padding = parse_int(key, value);
  else if (key == "extractor.stride") c.extractor.stride = parse_int(key, value);
  else if (key == "extractor.pool") c.extractor.pool = parse_bool(key, value);
  else if (key == "extractor.dim") c.extractor.output_dim = parse_int(key, value);
  else if (key == "acoustic.dim") c.acoustic.model_dim = parse_int(key, value);
  else if (key == "acoustic.encoder_blocks") c.acoustic.encoder_blocks = parse_int(key, value);
  else if (key == "acoustic.decoder_blocks") c.acoustic.decoder_blocks = parse_int(key, value);
  else if (key == "acoustic.heads") c.acoustic.attention_heads = parse_int(key, value);
  else if (key == "acoustic.ff_kernel") c.acoustic.ff_conv_kernel = parse_int(key, value);
  else if (key == "acoustic.ff_hidden") c.acoustic.ff_hidden = parse_int(key, value);
  else if (key == "acoustic.predictor_hidden") c.acoustic.predictor_hidden = parse_int(key, value);
  else if (key == "acoustic.predictor_kernel") c.acoustic.predictor_kernel = parse_int(key, value);
  else if (key == "acoustic.n_mels") c.acoustic.n_mels = parse_int(key, value);
  else if (key == "acoustic.pitch_bins") c.acoustic.pitch_bins = parse_int(key, value);
  else if (key == "acoustic.energy_bins") c.acoustic.energy_bins = parse_int(key, value);
  else if (key == "acoustic.pitch_min") c.acoustic.pitch_min = parse_double(key, value);
  else if (key == "acoustic.pitch_max") c.acoustic.pitch_max = parse_double(key, value);
  else if (key == "acoustic.energy_min") c.acoustic.energy_min = parse_double(key, value);
  else if (key == "acoustic.energy_max") c.acoustic.energy_max = parse_double(key, value);
  else if (key == "acoustic.dropout") c.acoustic.dropout = parse_double(key, value);
  else if (key == "acoustic.max_frames") c.acoustic.max_frames = parse_int(key, value);
  else if (key == "train.seed") c.train.seed = parse_u64(key, value);
  else if (key == "train.lr") c.train.learning_rate = parse_double(key, value);
  else if (key == "train.batch_size") c.train.batch_size = parse_int(key, value);
  else if (key == "train.max_steps") c.train.max_steps = parse_int(key, value);
  else if (key == "train.grad_clip") c.train.grad_clip_norm = parse_double(key, value);
  else if (key == "train.w_mel") c.train.w_mel = parse_double(key, value);
  else if (key == "train.w_duration") c.train.w_duration = parse_double(key, value);
  else if (key == "train.w_pitch") c.train.w_pitch = parse_double(key, value);
  else if (key == "train.w_energy") c.train.w_energy = parse_double(key, value);
  else if (key == "train.front_end") {
    if (value == "visual") c.train.front_end = acoustic::FrontEnd::Visual;
    else if (value == "baseline") c.train.front_end = acoustic::FrontEnd::Baseline;
    else throw ConfigError("config key train.front_end: expected visual|baseline, got '" +
                           value + "'");
  } else if (key == "train.optimizer") {
    if (value == "adam") c.train.optimizer = train::Optimizer::Adam;
    else if (value == "sgd") c.train.optimizer = train::Optimizer::Sgd;
    else throw ConfigError("config key train.optimizer: expected adam|sgd, got '" + value + "'");
  } else if (key == "train.checkpoint_interval") c.train.checkpoint_interval = parse_int(key, value);
  else if (key == "train.threads") c.train.threads = parse_int(key, value);
  else if (key == "train.init_checkpoint") c.train.init_checkpoint = value;
  else throw ConfigError("unknown config key: " + key);
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    apply_key(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  cfg.finalize();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

std::string to_text(const ExperimentConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "render.w=" << c.render.char_width_px << "\n";
  os << "render.h=" << c.render.char_height_px << "\n";
  os << "render.fs=" << c.render.font_size_pt << "\n";
  os << "render.font=" << (c.render.font_kind == textimg::FontKind::File ? "file" : "synthetic")
     << "\n";
  os << "render.variant=" << c.render.synthetic_variant << "\n";
  if (!c.render.font_path.empty()) os << "render.font_path=" << c.render.font_path << "\n";
  os << "render.typeface=" << c.render.typeface_id << "\n";
  os << "slice.c=" << c.slice.context_chars << "\n";
  os << "extractor.blocks=" << c.extractor.num_blocks << "\n";
  os << "extractor.channels=" << c.extractor.channels << "\n";
  os << "extractor.kernel=" << c.extractor.kernel << "\n";
  os << "extractor.padding=" << c.extractor.padding << "\n";
  os << "extractor.stride=" << c.extractor.stride << "\n";
  os << "extractor.pool=" << (c.extractor.pool ? "true" : "false") << "\n";
  os << "extractor.dim=" << c.extractor.output_dim << "\n";
  os << "acoustic.dim=" << c.acoustic.model_dim << "\n";
  os << "acoustic.encoder_blocks=" << c.acoustic.encoder_blocks << "\n";
  os << "acoustic.decoder_blocks=" << c.acoustic.decoder_blocks << "\n";
  os << "acoustic.heads=" << c.acoustic.attention_heads << "\n";
  os << "acoustic.ff_kernel=" << c.acoustic.ff_conv_kernel << "\n";
  os << "acoustic.ff_hidden=" << c.acoustic.ff_hidden << "\n";
  os << "acoustic.predictor_hidden=" << c.acoustic.predictor_hidden << "\n";
  os << "acoustic.predictor_kernel=" << c.acoustic.predictor_kernel << "\n";
  os << "acoustic.n_mels=" << c.acoustic.n_mels << "\n";
  os << "acoustic.pitch_bins=" << c.acoustic.pitch_bins << "\n";
  os << "acoustic.energy_bins=" << c.acoustic.energy_bins << "\n";
  os << "acoustic.pitch_min=" << c.acoustic.pitch_min << "\n";
  os << "acoustic.pitch_max=" << c.acoustic.pitch_max << "\n";
  os << "acoustic.energy_min=" << c.acoustic.energy_min << "\n";
  os << "acoustic.energy_max=" << c.acoustic.energy_max << "\n";
  os << "acoustic.dropout=" << c.acoustic.dropout << "\n";
  os << "acoustic.max_frames=" << c.acoustic.max_frames << "\n";
  os << "train.seed=" << c.train.seed << "\n";
  os << "train.lr=" << c.train.learning_rate << "\n";
  os << "train.batch_size=" << c.train.batch_size << "\n";
  os << "train.max_steps=" << c.train.max_steps << "\n";
  os << "train.grad_clip=" << c.train.grad_clip_norm << "\n";
  os << "train.w_mel=" << c.train.w_mel << "\n";
  os << "train.w_duration=" << c.train.w_duration << "\n";
  os << "train.w_pitch=" << c.train.w_pitch << "\n";
  os << "train.w_energy=" << c.train.w_energy << "\n";
  os << "train.front_end="
     << (c.train.front_end == acoustic::FrontEnd::Baseline ? "baseline" : "visual") << "\n";
  os << "train.optimizer=" << (c.train.optimizer == train::Optimizer::Sgd ? "sgd" : "adam")
     << "\n";
  os << "train.checkpoint_interval=" << c.train.checkpoint_interval << "\n";
  os << "train.threads=" << c.train.threads << "\n";
  if (!c.train.init_checkpoint.empty())
    os << "train.init_checkpoint=" << c.train.init_checkpoint << "\n";
  return os.str();
}

}  // namespace vtts::config
