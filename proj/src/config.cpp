#include "kinseq/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace kinseq {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_num(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last)
    throw ConfigError("config key '" + key + "': cannot parse value '" +
                      value + "'");
  return out;
}

std::vector<std::string> parse_list(const std::string& value) {
  std::vector<std::string> out;
  std::istringstream is(value);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

SynthConfig RunConfig::synth() const {
  SynthConfig sc;
  sc.n_subjects = synth_subjects;
  sc.trials_per_subject = synth_trials;
  sc.n_channels = synth_channels;
  sc.regimes = default_regimes(synth_regimes, synth_noise,
                               synth_branch_factor);
  sc.segments_per_regime = synth_segments_per_regime;
  sc.seg_len_min = synth_seg_min;
  sc.seg_len_max = synth_seg_max;
  sc.sample_rate_hz = synth_rate;
  sc.seed = model.seed;
  return sc;
}

void apply_key(RunConfig& cfg, const std::string& key,
               const std::string& value) {
  // model
  if (key == "n_x") cfg.model.n_x = parse_num<Index>(key, value);
  else if (key == "n_h") cfg.model.n_h = parse_num<Index>(key, value);
  else if (key == "n_c") cfg.model.n_c = parse_num<Index>(key, value);
  else if (key == "t_past") cfg.model.t_past = parse_num<Index>(key, value);
  else if (key == "t_future")
    cfg.model.t_future = parse_num<Index>(key, value);
  else if (key == "variant") cfg.model.variant = variant_from_string(value);
  else if (key == "decoder_bridge")
    cfg.model.bridge = bridge_from_string(value);
  else if (key == "seed") {
    const auto s = parse_num<std::uint64_t>(key, value);
    cfg.model.seed = s;
    cfg.train.seed = s;
  }
  // training
  else if (key == "steps")
    cfg.train.steps = parse_num<std::uint64_t>(key, value);
  else if (key == "batch_size")
    cfg.train.batch_size = parse_num<Index>(key, value);
  else if (key == "learning_rate") {
    cfg.train.learning_rate = parse_num<double>(key, value);
  } else if (key == "clip_norm")
    cfg.train.clip_norm = parse_num<double>(key, value);
  else if (key == "eval_every")
    cfg.train.eval_every = parse_num<std::uint64_t>(key, value);
  else if (key == "eval_windows")
    cfg.train.eval_windows = parse_num<Index>(key, value);
  else if (key == "heldout_subjects")
    cfg.train.heldout_subjects = parse_list(value);
  // retrieval
  else if (key == "stride") cfg.stride = parse_num<Index>(key, value);
  else if (key == "threshold")
    cfg.threshold = parse_num<double>(key, value);
  else if (key == "activity") cfg.activity = value;
  else if (key == "val_subjects") cfg.val_subjects = parse_list(value);
  // io
  else if (key == "data") cfg.data = value;
  else if (key == "out") cfg.out = value;
  // synth
  else if (key == "synth_subjects")
    cfg.synth_subjects = parse_num<int>(key, value);
  else if (key == "synth_trials")
    cfg.synth_trials = parse_num<int>(key, value);
  else if (key == "synth_channels")
    cfg.synth_channels = parse_num<int>(key, value);
  else if (key == "synth_regimes")
    cfg.synth_regimes = parse_num<int>(key, value);
  else if (key == "synth_branch_factor")
    cfg.synth_branch_factor = parse_num<int>(key, value);
  else if (key == "synth_segments_per_regime")
    cfg.synth_segments_per_regime = parse_num<int>(key, value);
  else if (key == "synth_noise")
    cfg.synth_noise = parse_num<double>(key, value);
  else if (key == "synth_rate") cfg.synth_rate = parse_num<double>(key, value);
  else if (key == "synth_seg_min")
    cfg.synth_seg_min = parse_num<Index>(key, value);
  else if (key == "synth_seg_max")
    cfg.synth_seg_max = parse_num<Index>(key, value);
  else
    throw ConfigError("unknown config key '" + key + "'");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        " is not 'key = value': " + s);
    apply_key(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return cfg;
}

}  // namespace kinseq
