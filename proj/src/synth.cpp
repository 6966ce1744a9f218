#include "kinseq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "kinseq/csv.hpp"

namespace kinseq {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Frames over which a branching regime winds up its amplitude before the
// branch point; the ramp makes time-to-branch readable from a single window.
constexpr Index kBranchRampFrames = 50;
constexpr double kFreqJitter = 0.03;  // per-subject, non-branching regimes

double channel_mult(int m, int n_channels) {
  return 1.0 + 0.5 * m / std::max(1, n_channels - 1);
}

double channel_phase(int regime_index, int m) {
  // golden-angle spacing keeps channel phases spread and aperiodic
  return 2.3999632297286533 * (m + 1) + 0.73 * regime_index;
}

double plain_wave(const RegimeSpec& r, int regime_index, int m, int n_channels,
                  double t_seconds, double freq_scale, double seg_phase) {
  const double w = kTwoPi * r.base_freq_hz * channel_mult(m, n_channels) *
                   freq_scale;
  return r.amplitude *
         std::sin(w * t_seconds + seg_phase + channel_phase(regime_index, m));
}

double branch_offset(int b, int k, double amplitude) {
  return 2.0 * amplitude * (2.0 * b - (k - 1)) / std::max(1, k - 1);
}

// u: frames relative to the branch point (negative = approach).
double branch_wave(const RegimeSpec& r, int regime_index, int m,
                   int n_channels, Index u, double sample_rate_hz, int b) {
  const double t = static_cast<double>(u) / sample_rate_hz;
  const double w = kTwoPi * r.base_freq_hz * channel_mult(m, n_channels);
  const double s = std::sin(w * t + channel_phase(regime_index, m));
  if (u < 0) {
    const double ramp = std::clamp(
        1.0 + static_cast<double>(u) / static_cast<double>(kBranchRampFrames),
        0.25, 1.0);
    return r.amplitude * ramp * s;
  }
  return branch_offset(b, r.branching, r.amplitude) + r.amplitude * s;
}

}  // namespace

std::vector<RegimeSpec> default_regimes(int n_regimes, double noise_std,
                                        int branch_factor) {
  std::vector<RegimeSpec> out;
  for (int i = 0; i < n_regimes; ++i) {
    RegimeSpec r;
    r.label = "r" + std::to_string(i);
    r.base_freq_hz = 0.35 + 0.3 * i;
    r.amplitude = 1.0;
    r.noise_std = noise_std;
    r.branching = (i == 0) ? branch_factor : 1;
    out.push_back(std::move(r));
  }
  return out;
}

void validate(const SynthConfig& cfg) {
  if (cfg.n_subjects < 1 || cfg.trials_per_subject < 1 ||
      cfg.n_channels < 1 || cfg.segments_per_regime < 1)
    throw ConfigError("synth: counts must be >= 1");
  if (cfg.regimes.empty()) throw ConfigError("synth: no regimes");
  if (cfg.seg_len_min < 2 || cfg.seg_len_max < cfg.seg_len_min)
    throw ConfigError("synth: bad segment length range");
  if (cfg.sample_rate_hz <= 0) throw ConfigError("synth: sample rate <= 0");
  for (const auto& r : cfg.regimes) {
    if (r.noise_std < 0)
      throw ConfigError("synth: regime '" + r.label + "' has negative noise");
    if (r.branching < 1)
      throw ConfigError("synth: regime '" + r.label + "' branching < 1");
    if (r.label.empty()) throw ConfigError("synth: empty regime label");
  }
}

std::vector<Trajectory> synthesize_corpus(const SynthConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);

  const int n_regimes = static_cast<int>(cfg.regimes.size());
  // per (subject, regime) frequency scale; branching regimes stay canonical
  std::vector<std::vector<double>> freq_scale(
      static_cast<std::size_t>(cfg.n_subjects));
  for (int s = 0; s < cfg.n_subjects; ++s) {
    auto& row = freq_scale[static_cast<std::size_t>(s)];
    for (int r = 0; r < n_regimes; ++r)
      row.push_back(1.0 + kFreqJitter * (2.0 * rng.uniform() - 1.0));
  }

  std::vector<Trajectory> corpus;
  for (int s = 0; s < cfg.n_subjects; ++s) {
    for (int trial = 0; trial < cfg.trials_per_subject; ++trial) {
      std::vector<int> deck;
      for (int visit = 0; visit < cfg.segments_per_regime; ++visit)
        for (int r = 0; r < n_regimes; ++r) deck.push_back(r);
      // adjacent segments never share a regime, so label runs coincide with
      // generator segments (and every branch point sits at a run midpoint)
      for (int attempt = 0; attempt < 1000; ++attempt) {
        for (std::size_t i = deck.size() - 1; i > 0; --i) {
          const auto j = rng.index(i + 1);
          std::swap(deck[i], deck[static_cast<std::size_t>(j)]);
        }
        bool ok = true;
        for (std::size_t i = 1; i < deck.size(); ++i)
          if (deck[i] == deck[i - 1]) ok = false;
        if (ok || n_regimes < 2) break;
      }

      std::vector<Mat> segs;
      std::vector<std::string> labels;
      for (int ri : deck) {
        const auto& regime = cfg.regimes[static_cast<std::size_t>(ri)];
        const Index len =
            cfg.seg_len_min +
            static_cast<Index>(rng.index(static_cast<std::uint64_t>(
                cfg.seg_len_max - cfg.seg_len_min + 1)));
        Mat seg(cfg.n_channels, len);
        if (regime.branching > 1) {
          const Index mid = len / 2;
          const int b = static_cast<int>(
              rng.index(static_cast<std::uint64_t>(regime.branching)));
          for (Index t = 0; t < len; ++t)
            for (int m = 0; m < cfg.n_channels; ++m)
              seg(m, t) = branch_wave(regime, ri, m, cfg.n_channels, t - mid,
                                      cfg.sample_rate_hz, b);
        } else {
          const double seg_phase = kTwoPi * rng.uniform();
          const double scale =
              freq_scale[static_cast<std::size_t>(s)]
                        [static_cast<std::size_t>(ri)];
          for (Index t = 0; t < len; ++t)
            for (int m = 0; m < cfg.n_channels; ++m)
              seg(m, t) = plain_wave(regime, ri, m, cfg.n_channels,
                                     static_cast<double>(t) /
                                         cfg.sample_rate_hz,
                                     scale, seg_phase);
        }
        if (regime.noise_std > 0)
          for (Index t = 0; t < len; ++t)
            for (int m = 0; m < cfg.n_channels; ++m)
              seg(m, t) += regime.noise_std * rng.normal();
        labels.insert(labels.end(), static_cast<std::size_t>(len),
                      regime.label);
        segs.push_back(std::move(seg));
      }

      Index total = 0;
      for (const auto& m : segs) total += m.cols();
      Trajectory t;
      t.frames.resize(cfg.n_channels, total);
      Index at = 0;
      for (const auto& m : segs) {
        t.frames.middleCols(at, m.cols()) = m;
        at += m.cols();
      }
      t.labels = std::move(labels);
      t.sample_rate_hz = cfg.sample_rate_hz;
      t.subject_id = "s" + std::to_string(s);
      t.trial_id = "t" + std::to_string(trial);
      corpus.push_back(std::move(t));
    }
  }
  return corpus;
}

BranchProbe branch_probe(const SynthConfig& cfg, int regime_index,
                         Index t_past, Index t_future) {
  validate(cfg);
  if (regime_index < 0 ||
      regime_index >= static_cast<int>(cfg.regimes.size()))
    throw ContractError("branch_probe: regime index out of range");
  const auto& regime = cfg.regimes[static_cast<std::size_t>(regime_index)];
  if (regime.branching < 2)
    throw ContractError("branch_probe: regime '" + regime.label +
                        "' does not branch");
  BranchProbe probe;
  probe.noise_std = regime.noise_std;
  probe.past.resize(cfg.n_channels, t_past);
  for (Index u = -t_past; u < 0; ++u)
    for (int m = 0; m < cfg.n_channels; ++m)
      probe.past(m, u + t_past) = branch_wave(regime, regime_index, m,
                                              cfg.n_channels, u,
                                              cfg.sample_rate_hz, 0);
  for (int b = 0; b < regime.branching; ++b) {
    Mat cont(cfg.n_channels, t_future);
    for (Index u = 0; u < t_future; ++u)
      for (int m = 0; m < cfg.n_channels; ++m)
        cont(m, u) = branch_wave(regime, regime_index, m, cfg.n_channels, u,
                                 cfg.sample_rate_hz, b);
    probe.branches.push_back(std::move(cont));
  }
  return probe;
}

namespace {

nlohmann::json regime_json(const RegimeSpec& r) {
  return {{"label", r.label},
          {"base_freq_hz", r.base_freq_hz},
          {"amplitude", r.amplitude},
          {"noise_std", r.noise_std},
          {"branching", r.branching}};
}

RegimeSpec regime_from_json(const nlohmann::json& j) {
  RegimeSpec r;
  r.label = j.at("label").get<std::string>();
  r.base_freq_hz = j.at("base_freq_hz").get<double>();
  r.amplitude = j.at("amplitude").get<double>();
  r.noise_std = j.at("noise_std").get<double>();
  r.branching = j.at("branching").get<int>();
  return r;
}

}  // namespace

void write_corpus(const std::filesystem::path& dir,
                  const std::vector<Trajectory>& corpus,
                  const std::optional<SynthConfig>& cfg, bool force) {
  namespace fs = std::filesystem;
  if (fs::exists(dir) && !force)
    throw ConfigError("corpus: output directory " + dir.string() +
                      " exists (pass --force to overwrite)");
  fs::create_directories(dir);

  nlohmann::json manifest;
  manifest["format"] = 1;
  manifest["trials"] = nlohmann::json::array();
  for (const auto& t : corpus) {
    const std::string file = t.subject_id + "_" + t.trial_id + ".csv";
    save_csv(dir / file, t);
    manifest["trials"].push_back({{"subject", t.subject_id},
                                  {"trial", t.trial_id},
                                  {"file", file},
                                  {"frames", t.length()},
                                  {"sample_rate_hz", t.sample_rate_hz}});
  }
  if (cfg) {
    nlohmann::json j;
    j["n_subjects"] = cfg->n_subjects;
    j["trials_per_subject"] = cfg->trials_per_subject;
    j["n_channels"] = cfg->n_channels;
    j["segments_per_regime"] = cfg->segments_per_regime;
    j["seg_len_min"] = cfg->seg_len_min;
    j["seg_len_max"] = cfg->seg_len_max;
    j["sample_rate_hz"] = cfg->sample_rate_hz;
    j["seed"] = cfg->seed;
    j["regimes"] = nlohmann::json::array();
    for (const auto& r : cfg->regimes) j["regimes"].push_back(regime_json(r));
    manifest["synth"] = j;
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("corpus: cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

std::vector<Trajectory> load_corpus(const std::filesystem::path& where) {
  namespace fs = std::filesystem;
  fs::path manifest_path = where;
  if (fs::is_directory(where)) manifest_path = where / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("corpus: cannot open " + manifest_path.string());
  nlohmann::json manifest;
  in >> manifest;

  std::vector<Trajectory> corpus;
  const fs::path base = manifest_path.parent_path();
  for (const auto& entry : manifest.at("trials")) {
    Trajectory t = load_csv(base / entry.at("file").get<std::string>());
    t.subject_id = entry.at("subject").get<std::string>();
    t.trial_id = entry.at("trial").get<std::string>();
    t.sample_rate_hz = entry.at("sample_rate_hz").get<double>();
    corpus.push_back(std::move(t));
  }
  if (corpus.empty()) throw DataError("corpus: manifest lists no trials");
  return corpus;
}

}  // namespace kinseq
