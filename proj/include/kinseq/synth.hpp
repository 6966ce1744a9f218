#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kinseq/trajectory.hpp"

namespace kinseq {

/// One activity regime of the generator. Channels follow sinusoids derived
/// from the base frequency; regimes with branching > 1 pick one of k distinct
/// continuations at each segment midpoint, which makes futures at those
/// points genuinely multimodal.
struct RegimeSpec {
  std::string label;
  double base_freq_hz = 0.5;
  double amplitude = 1.0;
  double noise_std = 0.1;
  int branching = 1;
};

struct SynthConfig {
  int n_subjects = 8;
  int trials_per_subject = 3;
  int n_channels = 4;
  std::vector<RegimeSpec> regimes;
  int segments_per_regime = 2;  // visits of each regime per trial
  Index seg_len_min = 120;
  Index seg_len_max = 160;
  double sample_rate_hz = 10.0;
  std::uint64_t seed = 0;
};

/// n regimes with spread-out base frequencies; regime 0 carries the branching
/// factor when branch_factor > 1.
std::vector<RegimeSpec> default_regimes(int n_regimes, double noise_std,
                                        int branch_factor);

void validate(const SynthConfig& cfg);

/// Deterministic function of the config (seed included). Every trial visits
/// every regime `segments_per_regime` times in shuffled order; frames carry
/// the regime label.
std::vector<Trajectory> synthesize_corpus(const SynthConfig& cfg);

/// Noise-free canonical window ending exactly at a branch point, plus the k
/// noise-free continuations the generator can follow from there.
struct BranchProbe {
  Mat past;                   // n_channels x t_past
  std::vector<Mat> branches;  // k continuations, each n_channels x t_future
  double noise_std = 0;
};
BranchProbe branch_probe(const SynthConfig& cfg, int regime_index,
                         Index t_past, Index t_future);

/// Write one CSV per trial plus a manifest.json listing the files and the
/// generating config. Refuses an existing directory unless force is set.
void write_corpus(const std::filesystem::path& dir,
                  const std::vector<Trajectory>& corpus,
                  const std::optional<SynthConfig>& cfg, bool force);

/// Load a corpus from a manifest.json path or a directory containing one.
std::vector<Trajectory> load_corpus(const std::filesystem::path& where);

}  // namespace kinseq
