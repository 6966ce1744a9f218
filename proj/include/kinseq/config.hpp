#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "kinseq/model.hpp"
#include "kinseq/synth.hpp"
#include "kinseq/train.hpp"

namespace kinseq {

/// Aggregated run settings, parsed from a `key = value` file with
/// command-line overrides applied on top. Unknown keys are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  // synthetic corpus knobs; resolved into a SynthConfig by synth()
  int synth_subjects = 8;
  int synth_trials = 3;
  int synth_channels = 4;
  int synth_regimes = 4;
  int synth_branch_factor = 2;
  int synth_segments_per_regime = 2;
  double synth_noise = 0.15;
  double synth_rate = 10.0;
  Index synth_seg_min = 120;
  Index synth_seg_max = 160;

  // retrieval
  Index stride = 1;
  std::optional<double> threshold;  // absent -> sweep on val_subjects
  std::string activity;
  std::vector<std::string> val_subjects;

  // io
  std::string data;
  std::string out;

  SynthConfig synth() const;
};

/// Apply one `key = value` setting. Throws ConfigError naming the key when
/// it is unknown or its value does not parse.
void apply_key(RunConfig& cfg, const std::string& key,
               const std::string& value);

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace kinseq
