#pragma once

#include <filesystem>
#include <string>

#include "kinseq/adam.hpp"
#include "kinseq/model.hpp"
#include "kinseq/trajectory.hpp"

namespace kinseq {

/// Single-file model container: a fixed magic and version, a JSON header
/// describing named tensors, then raw little-endian float64 payload. Byte
/// layout is documented in the README; save -> load -> save is byte
/// identical.
struct Checkpoint {
  Model model;
  ChannelStats stats;
  bool has_optimizer = false;
  AdamState adam;          // meaningful when has_optimizer
  std::uint64_t step = 0;
  std::string rng_state;   // serialized training stream; empty when absent
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kinseq
