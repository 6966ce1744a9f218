#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kinseq/trajectory.hpp"

namespace kinseq {

/// Read a trial CSV: header `ch_0,...,ch_{n-1}[,label]`, one frame per row,
/// '.' decimal separator. When `schema` is non-empty the header's channel
/// names must match it exactly. Throws DataError naming the offending data
/// row on malformed input, and on empty files.
Trajectory load_csv(const std::filesystem::path& path,
                    const std::vector<std::string>& schema = {});

/// Write a trajectory in the same format, full double precision.
void save_csv(const std::filesystem::path& path, const Trajectory& t);

/// Stats file: JSON object with `mean` and `std` arrays.
void save_stats(const std::filesystem::path& path, const ChannelStats& s);
ChannelStats load_stats(const std::filesystem::path& path);

}  // namespace kinseq
