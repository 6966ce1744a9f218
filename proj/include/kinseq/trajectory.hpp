#pragma once

#include <string>
#include <vector>

#include "kinseq/rng.hpp"
#include "kinseq/types.hpp"

namespace kinseq {

/// Std values below this are clamped so constant channels stay divisible.
inline constexpr double kStdFloor = 1e-8;

/// One recorded trial. Channels are rows, frames are columns.
struct Trajectory {
  Mat frames;                       // n_x x T
  double sample_rate_hz = 10.0;
  std::vector<std::string> labels;  // per-frame activity labels; empty if unlabeled
  std::string subject_id;
  std::string trial_id;

  Index channels() const { return frames.rows(); }
  Index length() const { return frames.cols(); }
  bool labeled() const { return !labels.empty(); }
};

struct WindowSource {
  std::string subject_id;
  std::string trial_id;
  Index start_index = 0;
};

/// Contiguous (past, future) pair: future begins at start_index + T_p.
struct WindowPair {
  Mat past;    // n_x x T_p
  Mat future;  // n_x x T_f
  WindowSource source;
};

struct ChannelStats {
  Vec mean;
  Vec stddev;  // strictly positive, floored at kStdFloor
};

/// Half-open frame interval [start, start + length).
struct Span {
  Index start = 0;
  Index length = 0;
  Index end() const { return start + length; }
};

/// Maximal run of frames sharing one activity label.
struct Segment {
  std::string label;
  Span span;
};

/// A past window together with its position in the source trajectory.
struct IndexedWindow {
  Mat frames;  // n_x x T_p
  Span span;
};

/// Per-channel mean and population standard deviation over every frame of
/// every trajectory. Throws DataError on an empty corpus or fewer than two
/// total frames, ShapeError on mixed channel counts.
ChannelStats compute_stats(const std::vector<Trajectory>& corpus);

Trajectory standardize(const Trajectory& t, const ChannelStats& s);
Trajectory unstandardize(const Trajectory& t, const ChannelStats& s);
std::vector<Trajectory> standardize_all(std::vector<Trajectory> corpus,
                                        const ChannelStats& s);

/// Uniformly random contiguous window pair. Throws DataError when the
/// trajectory is shorter than t_past + t_future.
WindowPair sample_window_pair(const Trajectory& t, Index t_past,
                              Index t_future, Rng& rng);

/// All windows of length t_past starting at range.start, range.start+stride,
/// ... that fit inside the range. Throws DataError when the range is shorter
/// than t_past, ShapeError when the range leaves the trajectory.
std::vector<IndexedWindow> enumerate_windows(const Trajectory& t, Span range,
                                             Index t_past, Index stride);

/// Label runs of a labeled trajectory, in frame order.
std::vector<Segment> label_segments(const Trajectory& t);

}  // namespace kinseq
