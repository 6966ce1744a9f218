#include "kinseq/trajectory.hpp"

#include <cmath>
#include <string>

namespace kinseq {

ChannelStats compute_stats(const std::vector<Trajectory>& corpus) {
  if (corpus.empty()) throw DataError("compute_stats: empty corpus");
  const Index n = corpus.front().channels();
  Index total = 0;
  for (const auto& t : corpus) {
    if (t.channels() != n)
      throw ShapeError("compute_stats: mixed channel counts (" +
                       std::to_string(t.channels()) + " vs " +
                       std::to_string(n) + ")");
    total += t.length();
  }
  if (total < 2) throw DataError("compute_stats: fewer than two frames");

  Vec sum = Vec::Zero(n);
  for (const auto& t : corpus) sum += t.frames.rowwise().sum();
  const Vec mean = sum / static_cast<double>(total);

  Vec sq = Vec::Zero(n);
  for (const auto& t : corpus)
    sq += (t.frames.colwise() - mean).array().square().matrix().rowwise().sum();
  Vec stddev = (sq / static_cast<double>(total)).cwiseSqrt();
  stddev = stddev.cwiseMax(kStdFloor);
  return {mean, stddev};
}

namespace {

void check_dims(const Trajectory& t, const ChannelStats& s, const char* op) {
  if (s.mean.size() != t.channels() || s.stddev.size() != t.channels())
    throw ShapeError(std::string(op) + ": stats have " +
                     std::to_string(s.mean.size()) + " channels, trajectory " +
                     std::to_string(t.channels()));
}

}  // namespace

Trajectory standardize(const Trajectory& t, const ChannelStats& s) {
  check_dims(t, s, "standardize");
  Trajectory out = t;
  out.frames = (t.frames.colwise() - s.mean).array().colwise() /
               s.stddev.array();
  return out;
}

Trajectory unstandardize(const Trajectory& t, const ChannelStats& s) {
  check_dims(t, s, "unstandardize");
  Trajectory out = t;
  out.frames =
      (t.frames.array().colwise() * s.stddev.array()).matrix().colwise() +
      s.mean;
  return out;
}

std::vector<Trajectory> standardize_all(std::vector<Trajectory> corpus,
                                        const ChannelStats& s) {
  for (auto& t : corpus) t = standardize(t, s);
  return corpus;
}

WindowPair sample_window_pair(const Trajectory& t, Index t_past,
                              Index t_future, Rng& rng) {
  if (t_past < 1 || t_future < 1)
    throw ContractError("sample_window_pair: window lengths must be >= 1");
  const Index window = t_past + t_future;
  if (t.length() < window)
    throw DataError("sample_window_pair: trajectory " + t.subject_id + "/" +
                    t.trial_id + " has " + std::to_string(t.length()) +
                    " frames, needs " + std::to_string(window));
  const Index n_starts = t.length() - window + 1;
  const Index start =
      static_cast<Index>(rng.index(static_cast<std::uint64_t>(n_starts)));
  WindowPair wp;
  wp.past = t.frames.middleCols(start, t_past);
  wp.future = t.frames.middleCols(start + t_past, t_future);
  wp.source = {t.subject_id, t.trial_id, start};
  return wp;
}

std::vector<IndexedWindow> enumerate_windows(const Trajectory& t, Span range,
                                             Index t_past, Index stride) {
  if (stride < 1) throw ContractError("enumerate_windows: stride must be >= 1");
  if (range.start < 0 || range.end() > t.length())
    throw ShapeError("enumerate_windows: range [" +
                     std::to_string(range.start) + ", " +
                     std::to_string(range.end()) + ") outside trajectory of " +
                     std::to_string(t.length()) + " frames");
  if (range.length < t_past)
    throw DataError("enumerate_windows: range of " +
                    std::to_string(range.length) + " frames is shorter than " +
                    std::to_string(t_past));
  std::vector<IndexedWindow> out;
  for (Index s = range.start; s + t_past <= range.end(); s += stride)
    out.push_back({t.frames.middleCols(s, t_past), Span{s, t_past}});
  return out;
}

std::vector<Segment> label_segments(const Trajectory& t) {
  std::vector<Segment> out;
  if (!t.labeled()) return out;
  Index start = 0;
  for (Index i = 1; i <= t.length(); ++i) {
    if (i == t.length() || t.labels[static_cast<std::size_t>(i)] !=
                               t.labels[static_cast<std::size_t>(start)]) {
      out.push_back(
          {t.labels[static_cast<std::size_t>(start)], Span{start, i - start}});
      start = i;
    }
  }
  return out;
}

}  // namespace kinseq
