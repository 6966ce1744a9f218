#pragma once

#include <limits>
#include <string>
#include <vector>

#include "kinseq/model.hpp"
#include "kinseq/trajectory.hpp"

namespace kinseq {

/// Encode every window of length t_past inside the span, starting at
/// span.start and advancing by stride.
std::vector<Encoding> encode_segment(const Model& m, const Trajectory& t,
                                     Span span, Index stride = 1);

/// a.b / (|a| |b|); zero when either norm is below 1e-12.
double cosine(const Vec& a, const Vec& b);

/// Sentinel score for frames no window covers; below any threshold.
inline constexpr double kUncovered = -std::numeric_limits<double>::infinity();

/// Per-frame scores over one target trajectory. A window's score is its best
/// cosine against the query encodings; a frame's score is the best score of
/// any window covering it.
struct FrameScores {
  Vec scores;
  bool covered(Index f) const { return std::isfinite(scores[f]); }
};
FrameScores frame_scores(const std::vector<Encoding>& query,
                         const std::vector<Encoding>& target,
                         Index target_len);

struct RetrievalResult {
  std::vector<char> mask;  // 1 = retrieved
  double tau = 0;
  std::string query_subject;
  std::string query_activity;
  Span query_span;
};

/// mask[f] = scores[f] >= tau; uncovered frames are never retrieved.
RetrievalResult threshold_retrieve(const FrameScores& s, double tau);

struct Metrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Confusion-count metrics with the usual zero conventions: precision is 0
/// with no predicted positives, recall is 0 with no true positives, f1 is 0
/// when precision + recall is 0.
Metrics prf1(const std::vector<char>& mask, const std::vector<char>& labels);

struct PairMetrics {
  std::string source;
  std::string target;
  Metrics metrics;
};

struct SourceMetrics {
  std::string subject;
  Metrics metrics;
};

struct EvalReport {
  std::string activity;
  double tau = 0;
  Index stride = 1;
  std::vector<PairMetrics> pairs;
  std::vector<SourceMetrics> per_source;
  Metrics mean;
  Metrics stddev;  // sample std across sources
};

struct SweepPoint {
  double tau = 0;
  Metrics mean;
};

/// Precomputed encodings and frame scores for a corpus, reusable across
/// thresholds. Sources are the subjects owning at least one query-usable
/// segment of the activity (restrictable to one subject); targets are every
/// listed subject other than the source, or including it when
/// allow_self_target is set.
class RetrievalIndex {
 public:
  RetrievalIndex(const Model& m, const std::vector<Trajectory>& corpus,
                 std::string activity, Index stride = 1,
                 bool allow_self_target = false,
                 const std::string& source_filter = "");

  /// Metrics at one threshold. Per (source, target): metrics of each query
  /// segment against the target's frames pooled over its trials, averaged
  /// over segments; then averaged over targets per source; mean and sample
  /// std reported across sources.
  EvalReport evaluate(double tau) const;

  std::vector<SweepPoint> sweep(double lo, double hi, double step) const;

  /// Per-trial frame scores combined over the source's query segments by
  /// max; drives mask exports.
  struct TrialScores {
    std::string subject;
    std::string trial;
    Vec scores;
  };
  std::vector<TrialScores> combined_scores(const std::string& source) const;

  const std::vector<std::string>& subjects() const { return subjects_; }

 private:
  struct TrialTruth {
    std::string subject;
    std::string trial;
    std::vector<char> truth;
  };
  struct QuerySegment {
    std::string subject;
    Span span;
    // frame scores per corpus trial, aligned with trials_
    std::vector<FrameScores> scores;
  };

  std::string activity_;
  Index stride_ = 1;
  bool allow_self_ = false;
  std::vector<std::string> subjects_;
  std::vector<TrialTruth> trials_;
  std::vector<QuerySegment> queries_;
};

/// One-shot evaluation at a fixed threshold.
EvalReport cross_subject_eval(const Model& m,
                              const std::vector<Trajectory>& corpus,
                              const std::string& activity, double tau,
                              Index stride = 1);

}  // namespace kinseq
