#include "kinseq/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace kinseq {

std::vector<Encoding> encode_segment(const Model& m, const Trajectory& t,
                                     Span span, Index stride) {
  const auto windows = enumerate_windows(t, span, m.config.t_past, stride);
  std::vector<Encoding> out;
  out.reserve(windows.size());
  for (const auto& w : windows)
    out.push_back(encode(
        m, w.frames,
        EncodingSpan{t.subject_id, t.trial_id, w.span.start, w.span.length}));
  return out;
}

double cosine(const Vec& a, const Vec& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return a.dot(b) / (na * nb);
}

FrameScores frame_scores(const std::vector<Encoding>& query,
                         const std::vector<Encoding>& target,
                         Index target_len) {
  if (query.empty()) throw ContractError("frame_scores: no query encodings");
  FrameScores out;
  out.scores = Vec::Constant(target_len, kUncovered);
  for (const auto& w : target) {
    if (w.span.start < 0 || w.span.start + w.span.length > target_len)
      throw ShapeError("frame_scores: window span outside target");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& q : query) best = std::max(best, cosine(q.e, w.e));
    for (Index f = w.span.start; f < w.span.start + w.span.length; ++f)
      out.scores[f] = std::max(out.scores[f], best);
  }
  return out;
}

RetrievalResult threshold_retrieve(const FrameScores& s, double tau) {
  RetrievalResult out;
  out.tau = tau;
  out.mask.resize(static_cast<std::size_t>(s.scores.size()));
  for (Index f = 0; f < s.scores.size(); ++f)
    out.mask[static_cast<std::size_t>(f)] = s.scores[f] >= tau ? 1 : 0;
  return out;
}

Metrics prf1(const std::vector<char>& mask, const std::vector<char>& labels) {
  if (mask.size() != labels.size())
    throw ShapeError("prf1: mask has " + std::to_string(mask.size()) +
                     " frames, labels " + std::to_string(labels.size()));
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] && labels[i]) ++tp;
    else if (mask[i]) ++fp;
    else if (labels[i]) ++fn;
  }
  Metrics m;
  m.precision = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
  m.recall = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall > 0)
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

RetrievalIndex::RetrievalIndex(const Model& m,
                               const std::vector<Trajectory>& corpus,
                               std::string activity, Index stride,
                               bool allow_self_target,
                               const std::string& source_filter)
    : activity_(std::move(activity)),
      stride_(stride),
      allow_self_(allow_self_target) {
  if (stride_ < 1) throw ContractError("retrieval: stride must be >= 1");

  // target-side encodings over each full trial
  std::vector<std::vector<Encoding>> trial_encodings;
  std::set<std::string> with_activity;
  for (const auto& t : corpus) {
    if (!t.labeled())
      throw ContractError("retrieval: trajectory " + t.subject_id + "/" +
                          t.trial_id + " has no labels");
    TrialTruth tt;
    tt.subject = t.subject_id;
    tt.trial = t.trial_id;
    tt.truth.resize(static_cast<std::size_t>(t.length()));
    for (Index f = 0; f < t.length(); ++f)
      tt.truth[static_cast<std::size_t>(f)] =
          t.labels[static_cast<std::size_t>(f)] == activity_ ? 1 : 0;
    trials_.push_back(std::move(tt));
    trial_encodings.push_back(
        t.length() >= m.config.t_past
            ? encode_segment(m, t, Span{0, t.length()}, stride_)
            : std::vector<Encoding>{});

    if (std::find(subjects_.begin(), subjects_.end(), t.subject_id) ==
        subjects_.end())
      subjects_.push_back(t.subject_id);
  }
  std::sort(subjects_.begin(), subjects_.end());

  // query segments: every run of the activity long enough for one window
  for (const auto& t : corpus) {
    for (const auto& seg : label_segments(t)) {
      if (seg.label != activity_) continue;
      with_activity.insert(t.subject_id);
      if (!source_filter.empty() && t.subject_id != source_filter) continue;
      if (seg.span.length < m.config.t_past) continue;
      QuerySegment q;
      q.subject = t.subject_id;
      q.span = seg.span;
      const auto query_encs = encode_segment(m, t, seg.span, stride_);
      q.scores.reserve(trials_.size());
      for (std::size_t j = 0; j < trials_.size(); ++j) {
        const Index len =
            static_cast<Index>(trials_[j].truth.size());
        q.scores.push_back(
            frame_scores(query_encs, trial_encodings[j], len));
      }
      queries_.push_back(std::move(q));
    }
  }

  if (!allow_self_ && with_activity.size() < 2)
    throw ContractError("retrieval: activity '" + activity_ +
                        "' present for fewer than two subjects");
  if (with_activity.empty())
    throw ContractError("retrieval: activity '" + activity_ +
                        "' absent from the corpus");
  if (queries_.empty())
    throw ContractError("retrieval: no activity segment is long enough to "
                        "form a query window");
}

std::vector<RetrievalIndex::TrialScores> RetrievalIndex::combined_scores(
    const std::string& source) const {
  std::vector<TrialScores> out;
  for (std::size_t j = 0; j < trials_.size(); ++j) {
    TrialScores ts;
    ts.subject = trials_[j].subject;
    ts.trial = trials_[j].trial;
    ts.scores = Vec::Constant(
        static_cast<Index>(trials_[j].truth.size()), kUncovered);
    bool any = false;
    for (const auto& q : queries_) {
      if (q.subject != source) continue;
      any = true;
      ts.scores = ts.scores.cwiseMax(q.scores[j].scores);
    }
    if (any) out.push_back(std::move(ts));
  }
  return out;
}

EvalReport RetrievalIndex::evaluate(double tau) const {
  EvalReport report;
  report.activity = activity_;
  report.tau = tau;
  report.stride = stride_;

  for (const auto& source : subjects_) {
    std::vector<const QuerySegment*> segs;
    for (const auto& q : queries_)
      if (q.subject == source) segs.push_back(&q);
    if (segs.empty()) continue;

    Metrics source_sum;
    Index n_targets = 0;
    for (const auto& target : subjects_) {
      if (target == source && !allow_self_) continue;
      // pool the target's frames across its trials, per query segment
      Metrics seg_sum;
      for (const auto* q : segs) {
        std::vector<char> mask, truth;
        for (std::size_t j = 0; j < trials_.size(); ++j) {
          if (trials_[j].subject != target) continue;
          const auto& scores = q->scores[j];
          for (Index f = 0; f < scores.scores.size(); ++f)
            mask.push_back(scores.scores[f] >= tau ? 1 : 0);
          truth.insert(truth.end(), trials_[j].truth.begin(),
                       trials_[j].truth.end());
        }
        const Metrics pm = prf1(mask, truth);
        seg_sum.precision += pm.precision;
        seg_sum.recall += pm.recall;
        seg_sum.f1 += pm.f1;
      }
      const double inv = 1.0 / static_cast<double>(segs.size());
      Metrics pair{seg_sum.precision * inv, seg_sum.recall * inv,
                   seg_sum.f1 * inv};
      report.pairs.push_back({source, target, pair});
      source_sum.precision += pair.precision;
      source_sum.recall += pair.recall;
      source_sum.f1 += pair.f1;
      ++n_targets;
    }
    if (n_targets == 0) continue;
    const double inv = 1.0 / static_cast<double>(n_targets);
    report.per_source.push_back(
        {source, Metrics{source_sum.precision * inv, source_sum.recall * inv,
                         source_sum.f1 * inv}});
  }

  const auto n = static_cast<double>(report.per_source.size());
  if (n > 0) {
    for (const auto& s : report.per_source) {
      report.mean.precision += s.metrics.precision / n;
      report.mean.recall += s.metrics.recall / n;
      report.mean.f1 += s.metrics.f1 / n;
    }
    if (n > 1) {
      double vp = 0, vr = 0, vf = 0;
      for (const auto& s : report.per_source) {
        vp += std::pow(s.metrics.precision - report.mean.precision, 2);
        vr += std::pow(s.metrics.recall - report.mean.recall, 2);
        vf += std::pow(s.metrics.f1 - report.mean.f1, 2);
      }
      report.stddev = {std::sqrt(vp / (n - 1)), std::sqrt(vr / (n - 1)),
                       std::sqrt(vf / (n - 1))};
    }
  }
  return report;
}

std::vector<SweepPoint> RetrievalIndex::sweep(double lo, double hi,
                                              double step) const {
  if (step <= 0) throw ContractError("sweep: step must be positive");
  std::vector<SweepPoint> out;
  for (Index i = 0;; ++i) {
    const double tau = lo + step * static_cast<double>(i);
    if (tau > hi + 1e-12) break;
    out.push_back({tau, evaluate(tau).mean});
  }
  return out;
}

EvalReport cross_subject_eval(const Model& m,
                              const std::vector<Trajectory>& corpus,
                              const std::string& activity, double tau,
                              Index stride) {
  return RetrievalIndex(m, corpus, activity, stride).evaluate(tau);
}

}  // namespace kinseq
