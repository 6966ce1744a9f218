#include "kinseq/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace kinseq {

namespace {

constexpr std::uint64_t kEvalSeedSalt = 0x9e3779b97f4a7c15ull;

/// Uniform over every valid window in a corpus: pick a trajectory with
/// probability proportional to its number of valid starts, then a uniform
/// start within it.
class WindowSampler {
 public:
  WindowSampler(const std::vector<const Trajectory*>& trajs, Index t_past,
                Index t_future)
      : trajs_(trajs), t_past_(t_past), t_future_(t_future) {
    double total = 0;
    for (const auto* t : trajs_) {
      const Index starts = t->length() - (t_past + t_future) + 1;
      if (starts < 1)
        throw DataError("trajectory " + t->subject_id + "/" + t->trial_id +
                        " has " + std::to_string(t->length()) +
                        " frames, needs " +
                        std::to_string(t_past + t_future));
      total += static_cast<double>(starts);
      cum_.push_back(total);
    }
  }

  WindowPair draw(Rng& rng) {
    const double pos = rng.uniform() * cum_.back();
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), pos);
    const auto idx = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(it - cum_.begin(),
                                 static_cast<std::ptrdiff_t>(cum_.size()) - 1));
    return sample_window_pair(*trajs_[idx], t_past_, t_future_, rng);
  }

 private:
  std::vector<const Trajectory*> trajs_;
  std::vector<double> cum_;
  Index t_past_, t_future_;
};

std::vector<const Trajectory*> select(
    const std::vector<Trajectory>& corpus,
    const std::vector<std::string>& heldout, bool want_heldout) {
  std::vector<const Trajectory*> out;
  for (const auto& t : corpus) {
    const bool is_held =
        std::find(heldout.begin(), heldout.end(), t.subject_id) !=
        heldout.end();
    if (is_held == want_heldout) out.push_back(&t);
  }
  return out;
}

}  // namespace

void save_report_csv(const std::filesystem::path& path,
                     const TrainReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("report: cannot write " + path.string());
  out << "step,train_nll,heldout_nll,grad_norm,ms_per_step\n";
  std::size_t e = 0;
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& s : report.steps) {
    out << s.step << "," << num(s.train_loss) << ",";
    if (e < report.evals.size() && report.evals[e].step == s.step) {
      out << num(report.evals[e].heldout_nll);
      ++e;
    }
    out << "," << num(s.grad_norm) << ",";
    std::snprintf(buf, sizeof buf, "%.3f", s.ms);
    out << buf << "\n";
  }
}

TrainState train_init(const ModelConfig& model_cfg, const TrainConfig& cfg) {
  TrainState state{model_init(model_cfg),
                   AdamState{},
                   Rng(cfg.seed),
                   0};
  state.adam = adam_init(state.model, cfg.learning_rate);
  return state;
}

TrainReport train(TrainState& state, const std::vector<Trajectory>& corpus,
                  const TrainConfig& cfg, const TrainHook& on_eval) {
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (cfg.learning_rate <= 0) throw ConfigError("train: learning_rate <= 0");
  if (cfg.clip_norm <= 0) throw ConfigError("train: clip_norm <= 0");

  const auto& mc = state.model.config;
  const auto training = select(corpus, cfg.heldout_subjects, false);
  const auto heldout = select(corpus, cfg.heldout_subjects, true);
  if (training.empty())
    throw DataError("train: no training trajectories after the held-out split");

  WindowSampler sampler(training, mc.t_past, mc.t_future);
  const bool have_heldout = !heldout.empty();

  TrainReport report;
  std::vector<Trajectory> heldout_copy;
  for (const auto* t : heldout) heldout_copy.push_back(*t);

  auto run_eval = [&](std::uint64_t step) {
    if (have_heldout) {
      Rng eval_rng(cfg.seed ^ kEvalSeedSalt);
      report.evals.push_back(
          {step, heldout_nll(state.model, heldout_copy, cfg.eval_windows,
                             eval_rng)});
    }
    if (on_eval) on_eval(state, report);
  };

  using clock = std::chrono::steady_clock;
  for (std::uint64_t k = state.step + 1; k <= cfg.steps; ++k) {
    const auto t0 = clock::now();
    std::vector<WindowPair> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (Index b = 0; b < cfg.batch_size; ++b)
      batch.push_back(sampler.draw(state.rng));

    auto lg = loss_and_grads(state.model, batch);
    const double norm = global_norm(lg.grads);
    if (norm > cfg.clip_norm) scale_params(lg.grads, cfg.clip_norm / norm);
    adam_step(state.adam, state.model, lg.grads);
    state.step = k;

    const double ms =
        std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    report.steps.push_back(
        {k, lg.loss, std::min(norm, cfg.clip_norm), ms});

    const bool at_eval = cfg.eval_every > 0 && k % cfg.eval_every == 0;
    if (at_eval || k == cfg.steps) run_eval(k);
  }
  return report;
}

double heldout_nll(const Model& m, const std::vector<Trajectory>& heldout,
                   Index n_windows, Rng& rng) {
  if (heldout.empty()) throw DataError("heldout_nll: no trajectories");
  if (n_windows < 1) throw ContractError("heldout_nll: n_windows must be >= 1");
  std::vector<const Trajectory*> ptrs;
  for (const auto& t : heldout) ptrs.push_back(&t);
  WindowSampler sampler(ptrs, m.config.t_past, m.config.t_future);
  std::vector<WindowPair> windows;
  windows.reserve(static_cast<std::size_t>(n_windows));
  for (Index i = 0; i < n_windows; ++i) windows.push_back(sampler.draw(rng));
  return batch_loss(m, windows);
}

GradCheckReport grad_check(const ModelConfig& cfg, int trials, Rng& rng) {
  constexpr double kEps = 1e-5;
  GradCheckReport rep;
  for (int trial = 0; trial < trials; ++trial) {
    ModelConfig c = cfg;
    c.seed = rng.index(std::numeric_limits<std::uint64_t>::max());
    Model model = model_init(c);

    WindowPair wp;
    wp.past.resize(c.n_x, c.t_past);
    wp.future.resize(c.n_x, c.t_future);
    for (Index t = 0; t < c.t_past; ++t)
      for (Index k = 0; k < c.n_x; ++k) wp.past(k, t) = rng.normal();
    for (Index t = 0; t < c.t_future; ++t)
      for (Index k = 0; k < c.n_x; ++k) wp.future(k, t) = rng.normal();
    const std::vector<WindowPair> batch{wp};

    const auto lg = loss_and_grads(model, batch);
    const auto analytic = tensor_views(lg.grads);
    auto params = tensor_views(model);
    for (std::size_t i = 0; i < params.size(); ++i) {
      double worst = rep.max_rel_by_tensor.count(params[i].name)
                         ? rep.max_rel_by_tensor[params[i].name]
                         : 0.0;
      for (Index j = 0; j < params[i].size(); ++j) {
        double* p = params[i].data + j;
        const double orig = *p;
        *p = orig + kEps;
        const double lp = batch_loss(model, batch);
        *p = orig - kEps;
        const double lm = batch_loss(model, batch);
        *p = orig;
        const double fd = (lp - lm) / (2.0 * kEps);
        const double a = analytic[i].data[j];
        const double rel = std::abs(a - fd) /
                           std::max({1.0, std::abs(a), std::abs(fd)});
        worst = std::max(worst, rel);
      }
      rep.max_rel_by_tensor[params[i].name] = worst;
      rep.max_rel = std::max(rep.max_rel, worst);
    }
  }
  return rep;
}

}  // namespace kinseq
