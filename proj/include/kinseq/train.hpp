#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kinseq/adam.hpp"
#include "kinseq/model.hpp"
#include "kinseq/trajectory.hpp"

namespace kinseq {

struct TrainConfig {
  std::uint64_t steps = 5000;
  Index batch_size = 50;
  double learning_rate = 0.005;
  double clip_norm = 10.0;
  std::uint64_t eval_every = 100;
  Index eval_windows = 500;
  std::uint64_t seed = 0;
  std::vector<std::string> heldout_subjects;
};

struct StepLog {
  std::uint64_t step = 0;
  double train_loss = 0;
  double grad_norm = 0;  // post-clip global norm
  double ms = 0;
};

struct EvalLog {
  std::uint64_t step = 0;
  double heldout_nll = 0;
};

struct TrainReport {
  std::vector<StepLog> steps;
  std::vector<EvalLog> evals;
};

/// CSV columns: step, train_nll, heldout_nll (blank off eval steps),
/// grad_norm, ms_per_step.
void save_report_csv(const std::filesystem::path& path,
                     const TrainReport& report);

/// Everything that evolves during training; checkpointable mid-run.
struct TrainState {
  Model model;
  AdamState adam;
  Rng rng;
  std::uint64_t step = 0;
};

TrainState train_init(const ModelConfig& model_cfg, const TrainConfig& cfg);

/// Called at held-out evaluation points and at completion, e.g. to write
/// checkpoints.
using TrainHook = std::function<void(const TrainState&, const TrainReport&)>;

/// Minibatch training: each step draws batch_size window pairs (trajectory
/// chosen proportional to its valid start count, then a uniform start),
/// computes mean loss and gradients, clips the global gradient norm, and
/// applies one Adam step. Deterministic given the state's rng. The corpus
/// must already be standardized; subjects listed in cfg.heldout_subjects are
/// excluded from sampling and used for the held-out NLL trace.
TrainReport train(TrainState& state, const std::vector<Trajectory>& corpus,
                  const TrainConfig& cfg, const TrainHook& on_eval = {});

/// Mean per-window loss over n_windows pairs drawn with the supplied stream.
/// Callers freeze the stream seed to make evaluations comparable.
double heldout_nll(const Model& m, const std::vector<Trajectory>& heldout,
                   Index n_windows, Rng& rng);

/// Compare loss_and_grads against central finite differences (eps 1e-5) on
/// random window pairs. Relative error uses max(|a|, |n|, 1) in the
/// denominator.
struct GradCheckReport {
  std::map<std::string, double> max_rel_by_tensor;
  double max_rel = 0;
};
GradCheckReport grad_check(const ModelConfig& cfg, int trials, Rng& rng);

}  // namespace kinseq
