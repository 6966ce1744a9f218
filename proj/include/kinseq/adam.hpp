#pragma once

#include <cstdint>
#include <span>

#include "kinseq/model.hpp"

namespace kinseq {

/// Adam with bias correction. First and second moment estimates mirror the
/// parameter structure.
struct AdamState {
  Model m;
  Model u;
  std::uint64_t t = 0;
  double learning_rate = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState adam_init(const Model& like, double learning_rate = 0.005);

/// One update on a flat tensor; exposed so the rule is testable in isolation.
/// t is the 1-based step count after this update.
void adam_update(std::span<double> theta, std::span<const double> grad,
                 std::span<double> m, std::span<double> u, std::uint64_t t,
                 double lr, double beta1, double beta2, double eps);

/// Apply one Adam step to every parameter tensor. A non-finite gradient
/// raises NumericError before anything is touched; params and state are then
/// unchanged.
void adam_step(AdamState& state, Model& params, const Model& grads);

}  // namespace kinseq
