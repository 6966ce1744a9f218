#include "kinseq/adam.hpp"

#include <cmath>

namespace kinseq {

AdamState adam_init(const Model& like, double learning_rate) {
  AdamState s;
  s.m = zeros_like(like);
  s.u = zeros_like(like);
  s.t = 0;
  s.learning_rate = learning_rate;
  return s;
}

void adam_update(std::span<double> theta, std::span<const double> grad,
                 std::span<double> m, std::span<double> u, std::uint64_t t,
                 double lr, double beta1, double beta2, double eps) {
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    u[i] = beta2 * u[i] + (1.0 - beta2) * g * g;
    const double m_hat = m[i] / c1;
    const double u_hat = u[i] / c2;
    theta[i] -= lr * m_hat / (std::sqrt(u_hat) + eps);
  }
}

void adam_step(AdamState& state, Model& params, const Model& grads) {
  const auto gv = tensor_views(grads);
  for (const auto& g : gv)
    if (!Eigen::Map<const Vec>(g.data, g.size()).allFinite())
      throw NumericError("adam_step: non-finite gradient in " + g.name);

  auto pv = tensor_views(params);
  auto mv = tensor_views(state.m);
  auto uv = tensor_views(state.u);
  if (pv.size() != gv.size() || pv.size() != mv.size())
    throw ShapeError("adam_step: mismatched parameter structure");

  state.t += 1;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const auto n = static_cast<std::size_t>(pv[i].size());
    adam_update({pv[i].data, n}, {gv[i].data, n}, {mv[i].data, n},
                {uv[i].data, n}, state.t, state.learning_rate, state.beta1,
                state.beta2, state.epsilon);
  }
}

}  // namespace kinseq
