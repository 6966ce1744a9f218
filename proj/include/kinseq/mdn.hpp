#pragma once

#include <utility>
#include <vector>

#include "kinseq/rng.hpp"
#include "kinseq/types.hpp"

namespace kinseq {

/// Added to every softplus output so component variances stay bounded away
/// from zero and the likelihood cannot blow up on collapsed components.
inline constexpr double kVarianceFloor = 1e-6;

/// Linear maps from a decoder hidden state to mixture parameters: one weight
/// row block for the mixture logits and per-component blocks for means and
/// pre-softplus variances.
struct MdnParams {
  Mat w_pi;               // n_c x n_h
  Vec b_pi;               // n_c
  std::vector<Mat> w_mu;  // n_c of n_x x n_h
  std::vector<Vec> b_mu;  // n_c of n_x
  std::vector<Mat> w_v;   // n_c of n_x x n_h
  std::vector<Vec> b_v;   // n_c of n_x

  Index components() const { return w_pi.rows(); }
  Index hidden() const { return w_pi.cols(); }
  Index output() const { return w_mu.empty() ? 0 : w_mu.front().rows(); }
};

/// One diagonal-covariance Gaussian mixture: weights positive and summing to
/// one, variances at or above kVarianceFloor.
struct MixtureParams {
  Vec pi;
  std::vector<Vec> mu;
  std::vector<Vec> v;

  Index components() const { return pi.size(); }
};

struct MdnCache {
  MixtureParams mix;
  std::vector<Vec> pre_v;  // softplus inputs, one per component
};

MdnParams mdn_zeros(Index n_c, Index n_h, Index n_x);

/// Mixture parameters for one hidden state. The softmax subtracts its max
/// and clamps shifted logits at -700 so every weight stays strictly positive
/// for arbitrary finite inputs.
std::pair<MixtureParams, MdnCache> mdn_forward(const MdnParams& p,
                                               const Vec& h);

/// Negative log density of x under the mixture, in nats, evaluated via
/// log-sum-exp over per-component log densities.
double mixture_nll(const MixtureParams& m, const Vec& x);

/// NLL plus its gradients at the distribution level: with respect to the
/// pre-softmax mixture logits, the means, and the variances.
struct MixtureNllGrad {
  double nll = 0;
  Vec d_pi_logits;
  std::vector<Vec> d_mu;
  std::vector<Vec> d_v;
};
MixtureNllGrad mixture_nll_grad(const MixtureParams& m, const Vec& x);

/// NLL of x under mdn_forward(p, h) plus exact gradients for the head
/// parameters and the hidden state.
struct MdnBackward {
  double nll = 0;
  MdnParams grads;
  Vec dh;
};
MdnBackward mdn_backward(const MdnParams& p, const Vec& h, const Vec& x,
                         const MdnCache& cache);

/// Draw a component from pi, then a sample from its diagonal Gaussian.
Vec mdn_sample(const MixtureParams& m, Rng& rng);

/// Unimodal baseline head: x_hat = W h + b trained with sum-of-squares.
struct MseParams {
  Mat w;  // n_x x n_h
  Vec b;  // n_x

  Index hidden() const { return w.cols(); }
  Index output() const { return w.rows(); }
};

MseParams mse_zeros(Index n_h, Index n_x);
Vec mse_predict(const MseParams& p, const Vec& h);

/// loss = 0.5 * |W h + b - x|^2 with exact gradients.
struct MseBackward {
  double loss = 0;
  MseParams grads;
  Vec dh;
};
MseBackward mse_loss(const MseParams& p, const Vec& h, const Vec& x);

}  // namespace kinseq
