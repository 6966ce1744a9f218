#include "kinseq/mdn.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace kinseq {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_head_shapes(const MdnParams& p, const Vec& h) {
  if (h.size() != p.hidden())
    throw ShapeError("mdn: hidden state size " + std::to_string(h.size()) +
                     " does not match " + std::to_string(p.hidden()));
}

/// Per-component log densities log pi_c + log N(x; mu_c, diag v_c).
Vec component_log_terms(const MixtureParams& m, const Vec& x) {
  const Index n_c = m.components();
  Vec a(n_c);
  for (Index c = 0; c < n_c; ++c) {
    const auto& mu = m.mu[static_cast<std::size_t>(c)];
    const auto& v = m.v[static_cast<std::size_t>(c)];
    const double quad =
        ((x - mu).array().square() / v.array()).sum();
    const double logdet = (v.array().log() + kLog2Pi).sum();
    a[c] = std::log(m.pi[c]) - 0.5 * (logdet + quad);
  }
  return a;
}

}  // namespace

MdnParams mdn_zeros(Index n_c, Index n_h, Index n_x) {
  MdnParams p;
  p.w_pi = Mat::Zero(n_c, n_h);
  p.b_pi = Vec::Zero(n_c);
  for (Index c = 0; c < n_c; ++c) {
    p.w_mu.push_back(Mat::Zero(n_x, n_h));
    p.b_mu.push_back(Vec::Zero(n_x));
    p.w_v.push_back(Mat::Zero(n_x, n_h));
    p.b_v.push_back(Vec::Zero(n_x));
  }
  return p;
}

std::pair<MixtureParams, MdnCache> mdn_forward(const MdnParams& p,
                                               const Vec& h) {
  check_head_shapes(p, h);
  const Index n_c = p.components();

  Vec logits = p.b_pi;
  logits.noalias() += p.w_pi * h;
  const double zmax = logits.maxCoeff();
  // clamp keeps exp() above zero so extreme logits still yield positive pi
  Vec ez = (logits.array() - zmax).cwiseMax(-700.0).exp();
  MixtureParams mix;
  mix.pi = ez / ez.sum();

  MdnCache cache;
  for (Index c = 0; c < n_c; ++c) {
    Vec mu = p.b_mu[static_cast<std::size_t>(c)];
    mu.noalias() += p.w_mu[static_cast<std::size_t>(c)] * h;
    Vec pre = p.b_v[static_cast<std::size_t>(c)];
    pre.noalias() += p.w_v[static_cast<std::size_t>(c)] * h;
    Vec v = pre.unaryExpr([](double z) { return softplus(z); });
    v.array() += kVarianceFloor;
    mix.mu.push_back(std::move(mu));
    mix.v.push_back(std::move(v));
    cache.pre_v.push_back(std::move(pre));
  }
  cache.mix = mix;
  return {std::move(mix), std::move(cache)};
}

double mixture_nll(const MixtureParams& m, const Vec& x) {
  if (!x.allFinite()) throw NumericError("mixture_nll: non-finite input");
  if (m.components() < 1) throw ContractError("mixture_nll: no components");
  const Vec a = component_log_terms(m, x);
  const double amax = a.maxCoeff();
  if (!std::isfinite(amax)) return -amax;  // all components at zero weight
  const double lse = amax + std::log((a.array() - amax).exp().sum());
  return -lse;
}

MixtureNllGrad mixture_nll_grad(const MixtureParams& m, const Vec& x) {
  if (!x.allFinite())
    throw NumericError("mixture_nll_grad: non-finite input");
  const Index n_c = m.components();
  const Vec a = component_log_terms(m, x);
  const double amax = a.maxCoeff();
  const Vec r_un = (a.array() - amax).exp();
  const double norm = r_un.sum();
  const Vec r = r_un / norm;  // posterior responsibilities

  MixtureNllGrad g;
  g.nll = -(amax + std::log(norm));
  g.d_pi_logits = m.pi - r;
  for (Index c = 0; c < n_c; ++c) {
    const auto& mu = m.mu[static_cast<std::size_t>(c)];
    const auto& v = m.v[static_cast<std::size_t>(c)];
    g.d_mu.push_back((r[c] * (mu - x).array() / v.array()).matrix());
    g.d_v.push_back((r[c] * (1.0 / (2.0 * v.array()) -
                             (x - mu).array().square() /
                                 (2.0 * v.array().square())))
                        .matrix());
  }
  return g;
}

MdnBackward mdn_backward(const MdnParams& p, const Vec& h, const Vec& x,
                         const MdnCache& cache) {
  check_head_shapes(p, h);
  if (x.size() != p.output())
    throw ShapeError("mdn_backward: target size " + std::to_string(x.size()) +
                     " does not match " + std::to_string(p.output()));
  const Index n_c = p.components();
  const auto g = mixture_nll_grad(cache.mix, x);

  MdnBackward out;
  out.nll = g.nll;
  out.grads = mdn_zeros(n_c, p.hidden(), p.output());
  out.grads.w_pi.noalias() = g.d_pi_logits * h.transpose();
  out.grads.b_pi = g.d_pi_logits;
  out.dh.noalias() = p.w_pi.transpose() * g.d_pi_logits;
  for (Index c = 0; c < n_c; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    out.grads.w_mu[ci].noalias() = g.d_mu[ci] * h.transpose();
    out.grads.b_mu[ci] = g.d_mu[ci];
    out.dh.noalias() += p.w_mu[ci].transpose() * g.d_mu[ci];
    const Vec d_pre =
        (g.d_v[ci].array() *
         cache.pre_v[ci].unaryExpr([](double z) { return sigmoid(z); })
             .array())
            .matrix();
    out.grads.w_v[ci].noalias() = d_pre * h.transpose();
    out.grads.b_v[ci] = d_pre;
    out.dh.noalias() += p.w_v[ci].transpose() * d_pre;
  }
  return out;
}

Vec mdn_sample(const MixtureParams& m, Rng& rng) {
  const Index n_c = m.components();
  if (n_c < 1) throw ContractError("mdn_sample: no components");
  const double u = rng.uniform();
  Index comp = n_c - 1;
  double cum = 0;
  for (Index c = 0; c < n_c; ++c) {
    cum += m.pi[c];
    if (u < cum) {
      comp = c;
      break;
    }
  }
  const auto& mu = m.mu[static_cast<std::size_t>(comp)];
  const auto& v = m.v[static_cast<std::size_t>(comp)];
  Vec x(mu.size());
  for (Index k = 0; k < x.size(); ++k)
    x[k] = mu[k] + std::sqrt(v[k]) * rng.normal();
  return x;
}

MseParams mse_zeros(Index n_h, Index n_x) {
  return {Mat::Zero(n_x, n_h), Vec::Zero(n_x)};
}

Vec mse_predict(const MseParams& p, const Vec& h) {
  if (h.size() != p.hidden())
    throw ShapeError("mse_predict: hidden state size " +
                     std::to_string(h.size()) + " does not match " +
                     std::to_string(p.hidden()));
  Vec y = p.b;
  y.noalias() += p.w * h;
  return y;
}

MseBackward mse_loss(const MseParams& p, const Vec& h, const Vec& x) {
  if (x.size() != p.output())
    throw ShapeError("mse_loss: target size " + std::to_string(x.size()) +
                     " does not match " + std::to_string(p.output()));
  const Vec residual = mse_predict(p, h) - x;
  MseBackward out;
  out.loss = 0.5 * residual.squaredNorm();
  out.grads.w.noalias() = residual * h.transpose();
  out.grads.b = residual;
  out.dh.noalias() = p.w.transpose() * residual;
  return out;
}

}  // namespace kinseq
