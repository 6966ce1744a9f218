#include "kinseq/lstm.hpp"

#include <cmath>
#include <string>

namespace kinseq {

namespace {

inline Vec sigmoid(const Vec& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

Mat uniform_matrix(Index rows, Index cols, double scale, Rng& rng) {
  Mat m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-scale, scale);
  return m;
}

}  // namespace

LstmParams lstm_init(Index n_h, Index n_x, Rng& rng) {
  if (n_h < 1 || n_x < 1)
    throw ContractError("lstm_init: sizes must be >= 1");
  const double s = 1.0 / std::sqrt(static_cast<double>(n_h));
  LstmParams p;
  p.w_fh = uniform_matrix(n_h, n_h, s, rng);
  p.w_fx = uniform_matrix(n_h, n_x, s, rng);
  p.w_ih = uniform_matrix(n_h, n_h, s, rng);
  p.w_ix = uniform_matrix(n_h, n_x, s, rng);
  p.w_oh = uniform_matrix(n_h, n_h, s, rng);
  p.w_ox = uniform_matrix(n_h, n_x, s, rng);
  p.w_ch = uniform_matrix(n_h, n_h, s, rng);
  p.w_cx = uniform_matrix(n_h, n_x, s, rng);
  p.b_f = Vec::Ones(n_h);
  p.b_i = Vec::Zero(n_h);
  p.b_o = Vec::Zero(n_h);
  p.b_c = Vec::Zero(n_h);
  return p;
}

LstmParams lstm_zeros(Index n_h, Index n_x) {
  LstmParams p;
  p.w_fh = Mat::Zero(n_h, n_h);
  p.w_fx = Mat::Zero(n_h, n_x);
  p.w_ih = Mat::Zero(n_h, n_h);
  p.w_ix = Mat::Zero(n_h, n_x);
  p.w_oh = Mat::Zero(n_h, n_h);
  p.w_ox = Mat::Zero(n_h, n_x);
  p.w_ch = Mat::Zero(n_h, n_h);
  p.w_cx = Mat::Zero(n_h, n_x);
  p.b_f = Vec::Zero(n_h);
  p.b_i = Vec::Zero(n_h);
  p.b_o = Vec::Zero(n_h);
  p.b_c = Vec::Zero(n_h);
  return p;
}

LstmState lstm_zero_state(Index n_h) {
  return {Vec::Zero(n_h), Vec::Zero(n_h)};
}

std::pair<LstmState, LstmStepCache> lstm_step(const LstmParams& p,
                                              const LstmState& s,
                                              const Vec& x) {
  const Index n_h = p.hidden();
  if (s.h.size() != n_h || s.c.size() != n_h)
    throw ShapeError("lstm_step: state size " + std::to_string(s.h.size()) +
                     " does not match hidden size " + std::to_string(n_h));
  if (x.size() != p.input())
    throw ShapeError("lstm_step: input size " + std::to_string(x.size()) +
                     " does not match " + std::to_string(p.input()));
  if (!x.allFinite() || !s.h.allFinite() || !s.c.allFinite())
    throw NumericError("lstm_step: non-finite input");

  Vec a_f = p.b_f;
  a_f.noalias() += p.w_fh * s.h;
  a_f.noalias() += p.w_fx * x;
  Vec a_i = p.b_i;
  a_i.noalias() += p.w_ih * s.h;
  a_i.noalias() += p.w_ix * x;
  Vec a_o = p.b_o;
  a_o.noalias() += p.w_oh * s.h;
  a_o.noalias() += p.w_ox * x;
  Vec a_c = p.b_c;
  a_c.noalias() += p.w_ch * s.h;
  a_c.noalias() += p.w_cx * x;

  LstmStepCache cache;
  cache.x = x;
  cache.h_prev = s.h;
  cache.c_prev = s.c;
  cache.f = sigmoid(a_f);
  cache.i = sigmoid(a_i);
  cache.o = sigmoid(a_o);
  cache.c_tilde = a_c.array().tanh().matrix();
  cache.c = (cache.f.array() * s.c.array() +
             cache.i.array() * cache.c_tilde.array())
                .matrix();
  cache.tanh_c = cache.c.array().tanh().matrix();

  LstmState next;
  next.c = cache.c;
  next.h = (cache.o.array() * cache.tanh_c.array()).matrix();
  return {next, cache};
}

LstmTrace lstm_forward(const LstmParams& p, const LstmState& s0,
                       const Mat& xs) {
  if (xs.cols() < 1) throw ShapeError("lstm_forward: empty input sequence");
  LstmTrace trace;
  trace.states.reserve(static_cast<std::size_t>(xs.cols()));
  trace.caches.reserve(static_cast<std::size_t>(xs.cols()));
  LstmState s = s0;
  for (Index t = 0; t < xs.cols(); ++t) {
    auto [next, cache] = lstm_step(p, s, xs.col(t));
    s = next;
    trace.states.push_back(std::move(next));
    trace.caches.push_back(std::move(cache));
  }
  return trace;
}

LstmBackward lstm_backward(const LstmParams& p,
                           const std::vector<LstmStepCache>& caches,
                           const Mat& dh, const LstmState& d_final) {
  const Index T = static_cast<Index>(caches.size());
  const Index n_h = p.hidden();
  if (dh.cols() != T || dh.rows() != n_h)
    throw ShapeError("lstm_backward: dh is " + std::to_string(dh.rows()) +
                     "x" + std::to_string(dh.cols()) + ", expected " +
                     std::to_string(n_h) + "x" + std::to_string(T));

  LstmBackward out;
  out.grads = lstm_zeros(n_h, p.input());
  out.dx.resize(p.input(), T);

  Vec dh_next = d_final.h;
  Vec dc_next = d_final.c;
  if (dh_next.size() == 0) dh_next = Vec::Zero(n_h);
  if (dc_next.size() == 0) dc_next = Vec::Zero(n_h);

  for (Index t = T - 1; t >= 0; --t) {
    const auto& k = caches[static_cast<std::size_t>(t)];
    const Vec dht = dh.col(t) + dh_next;
    Vec dc = dc_next;
    const Vec d_o = (dht.array() * k.tanh_c.array()).matrix();
    dc.array() +=
        dht.array() * k.o.array() * (1.0 - k.tanh_c.array().square());

    const Vec d_f = (dc.array() * k.c_prev.array()).matrix();
    const Vec d_i = (dc.array() * k.c_tilde.array()).matrix();
    const Vec d_ct = (dc.array() * k.i.array()).matrix();
    dc_next = (dc.array() * k.f.array()).matrix();

    // pre-activation gradients
    const Vec da_f = (d_f.array() * k.f.array() * (1.0 - k.f.array())).matrix();
    const Vec da_i = (d_i.array() * k.i.array() * (1.0 - k.i.array())).matrix();
    const Vec da_o = (d_o.array() * k.o.array() * (1.0 - k.o.array())).matrix();
    const Vec da_c = (d_ct.array() * (1.0 - k.c_tilde.array().square())).matrix();

    out.grads.w_fh.noalias() += da_f * k.h_prev.transpose();
    out.grads.w_fx.noalias() += da_f * k.x.transpose();
    out.grads.w_ih.noalias() += da_i * k.h_prev.transpose();
    out.grads.w_ix.noalias() += da_i * k.x.transpose();
    out.grads.w_oh.noalias() += da_o * k.h_prev.transpose();
    out.grads.w_ox.noalias() += da_o * k.x.transpose();
    out.grads.w_ch.noalias() += da_c * k.h_prev.transpose();
    out.grads.w_cx.noalias() += da_c * k.x.transpose();
    out.grads.b_f += da_f;
    out.grads.b_i += da_i;
    out.grads.b_o += da_o;
    out.grads.b_c += da_c;

    out.dx.col(t).noalias() = p.w_fx.transpose() * da_f;
    out.dx.col(t).noalias() += p.w_ix.transpose() * da_i;
    out.dx.col(t).noalias() += p.w_ox.transpose() * da_o;
    out.dx.col(t).noalias() += p.w_cx.transpose() * da_c;

    dh_next.noalias() = p.w_fh.transpose() * da_f;
    dh_next.noalias() += p.w_ih.transpose() * da_i;
    dh_next.noalias() += p.w_oh.transpose() * da_o;
    dh_next.noalias() += p.w_ch.transpose() * da_c;
  }

  out.ds0 = {dh_next, dc_next};
  return out;
}

}  // namespace kinseq
