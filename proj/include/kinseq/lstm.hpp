#pragma once

#include <utility>
#include <vector>

#include "kinseq/rng.hpp"
#include "kinseq/types.hpp"

namespace kinseq {

/// Gate and candidate weights of one LSTM cell. The same struct doubles as
/// the gradient container, since gradients mirror the parameter shapes.
struct LstmParams {
  Mat w_fh, w_fx;  // forget gate
  Mat w_ih, w_ix;  // input gate
  Mat w_oh, w_ox;  // output gate
  Mat w_ch, w_cx;  // candidate
  Vec b_f, b_i, b_o, b_c;

  Index hidden() const { return w_fh.rows(); }
  Index input() const { return w_fx.cols(); }
};

struct LstmState {
  Vec h;
  Vec c;
};

/// Everything the backward pass needs about one step.
struct LstmStepCache {
  Vec x, h_prev, c_prev;
  Vec f, i, o, c_tilde;
  Vec c, tanh_c;
};

/// Weights uniform on (-1/sqrt(n_h), 1/sqrt(n_h)); biases zero except the
/// forget bias, which starts at one so early training keeps its memory.
LstmParams lstm_init(Index n_h, Index n_x, Rng& rng);
LstmParams lstm_zeros(Index n_h, Index n_x);
LstmState lstm_zero_state(Index n_h);

std::pair<LstmState, LstmStepCache> lstm_step(const LstmParams& p,
                                              const LstmState& s,
                                              const Vec& x);

struct LstmTrace {
  std::vector<LstmState> states;     // one per step
  std::vector<LstmStepCache> caches;
};

/// Iterate lstm_step over the columns of xs (n_x x T, T >= 1).
LstmTrace lstm_forward(const LstmParams& p, const LstmState& s0, const Mat& xs);

struct LstmBackward {
  LstmParams grads;
  Mat dx;        // n_x x T
  LstmState ds0;
};

/// Exact gradients of any scalar loss whose per-step h-gradients are the
/// columns of dh (n_h x T). d_final is an extra gradient flowing into the
/// final (h, c) from downstream consumers of the last state.
LstmBackward lstm_backward(const LstmParams& p,
                           const std::vector<LstmStepCache>& caches,
                           const Mat& dh, const LstmState& d_final);

}  // namespace kinseq
