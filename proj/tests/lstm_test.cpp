#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "kinseq/lstm.hpp"
#include "test_util.hpp"

using namespace kinseq;

namespace {

LstmParams random_params(Index n_h, Index n_x, Rng& rng, double scale = 0.6) {
  LstmParams p = lstm_zeros(n_h, n_x);
  for (Mat* w : {&p.w_fh, &p.w_fx, &p.w_ih, &p.w_ix, &p.w_oh, &p.w_ox,
                 &p.w_ch, &p.w_cx})
    *w = testutil::random_mat(w->rows(), w->cols(), rng, scale);
  for (Vec* b : {&p.b_f, &p.b_i, &p.b_o, &p.b_c})
    *b = testutil::random_vec(b->size(), rng, scale);
  return p;
}

// Straight-line re-implementation of the cell equations in extended
// precision, kept independent of the library code path.
struct OracleState {
  std::vector<long double> h, c;
};

OracleState oracle_step(const LstmParams& p, const OracleState& s,
                        const Vec& x) {
  const Index n_h = p.hidden();
  const Index n_x = p.input();
  auto affine = [&](const Mat& wh, const Mat& wx, const Vec& b, Index r) {
    long double a = b[r];
    for (Index k = 0; k < n_h; ++k) a += static_cast<long double>(wh(r, k)) * s.h[static_cast<std::size_t>(k)];
    for (Index k = 0; k < n_x; ++k) a += static_cast<long double>(wx(r, k)) * x[k];
    return a;
  };
  OracleState out;
  out.h.resize(static_cast<std::size_t>(n_h));
  out.c.resize(static_cast<std::size_t>(n_h));
  for (Index r = 0; r < n_h; ++r) {
    const long double f = 1.0L / (1.0L + std::exp(-affine(p.w_fh, p.w_fx, p.b_f, r)));
    const long double i = 1.0L / (1.0L + std::exp(-affine(p.w_ih, p.w_ix, p.b_i, r)));
    const long double o = 1.0L / (1.0L + std::exp(-affine(p.w_oh, p.w_ox, p.b_o, r)));
    const long double ct = std::tanh(affine(p.w_ch, p.w_cx, p.b_c, r));
    const long double c = f * s.c[static_cast<std::size_t>(r)] + i * ct;
    out.c[static_cast<std::size_t>(r)] = c;
    out.h[static_cast<std::size_t>(r)] = o * std::tanh(c);
  }
  return out;
}

// flatten/restore helpers for finite differences over all cell parameters
std::vector<double*> param_entries(LstmParams& p) {
  std::vector<double*> out;
  for (Mat* w : {&p.w_fh, &p.w_fx, &p.w_ih, &p.w_ix, &p.w_oh, &p.w_ox,
                 &p.w_ch, &p.w_cx})
    for (Index i = 0; i < w->size(); ++i) out.push_back(w->data() + i);
  for (Vec* b : {&p.b_f, &p.b_i, &p.b_o, &p.b_c})
    for (Index i = 0; i < b->size(); ++i) out.push_back(b->data() + i);
  return out;
}

const std::vector<const double*> param_entries(const LstmParams& p) {
  std::vector<const double*> out;
  for (const Mat* w : {&p.w_fh, &p.w_fx, &p.w_ih, &p.w_ix, &p.w_oh, &p.w_ox,
                       &p.w_ch, &p.w_cx})
    for (Index i = 0; i < w->size(); ++i) out.push_back(w->data() + i);
  for (const Vec* b : {&p.b_f, &p.b_i, &p.b_o, &p.b_c})
    for (Index i = 0; i < b->size(); ++i) out.push_back(b->data() + i);
  return out;
}

// L = sum_t |h_t|^2 over a fixed input sequence
double sum_sq_loss(const LstmParams& p, const Mat& xs) {
  const auto trace = lstm_forward(p, lstm_zero_state(p.hidden()), xs);
  double loss = 0;
  for (const auto& s : trace.states) loss += s.h.squaredNorm();
  return loss;
}

}  // namespace

TEST_CASE("lstm_init: shapes, biases, determinism") {
  Rng rng(1);
  const auto p = lstm_init(8, 3, rng);
  CHECK(p.w_fh.rows() == 8);
  CHECK(p.w_fh.cols() == 8);
  CHECK(p.w_fx.rows() == 8);
  CHECK(p.w_fx.cols() == 3);
  CHECK(p.b_f == Vec::Ones(8));
  CHECK(p.b_i == Vec::Zero(8));
  CHECK(p.b_o == Vec::Zero(8));
  CHECK(p.b_c == Vec::Zero(8));

  Rng r1(42), r2(42);
  const auto a = lstm_init(4, 2, r1);
  const auto b = lstm_init(4, 2, r2);
  CHECK(a.w_ch == b.w_ch);
  CHECK(a.w_ox == b.w_ox);
}

TEST_CASE("lstm_init: uniform weight bounds") {
  Rng rng(3);
  std::vector<double> weights;
  while (weights.size() < 10000) {
    const auto p = lstm_init(16, 16, rng);
    for (const Mat* w : {&p.w_fh, &p.w_fx, &p.w_ih, &p.w_ix, &p.w_oh,
                         &p.w_ox, &p.w_ch, &p.w_cx})
      weights.insert(weights.end(), w->data(), w->data() + w->size());
  }
  double max_abs = 0, mean = 0;
  for (const double w : weights) {
    max_abs = std::max(max_abs, std::abs(w));
    mean += w;
  }
  mean /= static_cast<double>(weights.size());
  CHECK(max_abs <= 0.25);  // 1/sqrt(16)
  CHECK(std::abs(mean) <= 0.01);
}

TEST_CASE("lstm_step: zero parameters") {
  const auto p = lstm_zeros(4, 2);
  Vec x(2);
  x << 3.0, -7.0;
  const auto [next, cache] = lstm_step(p, lstm_zero_state(4), x);
  CHECK(cache.f == Vec::Constant(4, 0.5));
  CHECK(cache.i == Vec::Constant(4, 0.5));
  CHECK(cache.o == Vec::Constant(4, 0.5));
  CHECK(cache.c_tilde == Vec::Zero(4));
  CHECK(next.c == Vec::Zero(4));
  CHECK(next.h == Vec::Zero(4));
}

TEST_CASE("lstm_step: saturated forget gate keeps the cell") {
  auto p = lstm_zeros(3, 2);
  p.b_f = Vec::Constant(3, 20.0);
  Vec c0(3);
  c0 << 0.3, -1.2, 0.9;
  const LstmState s{Vec::Zero(3), c0};
  Vec x(2);
  x << 1.0, 2.0;
  const auto [next, cache] = lstm_step(p, s, x);
  CHECK((cache.f - Vec::Ones(3)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(cache.i == Vec::Constant(3, 0.5));
  CHECK(cache.c_tilde == Vec::Zero(3));
  CHECK((next.c - c0).cwiseAbs().maxCoeff() < 1e-8);
  for (Index k = 0; k < 3; ++k)
    CHECK(next.h[k] ==
          doctest::Approx(0.5 * std::tanh(c0[k])).epsilon(1e-8));
}

TEST_CASE("lstm_step: matches the transcription oracle") {
  Rng rng(7);
  const auto p = random_params(4, 2, rng);
  OracleState os{{0.1L, -0.4L, 0.2L, 0.8L}, {-0.3L, 0.5L, 0.0L, -0.9L}};
  LstmState s{Vec(4), Vec(4)};
  for (Index i = 0; i < 4; ++i) {
    s.h[i] = static_cast<double>(os.h[static_cast<std::size_t>(i)]);
    s.c[i] = static_cast<double>(os.c[static_cast<std::size_t>(i)]);
  }
  const Vec x = testutil::random_vec(2, rng);
  const auto [next, cache] = lstm_step(p, s, x);
  const auto expect = oracle_step(p, os, x);
  for (Index i = 0; i < 4; ++i) {
    CHECK(next.h[i] == doctest::Approx(static_cast<double>(
                           expect.h[static_cast<std::size_t>(i)]))
                           .epsilon(1e-12));
    CHECK(next.c[i] == doctest::Approx(static_cast<double>(
                           expect.c[static_cast<std::size_t>(i)]))
                           .epsilon(1e-12));
  }
}

TEST_CASE("lstm_step: errors") {
  const auto p = lstm_zeros(4, 2);
  Vec bad(3);
  bad.setZero();
  CHECK_THROWS_AS(lstm_step(p, lstm_zero_state(4), bad), ShapeError);
  CHECK_THROWS_AS(lstm_step(p, lstm_zero_state(3), Vec::Zero(2)), ShapeError);
  Vec nan_x(2);
  nan_x << 1.0, std::nan("");
  CHECK_THROWS_AS(lstm_step(p, lstm_zero_state(4), nan_x), NumericError);
}

TEST_CASE("lstm_forward: fold over steps") {
  Rng rng(9);
  const auto p = random_params(5, 3, rng);

  SUBCASE("length one equals a single step") {
    const Mat xs = testutil::random_mat(3, 1, rng);
    const auto trace = lstm_forward(p, lstm_zero_state(5), xs);
    const auto [s, cache] = lstm_step(p, lstm_zero_state(5), xs.col(0));
    CHECK(trace.states.size() == 1);
    CHECK(trace.states[0].h == s.h);
    CHECK(trace.states[0].c == s.c);
  }

  SUBCASE("zero parameters give zero hidden states") {
    const auto z = lstm_zeros(5, 3);
    const Mat xs = testutil::random_mat(3, 6, rng, 3.0);
    for (const auto& s : lstm_forward(z, lstm_zero_state(5), xs).states)
      CHECK(s.h == Vec::Zero(5));
  }

  SUBCASE("length seven equals seven manual steps") {
    const Mat xs = testutil::random_mat(3, 7, rng);
    const auto trace = lstm_forward(p, lstm_zero_state(5), xs);
    LstmState s = lstm_zero_state(5);
    for (Index t = 0; t < 7; ++t) s = lstm_step(p, s, xs.col(t)).first;
    CHECK(trace.states.back().h == s.h);
    CHECK(trace.states.back().c == s.c);
  }

  SUBCASE("empty sequence is rejected") {
    CHECK_THROWS_AS(lstm_forward(p, lstm_zero_state(5), Mat(3, 0)),
                    ShapeError);
  }
}

TEST_CASE("lstm_backward: zero upstream gradient") {
  Rng rng(11);
  const auto p = random_params(4, 2, rng);
  const Mat xs = testutil::random_mat(2, 5, rng);
  const auto trace = lstm_forward(p, lstm_zero_state(4), xs);
  const auto back = lstm_backward(p, trace.caches, Mat::Zero(4, 5), {});
  for (const double* e : param_entries(back.grads)) CHECK(*e == 0.0);
  CHECK(back.dx == Mat::Zero(2, 5));
  CHECK(back.ds0.h == Vec::Zero(4));
  CHECK(back.ds0.c == Vec::Zero(4));
}

TEST_CASE("lstm_backward: finite differences on sum of squared states") {
  Rng rng(13);
  const Index n_h = 5, n_x = 3, T = 6;
  auto p = random_params(n_h, n_x, rng);
  const Mat xs = testutil::random_mat(n_x, T, rng);

  const auto trace = lstm_forward(p, lstm_zero_state(n_h), xs);
  Mat dh(n_h, T);
  for (Index t = 0; t < T; ++t)
    dh.col(t) = 2.0 * trace.states[static_cast<std::size_t>(t)].h;
  const auto back = lstm_backward(p, trace.caches, dh, {});

  const double eps = 1e-5;
  double worst = 0;

  auto analytic = param_entries(back.grads);
  auto mutable_entries = param_entries(p);
  REQUIRE(analytic.size() == mutable_entries.size());
  for (std::size_t i = 0; i < mutable_entries.size(); ++i) {
    double* e = mutable_entries[i];
    const double orig = *e;
    *e = orig + eps;
    const double lp = sum_sq_loss(p, xs);
    *e = orig - eps;
    const double lm = sum_sq_loss(p, xs);
    *e = orig;
    const double fd = (lp - lm) / (2 * eps);
    const double a = *analytic[i];
    worst = std::max(worst,
                     std::abs(a - fd) / std::max({1.0, std::abs(a),
                                                  std::abs(fd)}));
  }
  CHECK(worst < 1e-4);

  // gradient with respect to the inputs
  Mat xs_mut = xs;
  worst = 0;
  for (Index idx = 0; idx < xs_mut.size(); ++idx) {
    double* e = xs_mut.data() + idx;
    const double orig = *e;
    *e = orig + eps;
    const double lp = sum_sq_loss(p, xs_mut);
    *e = orig - eps;
    const double lm = sum_sq_loss(p, xs_mut);
    *e = orig;
    const double fd = (lp - lm) / (2 * eps);
    const double a = back.dx(idx);
    worst = std::max(worst,
                     std::abs(a - fd) / std::max({1.0, std::abs(a),
                                                  std::abs(fd)}));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("lstm_backward: downstream gradient into the final state") {
  Rng rng(15);
  const Index n_h = 4, n_x = 2, T = 5;
  auto p = random_params(n_h, n_x, rng);
  const Mat xs = testutil::random_mat(n_x, T, rng);
  const Vec wh = testutil::random_vec(n_h, rng);
  const Vec wc = testutil::random_vec(n_h, rng);

  // L = wh . h_T + wc . c_T
  const auto trace = lstm_forward(p, lstm_zero_state(n_h), xs);
  const auto back =
      lstm_backward(p, trace.caches, Mat::Zero(n_h, T), LstmState{wh, wc});

  auto loss = [&](const LstmParams& q) {
    const auto tr = lstm_forward(q, lstm_zero_state(n_h), xs);
    return wh.dot(tr.states.back().h) + wc.dot(tr.states.back().c);
  };
  const double eps = 1e-5;
  double worst = 0;
  auto analytic = param_entries(back.grads);
  auto mutable_entries = param_entries(p);
  for (std::size_t i = 0; i < mutable_entries.size(); ++i) {
    double* e = mutable_entries[i];
    const double orig = *e;
    *e = orig + eps;
    const double lp = loss(p);
    *e = orig - eps;
    const double lm = loss(p);
    *e = orig;
    const double fd = (lp - lm) / (2 * eps);
    const double a = *analytic[i];
    worst = std::max(worst,
                     std::abs(a - fd) / std::max({1.0, std::abs(a),
                                                  std::abs(fd)}));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("lstm invariants: gates in (0,1), hidden state in (-1,1)") {
  // scales chosen so pre-activations stay below tanh/sigmoid saturation,
  // where the open bounds are unrepresentable in double precision
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_params(6, 3, rng, 0.5);
    const Mat xs = testutil::random_mat(3, 10, rng, 1.0);
    const auto trace = lstm_forward(p, lstm_zero_state(6), xs);
    for (const auto& cache : trace.caches) {
      CHECK(cache.f.minCoeff() > 0.0);
      CHECK(cache.f.maxCoeff() < 1.0);
      CHECK(cache.i.minCoeff() > 0.0);
      CHECK(cache.i.maxCoeff() < 1.0);
      CHECK(cache.o.minCoeff() > 0.0);
      CHECK(cache.o.maxCoeff() < 1.0);
      CHECK(cache.c_tilde.cwiseAbs().maxCoeff() < 1.0);
    }
    for (const auto& s : trace.states)
      CHECK(s.h.cwiseAbs().maxCoeff() < 1.0);
  }
}
