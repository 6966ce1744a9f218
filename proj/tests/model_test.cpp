#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kinseq/model.hpp"
#include "test_util.hpp"

using namespace kinseq;

namespace {

ModelConfig small_config(Variant v, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.n_x = 3;
  cfg.n_h = 8;
  cfg.n_c = 2;
  cfg.t_past = 4;
  cfg.t_future = 4;
  cfg.variant = v;
  cfg.seed = seed;
  return cfg;
}

WindowPair random_window(const ModelConfig& cfg, Rng& rng) {
  WindowPair wp;
  wp.past = testutil::random_mat(cfg.n_x, cfg.t_past, rng);
  wp.future = testutil::random_mat(cfg.n_x, cfg.t_future, rng);
  wp.source = {"s0", "t0", 0};
  return wp;
}

}  // namespace

TEST_CASE("model_init: closed-form parameter count") {
  ModelConfig cfg;
  cfg.n_x = 14;
  cfg.n_h = 64;
  cfg.n_c = 16;
  const auto m = model_init(cfg);

  const std::size_t lstm =
      4 * (64 * 64 + 64 * 14 + 64);  // four gates: W_h, W_x, b
  const std::size_t head = 16 * 64 + 16            // mixture logits
                           + 2 * 16 * (14 * 64 + 14);  // means and variances
  CHECK(parameter_count(m) == 2 * lstm + head);

  ModelConfig mse_cfg = small_config(Variant::FpNoMdn, 0);
  const auto mse_model = model_init(mse_cfg);
  const std::size_t small_lstm = 4 * (8 * 8 + 8 * 3 + 8);
  CHECK(parameter_count(mse_model) == 2 * small_lstm + (3 * 8 + 3));
}

TEST_CASE("model_init: determinism and head kinds") {
  const auto cfg = small_config(Variant::FpMdn, 77);
  const auto a = model_init(cfg);
  const auto b = model_init(cfg);
  const auto va = tensor_views(a);
  const auto vb = tensor_views(b);
  REQUIRE(va.size() == vb.size());
  for (std::size_t i = 0; i < va.size(); ++i)
    CHECK(Eigen::Map<const Vec>(va[i].data, va[i].size()) ==
          Eigen::Map<const Vec>(vb[i].data, vb[i].size()));

  CHECK(std::holds_alternative<MdnParams>(a.head));
  CHECK(std::holds_alternative<MseParams>(
      model_init(small_config(Variant::FpNoMdn, 1)).head));
  CHECK(std::holds_alternative<MdnParams>(
      model_init(small_config(Variant::NoFpMdn, 1)).head));

  // mean biases break symmetry, bounded by 0.1
  const auto& head = std::get<MdnParams>(a.head);
  CHECK(head.b_mu[0] != head.b_mu[1]);
  for (const auto& bmu : head.b_mu)
    CHECK(bmu.cwiseAbs().maxCoeff() <= 0.1);
  CHECK(head.w_pi == Mat::Zero(2, 8));
  CHECK(head.b_v[0] == Vec::Zero(3));
}

TEST_CASE("encode: zero encoder, determinism, fold oracle") {
  const auto cfg = small_config(Variant::FpMdn, 5);
  Rng rng(2);

  auto zero = model_init(cfg);
  zero.encoder = lstm_zeros(cfg.n_h, cfg.n_x);
  const Mat past = testutil::random_mat(cfg.n_x, cfg.t_past, rng);
  CHECK(encode(zero, past).e == Vec::Zero(cfg.n_h));

  const auto m = model_init(cfg);
  const auto e1 = encode(m, past);
  const auto e2 = encode(m, past);
  CHECK(e1.e == e2.e);
  CHECK(e1.span.length == cfg.t_past);

  const auto trace = lstm_forward(m.encoder, lstm_zero_state(cfg.n_h), past);
  CHECK(e1.e == trace.states.back().h);

  CHECK_THROWS_AS(encode(m, Mat::Zero(cfg.n_x, cfg.t_past + 1)), ShapeError);
}

TEST_CASE("decode: zero parameters yield the head's zero output") {
  auto m = model_init(small_config(Variant::FpMdn, 3));
  m.decoder = lstm_zeros(m.config.n_h, m.config.decoder_input_dim());
  m.head = mdn_zeros(m.config.n_c, m.config.n_h, m.config.n_x);
  const auto dec = decode(m, Vec::Zero(m.config.n_h));
  REQUIRE(static_cast<Index>(dec.mixtures.size()) == m.config.t_future);
  for (const auto& mix : dec.mixtures) {
    CHECK(mix.pi == Vec::Constant(2, 0.5));
    CHECK(mix.mu[0] == Vec::Zero(3));
    for (Index k = 0; k < 3; ++k)
      CHECK(mix.v[0][k] ==
            doctest::Approx(std::log(2.0) + kVarianceFloor).epsilon(1e-14));
  }
}

TEST_CASE("decode: point predictions for the sum-of-squares variant") {
  const auto m = model_init(small_config(Variant::FpNoMdn, 9));
  Rng rng(4);
  const Vec e = testutil::random_vec(m.config.n_h, rng, 0.5);
  const auto dec = decode(m, e);
  CHECK(dec.mixtures.empty());
  CHECK(dec.points.rows() == m.config.n_x);
  CHECK(dec.points.cols() == m.config.t_future);
}

TEST_CASE("decode: matches a manual decoder rollout") {
  const auto m = model_init(small_config(Variant::FpMdn, 11));
  Rng rng(6);
  const Vec e = testutil::random_vec(m.config.n_h, rng, 0.4);
  const auto dec = decode(m, e);

  LstmState s{e, Vec::Zero(m.config.n_h)};
  const auto& head = std::get<MdnParams>(m.head);
  for (Index t = 0; t < m.config.t_future; ++t) {
    s = lstm_step(m.decoder, s, Vec::Zero(m.config.n_x)).first;
    const auto mix = mdn_forward(head, s.h).first;
    const auto& got = dec.mixtures[static_cast<std::size_t>(t)];
    CHECK(got.pi == mix.pi);
    for (Index c = 0; c < m.config.n_c; ++c) {
      CHECK(got.mu[static_cast<std::size_t>(c)] ==
            mix.mu[static_cast<std::size_t>(c)]);
      CHECK(got.v[static_cast<std::size_t>(c)] ==
            mix.v[static_cast<std::size_t>(c)]);
    }
  }
}

TEST_CASE("decode horizon: past-reconstruction variant uses t_past") {
  auto cfg = small_config(Variant::NoFpMdn, 13);
  cfg.t_past = 6;
  cfg.t_future = 4;
  const auto m = model_init(cfg);
  Rng rng(8);
  const auto dec = decode(m, testutil::random_vec(cfg.n_h, rng, 0.3));
  CHECK(static_cast<Index>(dec.mixtures.size()) == 6);
}

TEST_CASE("loss_and_grads: zero model matches the closed form") {
  auto m = model_init(small_config(Variant::FpMdn, 15));
  m.encoder = lstm_zeros(m.config.n_x == 0 ? 1 : m.config.n_h, m.config.n_x);
  m.decoder = lstm_zeros(m.config.n_h, m.config.decoder_input_dim());
  m.head = mdn_zeros(m.config.n_c, m.config.n_h, m.config.n_x);

  Rng rng(10);
  std::vector<WindowPair> batch{random_window(m.config, rng),
                                random_window(m.config, rng)};
  const auto lg = loss_and_grads(m, batch);

  // all components coincide at the zero output, so the mixture collapses to
  // a single gaussian with variance softplus(0) + floor
  const double v0 = std::log(2.0) + kVarianceFloor;
  double expected = 0;
  for (const auto& wp : batch)
    for (Index t = 0; t < m.config.t_future; ++t)
      for (Index k = 0; k < m.config.n_x; ++k)
        expected += 0.5 * (std::log(2.0 * std::numbers::pi * v0) +
                           wp.future(k, t) * wp.future(k, t) / v0);
  expected /= static_cast<double>(batch.size());
  CHECK(lg.loss == doctest::Approx(expected).epsilon(1e-12));
  CHECK(batch_loss(m, batch) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("loss_and_grads: duplicating a window changes nothing") {
  const auto m = model_init(small_config(Variant::FpMdn, 17));
  Rng rng(12);
  const auto wp = random_window(m.config, rng);
  const auto once = loss_and_grads(m, {wp});
  const auto twice = loss_and_grads(m, {wp, wp});
  CHECK(once.loss == twice.loss);
  const auto va = tensor_views(once.grads);
  const auto vb = tensor_views(twice.grads);
  for (std::size_t i = 0; i < va.size(); ++i)
    CHECK(Eigen::Map<const Vec>(va[i].data, va[i].size()) ==
          Eigen::Map<const Vec>(vb[i].data, vb[i].size()));
}

TEST_CASE("loss_and_grads: end-to-end finite differences, all variants") {
  Rng rng(14);
  for (const Variant variant :
       {Variant::FpMdn, Variant::FpNoMdn, Variant::NoFpMdn}) {
    auto m = model_init(small_config(variant, 19));
    const std::vector<WindowPair> batch{random_window(m.config, rng),
                                        random_window(m.config, rng)};
    const auto lg = loss_and_grads(m, batch);
    const auto analytic = tensor_views(lg.grads);
    auto params = tensor_views(m);

    const double eps = 1e-5;
    double worst = 0;
    for (std::size_t i = 0; i < params.size(); ++i)
      for (Index j = 0; j < params[i].size(); ++j) {
        double* entry = params[i].data + j;
        const double orig = *entry;
        *entry = orig + eps;
        const double lp = batch_loss(m, batch);
        *entry = orig - eps;
        const double lm = batch_loss(m, batch);
        *entry = orig;
        const double fd = (lp - lm) / (2 * eps);
        const double a = analytic[i].data[j];
        worst = std::max(worst, std::abs(a - fd) /
                                    std::max({1.0, std::abs(a),
                                              std::abs(fd)}));
      }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("loss_and_grads: encoding-input bridge gradients") {
  Rng rng(15);
  auto cfg = small_config(Variant::FpMdn, 21);
  cfg.bridge = DecoderBridge::EncodingInput;
  auto m = model_init(cfg);
  CHECK(m.decoder.input() == cfg.n_h);

  const std::vector<WindowPair> batch{random_window(cfg, rng)};
  const auto lg = loss_and_grads(m, batch);
  const auto analytic = tensor_views(lg.grads);
  auto params = tensor_views(m);
  const double eps = 1e-5;
  double worst = 0;
  for (std::size_t i = 0; i < params.size(); ++i)
    for (Index j = 0; j < params[i].size(); ++j) {
      double* entry = params[i].data + j;
      const double orig = *entry;
      *entry = orig + eps;
      const double lp = batch_loss(m, batch);
      *entry = orig - eps;
      const double lm = batch_loss(m, batch);
      *entry = orig;
      const double fd = (lp - lm) / (2 * eps);
      const double a = analytic[i].data[j];
      worst = std::max(worst, std::abs(a - fd) /
                                  std::max({1.0, std::abs(a), std::abs(fd)}));
    }
  CHECK(worst < 1e-4);
}

TEST_CASE("loss: errors") {
  const auto m = model_init(small_config(Variant::FpMdn, 23));
  CHECK_THROWS_AS(loss_and_grads(m, {}), ContractError);
  Rng rng(16);
  auto wp = random_window(m.config, rng);
  wp.past = Mat::Zero(m.config.n_x, m.config.t_past + 2);
  CHECK_THROWS_AS(loss_and_grads(m, {wp}), ShapeError);
  auto bad = random_window(m.config, rng);
  bad.future(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(loss_and_grads(m, {bad}), NumericError);
}

TEST_CASE("past reconstruction equals future prediction on matched inputs") {
  // same parameters, target swapped: identical code path, identical loss
  const auto fp = model_init(small_config(Variant::FpMdn, 25));
  auto nofp = fp;
  nofp.config.variant = Variant::NoFpMdn;

  Rng rng(18);
  auto wp = random_window(fp.config, rng);
  WindowPair mirrored = wp;
  mirrored.future = wp.past;

  CHECK(loss_and_grads(nofp, {wp}).loss ==
        loss_and_grads(fp, {mirrored}).loss);
}

TEST_CASE("predict_futures: determinism and contracts") {
  const auto m = model_init(small_config(Variant::FpMdn, 27));
  Rng data_rng(20);
  const Mat past = testutil::random_mat(m.config.n_x, m.config.t_past,
                                        data_rng);

  Rng r1(5), r2(5);
  const auto a = predict_futures(m, past, 4, r1);
  const auto b = predict_futures(m, past, 4, r2);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

  const auto mse = model_init(small_config(Variant::FpNoMdn, 29));
  Rng r3(1);
  const auto point = predict_futures(mse, past, 1, r3);
  REQUIRE(point.size() == 1);
  CHECK(point[0] == decode(mse, encode(mse, past).e).points);
  CHECK_THROWS_AS(predict_futures(mse, past, 2, r3), ContractError);
  CHECK_THROWS_AS(predict_futures(m, past, 0, r3), ContractError);
}

TEST_CASE("encodings stay inside (-1, 1)") {
  Rng rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    ModelConfig cfg = small_config(Variant::FpMdn, 100 + trial);
    const auto m = model_init(cfg);
    const Mat past = testutil::random_mat(cfg.n_x, cfg.t_past, rng, 2.0);
    const auto enc = encode(m, past);
    CHECK(enc.e.cwiseAbs().maxCoeff() < 1.0);
  }
}
