#include "kinseq/model.hpp"

#include <cmath>
#include <type_traits>

namespace kinseq {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::FpMdn: return "fp-mdn";
    case Variant::FpNoMdn: return "fp-nomdn";
    case Variant::NoFpMdn: return "nofp-mdn";
  }
  throw ContractError("unknown variant");
}

Variant variant_from_string(const std::string& s) {
  if (s == "fp-mdn") return Variant::FpMdn;
  if (s == "fp-nomdn") return Variant::FpNoMdn;
  if (s == "nofp-mdn") return Variant::NoFpMdn;
  throw ConfigError("unknown variant '" + s +
                    "' (expected fp-mdn, fp-nomdn, or nofp-mdn)");
}

std::string to_string(DecoderBridge b) {
  switch (b) {
    case DecoderBridge::ZeroInput: return "zero";
    case DecoderBridge::EncodingInput: return "enc-input";
  }
  throw ContractError("unknown decoder bridge");
}

DecoderBridge bridge_from_string(const std::string& s) {
  if (s == "zero") return DecoderBridge::ZeroInput;
  if (s == "enc-input") return DecoderBridge::EncodingInput;
  throw ConfigError("unknown decoder_bridge '" + s +
                    "' (expected zero or enc-input)");
}

void validate(const ModelConfig& cfg) {
  if (cfg.n_x < 1 || cfg.n_h < 1 || cfg.t_past < 1 || cfg.t_future < 1)
    throw ConfigError("model config: n_x, n_h, t_past, t_future must be >= 1");
  if (cfg.mdn_head() && cfg.n_c < 1)
    throw ConfigError("model config: n_c must be >= 1 for mixture heads");
}

Model model_init(const ModelConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  Model m;
  m.config = cfg;
  m.encoder = lstm_init(cfg.n_h, cfg.n_x, rng);
  m.decoder = lstm_init(cfg.n_h, cfg.decoder_input_dim(), rng);
  // The mean-path weights start like the recurrent weights instead of at
  // zero: a zero head passes no gradient to the decoder and encoder, and at
  // this scale the variance path then inflates before the means come online,
  // which collapses the encoder's representation early in training. Mixture
  // and variance paths stay zero (uniform weights, softplus(0) variance).
  const double s = 1.0 / std::sqrt(static_cast<double>(cfg.n_h));
  if (cfg.mdn_head()) {
    MdnParams head = mdn_zeros(cfg.n_c, cfg.n_h, cfg.n_x);
    for (Index c = 0; c < cfg.n_c; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      for (Index j = 0; j < head.w_mu[ci].size(); ++j)
        *(head.w_mu[ci].data() + j) = rng.uniform(-s, s);
      for (Index k = 0; k < cfg.n_x; ++k)
        head.b_mu[ci][k] = rng.uniform(-0.1, 0.1);
    }
    m.head = std::move(head);
  } else {
    MseParams head = mse_zeros(cfg.n_h, cfg.n_x);
    for (Index j = 0; j < head.w.size(); ++j)
      *(head.w.data() + j) = rng.uniform(-s, s);
    m.head = std::move(head);
  }
  return m;
}

Model zeros_like(const Model& m) {
  Model z;
  z.config = m.config;
  z.encoder = lstm_zeros(m.config.n_h, m.config.n_x);
  z.decoder = lstm_zeros(m.config.n_h, m.config.decoder_input_dim());
  if (m.config.mdn_head())
    z.head = mdn_zeros(m.config.n_c, m.config.n_h, m.config.n_x);
  else
    z.head = mse_zeros(m.config.n_h, m.config.n_x);
  return z;
}

namespace {

template <typename ViewT, typename LstmT>
void push_lstm_views(std::vector<ViewT>& out, const std::string& prefix,
                     LstmT& p) {
  auto add = [&](const char* name, auto& t) {
    out.push_back(ViewT{prefix + name, t.data(), t.rows(), t.cols()});
  };
  add("w_fh", p.w_fh);
  add("w_fx", p.w_fx);
  add("w_ih", p.w_ih);
  add("w_ix", p.w_ix);
  add("w_oh", p.w_oh);
  add("w_ox", p.w_ox);
  add("w_ch", p.w_ch);
  add("w_cx", p.w_cx);
  add("b_f", p.b_f);
  add("b_i", p.b_i);
  add("b_o", p.b_o);
  add("b_c", p.b_c);
}

template <typename ViewT, typename ModelT>
std::vector<ViewT> views_impl(ModelT& m) {
  std::vector<ViewT> out;
  push_lstm_views(out, "enc.", m.encoder);
  push_lstm_views(out, "dec.", m.decoder);
  std::visit(
      [&](auto& head) {
        using T = std::decay_t<decltype(head)>;
        if constexpr (std::is_same_v<T, MdnParams>) {
          out.push_back(
              ViewT{"head.w_pi", head.w_pi.data(), head.w_pi.rows(),
                    head.w_pi.cols()});
          out.push_back(ViewT{"head.b_pi", head.b_pi.data(),
                              head.b_pi.rows(), 1});
          for (std::size_t c = 0; c < head.w_mu.size(); ++c) {
            const std::string idx = std::to_string(c);
            out.push_back(ViewT{"head.w_mu" + idx, head.w_mu[c].data(),
                                head.w_mu[c].rows(), head.w_mu[c].cols()});
            out.push_back(ViewT{"head.b_mu" + idx, head.b_mu[c].data(),
                                head.b_mu[c].rows(), 1});
            out.push_back(ViewT{"head.w_v" + idx, head.w_v[c].data(),
                                head.w_v[c].rows(), head.w_v[c].cols()});
            out.push_back(ViewT{"head.b_v" + idx, head.b_v[c].data(),
                                head.b_v[c].rows(), 1});
          }
        } else {
          out.push_back(
              ViewT{"head.w", head.w.data(), head.w.rows(), head.w.cols()});
          out.push_back(ViewT{"head.b", head.b.data(), head.b.rows(), 1});
        }
      },
      m.head);
  return out;
}

}  // namespace

std::vector<TensorView> tensor_views(Model& m) {
  return views_impl<TensorView>(m);
}

std::vector<ConstTensorView> tensor_views(const Model& m) {
  return views_impl<ConstTensorView>(m);
}

std::size_t parameter_count(const Model& m) {
  std::size_t n = 0;
  for (const auto& v : tensor_views(m)) n += static_cast<std::size_t>(v.size());
  return n;
}

void add_scaled(Model& dst, const Model& src, double scale) {
  auto d = tensor_views(dst);
  auto s = tensor_views(src);
  if (d.size() != s.size())
    throw ShapeError("add_scaled: mismatched parameter structure");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i].size() != s[i].size())
      throw ShapeError("add_scaled: tensor " + d[i].name + " size mismatch");
    Eigen::Map<Vec>(d[i].data, d[i].size()) +=
        scale * Eigen::Map<const Vec>(s[i].data, s[i].size());
  }
}

void scale_params(Model& m, double factor) {
  for (auto& v : tensor_views(m))
    Eigen::Map<Vec>(v.data, v.size()) *= factor;
}

double global_norm(const Model& m) {
  double sq = 0;
  for (const auto& v : tensor_views(m))
    sq += Eigen::Map<const Vec>(v.data, v.size()).squaredNorm();
  return std::sqrt(sq);
}

Encoding encode(const Model& m, const Mat& past, EncodingSpan span) {
  const auto& cfg = m.config;
  if (past.rows() != cfg.n_x || past.cols() != cfg.t_past)
    throw ShapeError("encode: window is " + std::to_string(past.rows()) + "x" +
                     std::to_string(past.cols()) + ", expected " +
                     std::to_string(cfg.n_x) + "x" +
                     std::to_string(cfg.t_past));
  const LstmTrace trace =
      lstm_forward(m.encoder, lstm_zero_state(cfg.n_h), past);
  if (span.length == 0) span.length = cfg.t_past;
  return {trace.states.back().h, std::move(span)};
}

namespace {

Mat decoder_inputs(const ModelConfig& cfg, const Vec& e) {
  const Index horizon = cfg.decode_horizon();
  if (cfg.bridge == DecoderBridge::EncodingInput)
    return e.replicate(1, horizon);
  return Mat::Zero(cfg.n_x, horizon);
}

void add_to(LstmParams& dst, const LstmParams& src) {
  dst.w_fh += src.w_fh;
  dst.w_fx += src.w_fx;
  dst.w_ih += src.w_ih;
  dst.w_ix += src.w_ix;
  dst.w_oh += src.w_oh;
  dst.w_ox += src.w_ox;
  dst.w_ch += src.w_ch;
  dst.w_cx += src.w_cx;
  dst.b_f += src.b_f;
  dst.b_i += src.b_i;
  dst.b_o += src.b_o;
  dst.b_c += src.b_c;
}

void add_to(MdnParams& dst, const MdnParams& src) {
  dst.w_pi += src.w_pi;
  dst.b_pi += src.b_pi;
  for (std::size_t c = 0; c < dst.w_mu.size(); ++c) {
    dst.w_mu[c] += src.w_mu[c];
    dst.b_mu[c] += src.b_mu[c];
    dst.w_v[c] += src.w_v[c];
    dst.b_v[c] += src.b_v[c];
  }
}

// Summed per-step loss for one window; accumulates into *grads when given.
double window_loss(const Model& m, const Mat& past, const Mat& target,
                   Model* grads) {
  const auto& cfg = m.config;
  const LstmTrace enc = lstm_forward(m.encoder, lstm_zero_state(cfg.n_h), past);
  const Vec e = enc.states.back().h;
  const Index horizon = cfg.decode_horizon();
  const Mat dec_in = decoder_inputs(cfg, e);
  const LstmTrace dec =
      lstm_forward(m.decoder, LstmState{e, Vec::Zero(cfg.n_h)}, dec_in);

  double loss = 0;
  Mat dh;
  if (grads) dh.setZero(cfg.n_h, horizon);

  if (cfg.mdn_head()) {
    const auto& head = std::get<MdnParams>(m.head);
    for (Index t = 0; t < horizon; ++t) {
      const Vec& h = dec.states[static_cast<std::size_t>(t)].h;
      auto [mix, cache] = mdn_forward(head, h);
      if (grads) {
        auto back = mdn_backward(head, h, target.col(t), cache);
        loss += back.nll;
        add_to(std::get<MdnParams>(grads->head), back.grads);
        dh.col(t) = back.dh;
      } else {
        loss += mixture_nll(mix, target.col(t));
      }
    }
  } else {
    const auto& head = std::get<MseParams>(m.head);
    for (Index t = 0; t < horizon; ++t) {
      const Vec& h = dec.states[static_cast<std::size_t>(t)].h;
      auto back = mse_loss(head, h, target.col(t));
      loss += back.loss;
      if (grads) {
        auto& hg = std::get<MseParams>(grads->head);
        hg.w += back.grads.w;
        hg.b += back.grads.b;
        dh.col(t) = back.dh;
      }
    }
  }

  if (grads) {
    const auto dec_back = lstm_backward(m.decoder, dec.caches, dh, {});
    add_to(grads->decoder, dec_back.grads);
    Vec de = dec_back.ds0.h;
    if (cfg.bridge == DecoderBridge::EncodingInput)
      de += dec_back.dx.rowwise().sum();
    const auto enc_back =
        lstm_backward(m.encoder, enc.caches, Mat::Zero(cfg.n_h, cfg.t_past),
                      LstmState{de, Vec::Zero(cfg.n_h)});
    add_to(grads->encoder, enc_back.grads);
  }
  return loss;
}

void check_window(const ModelConfig& cfg, const WindowPair& wp) {
  if (wp.past.rows() != cfg.n_x || wp.past.cols() != cfg.t_past ||
      wp.future.rows() != cfg.n_x || wp.future.cols() != cfg.t_future)
    throw ShapeError("window from " + wp.source.subject_id + "/" +
                     wp.source.trial_id + " does not match model config");
}

}  // namespace

DecodeResult decode(const Model& m, const Vec& encoding) {
  const auto& cfg = m.config;
  if (encoding.size() != cfg.n_h)
    throw ShapeError("decode: encoding size " +
                     std::to_string(encoding.size()) + " does not match " +
                     std::to_string(cfg.n_h));
  const Index horizon = cfg.decode_horizon();
  const Mat dec_in = decoder_inputs(cfg, encoding);
  const LstmTrace dec = lstm_forward(
      m.decoder, LstmState{encoding, Vec::Zero(cfg.n_h)}, dec_in);

  DecodeResult out;
  if (cfg.mdn_head()) {
    const auto& head = std::get<MdnParams>(m.head);
    for (Index t = 0; t < horizon; ++t)
      out.mixtures.push_back(
          mdn_forward(head, dec.states[static_cast<std::size_t>(t)].h).first);
  } else {
    const auto& head = std::get<MseParams>(m.head);
    out.points.resize(cfg.n_x, horizon);
    for (Index t = 0; t < horizon; ++t)
      out.points.col(t) =
          mse_predict(head, dec.states[static_cast<std::size_t>(t)].h);
  }
  return out;
}

LossGrads loss_and_grads(const Model& m,
                         const std::vector<WindowPair>& batch) {
  if (batch.empty()) throw ContractError("loss_and_grads: empty batch");
  LossGrads out{0.0, zeros_like(m)};
  // per-window gradients summed in batch order, so the batch mean is a pure
  // function of the per-window results
  Model window_grads = zeros_like(m);
  for (const auto& wp : batch) {
    check_window(m.config, wp);
    const Mat& target =
        m.config.variant == Variant::NoFpMdn ? wp.past : wp.future;
    scale_params(window_grads, 0.0);
    const double wl = window_loss(m, wp.past, target, &window_grads);
    if (!std::isfinite(wl))
      throw NumericError("non-finite loss for window " +
                         wp.source.subject_id + "/" + wp.source.trial_id +
                         " at " + std::to_string(wp.source.start_index));
    add_scaled(out.grads, window_grads, 1.0);
    out.loss += wl;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  scale_params(out.grads, inv);
  return out;
}

double batch_loss(const Model& m, const std::vector<WindowPair>& batch) {
  if (batch.empty()) throw ContractError("batch_loss: empty batch");
  double loss = 0;
  for (const auto& wp : batch) {
    check_window(m.config, wp);
    const Mat& target =
        m.config.variant == Variant::NoFpMdn ? wp.past : wp.future;
    const double wl = window_loss(m, wp.past, target, nullptr);
    if (!std::isfinite(wl))
      throw NumericError("non-finite loss for window " +
                         wp.source.subject_id + "/" + wp.source.trial_id +
                         " at " + std::to_string(wp.source.start_index));
    loss += wl;
  }
  return loss / static_cast<double>(batch.size());
}

std::vector<Mat> predict_futures(const Model& m, const Mat& past, int k,
                                 Rng& rng) {
  if (k < 1) throw ContractError("predict_futures: k must be >= 1");
  if (!m.config.mdn_head() && k > 1)
    throw ContractError(
        "predict_futures: the sum-of-squares variant is deterministic; k "
        "must be 1");
  const Encoding enc = encode(m, past);
  const DecodeResult dec = decode(m, enc.e);
  if (!m.config.mdn_head()) return {dec.points};

  const Index horizon = m.config.decode_horizon();
  std::vector<Mat> samples;
  for (int j = 0; j < k; ++j) {
    Mat s(m.config.n_x, horizon);
    for (Index t = 0; t < horizon; ++t)
      s.col(t) = mdn_sample(dec.mixtures[static_cast<std::size_t>(t)], rng);
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace kinseq
