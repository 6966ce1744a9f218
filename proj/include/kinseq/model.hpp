#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "kinseq/lstm.hpp"
#include "kinseq/mdn.hpp"
#include "kinseq/trajectory.hpp"

namespace kinseq {

/// The three model variants: predict the future with a mixture head, predict
/// the future with a sum-of-squares head, or reconstruct the past with a
/// mixture head (autoencoder-style).
enum class Variant { FpMdn, FpNoMdn, NoFpMdn };

/// How the encoding reaches the decoder. ZeroInput starts the decoder at
/// (h=e, c=0) and feeds zero vectors; EncodingInput additionally feeds e as
/// the input at every step. The encoder cell state is discarded either way.
enum class DecoderBridge { ZeroInput, EncodingInput };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
std::string to_string(DecoderBridge b);
DecoderBridge bridge_from_string(const std::string& s);

struct ModelConfig {
  Index n_x = 14;
  Index n_h = 64;
  Index n_c = 16;
  Index t_past = 50;
  Index t_future = 50;
  Variant variant = Variant::FpMdn;
  DecoderBridge bridge = DecoderBridge::ZeroInput;
  std::uint64_t seed = 0;

  bool mdn_head() const { return variant != Variant::FpNoMdn; }
  Index decode_horizon() const {
    return variant == Variant::NoFpMdn ? t_past : t_future;
  }
  Index decoder_input_dim() const {
    return bridge == DecoderBridge::EncodingInput ? n_h : n_x;
  }
};

void validate(const ModelConfig& cfg);

using HeadParams = std::variant<MdnParams, MseParams>;

/// Encoder LSTM, decoder LSTM, and output head. Doubles as the gradient
/// container since gradients mirror the parameter shapes.
struct Model {
  ModelConfig config;
  LstmParams encoder;
  LstmParams decoder;
  HeadParams head;
};

/// Encoder and decoder weights via lstm_init; head zero except the mixture
/// mean biases, drawn uniform(-0.1, 0.1) to break component symmetry.
Model model_init(const ModelConfig& cfg);
Model zeros_like(const Model& m);
std::size_t parameter_count(const Model& m);

/// Flat named view over every parameter tensor, in a fixed order shared by
/// the optimizer, the checkpoint format, and the gradient checker.
struct TensorView {
  std::string name;
  double* data;
  Index rows, cols;
  Index size() const { return rows * cols; }
};
struct ConstTensorView {
  std::string name;
  const double* data;
  Index rows, cols;
  Index size() const { return rows * cols; }
};
std::vector<TensorView> tensor_views(Model& m);
std::vector<ConstTensorView> tensor_views(const Model& m);

void add_scaled(Model& dst, const Model& src, double scale);
void scale_params(Model& m, double factor);
double global_norm(const Model& m);

struct EncodingSpan {
  std::string subject_id;
  std::string trial_id;
  Index start = 0;
  Index length = 0;
};

/// Fixed-length representation of one past window: the encoder's final
/// hidden state, annotated with the frames it came from.
struct Encoding {
  Vec e;
  EncodingSpan span;
};

/// Run the encoder from a zero state over the window (n_x x t_past) and
/// return the final hidden state.
Encoding encode(const Model& m, const Mat& past, EncodingSpan span = {});

/// Per-step head outputs along the decoder rollout: mixtures for MDN heads,
/// point predictions (n_x x horizon) for the sum-of-squares head.
struct DecodeResult {
  std::vector<MixtureParams> mixtures;
  Mat points;
};
DecodeResult decode(const Model& m, const Vec& encoding);

/// Mean over the batch of the per-window summed per-step loss, with exact
/// gradients for every parameter.
struct LossGrads {
  double loss = 0;
  Model grads;
};
LossGrads loss_and_grads(const Model& m, const std::vector<WindowPair>& batch);

/// Forward-only batch loss (same semantics as loss_and_grads).
double batch_loss(const Model& m, const std::vector<WindowPair>& batch);

/// k independently sampled future trajectories for MDN variants; the single
/// point trajectory for the sum-of-squares variant (k must be 1 there).
std::vector<Mat> predict_futures(const Model& m, const Mat& past, int k,
                                 Rng& rng);

}  // namespace kinseq
