// SPDX-License-Identifier: Apache-2.0
//
// Encoder-only transformer over an unordered token set. Each of the L layers
// is pre-norm:
//
//   F' = LN(F)
//   H_h = softmax(F'Wq_h (F'Wk_h)^T / sqrt(d_k)) F'Wv_h      for h = 1..H
//   Z = Concat(H_1..H_H) Wo + F
//   out = GELU(LN(Z) W1 + b1) W2 + b2 + Z
//
// No positional encoding, masking, dropout or final norm: permuting input
// rows permutes output rows identically.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vagg/matrix.hpp"
#include "vagg/numkernel.hpp"

namespace vagg {

struct EncoderConfig {
  std::size_t dim = 512;
  std::size_t heads = 16;
  std::size_t layers = 4;
  std::size_t mlp_hidden = 2048;
  double ln_eps = kLayerNormEps;

  /// Config with the default 4x MLP expansion.
  static EncoderConfig make(std::size_t dim, std::size_t heads, std::size_t layers);

  std::size_t head_dim() const { return heads ? dim / heads : 0; }
  /// Throws ValidationError unless dim = heads * head_dim and all counts >= 1.
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct LayerParams {
  std::vector<Matrix> wq;  // per head, dim x head_dim
  std::vector<Matrix> wk;
  std::vector<Matrix> wv;
  Matrix wo;  // (heads * head_dim) x dim
  std::vector<double> ln_attn_gain;
  std::vector<double> ln_attn_bias;
  std::vector<double> ln_mlp_gain;
  std::vector<double> ln_mlp_bias;
  Matrix w1;  // dim x mlp_hidden
  std::vector<double> b1;
  Matrix w2;  // mlp_hidden x dim
  std::vector<double> b2;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct EncoderParams {
  std::vector<LayerParams> layers;

  /// All-zero tensors shaped for `cfg` (also the gradient accumulator shape).
  static EncoderParams zeros(const EncoderConfig& cfg);

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

enum class TensorKind { weight, norm, bias };

/// Visits every tensor in the canonical order used by checkpoints and the
/// optimizer: layer-major; per head wq, wk, wv; then wo; ln_attn gain/bias;
/// ln_mlp gain/bias; w1, b1, w2, b2.
/// `fn(const std::string& name, std::span<T> values, TensorKind kind)`.
template <class Params, class Fn>
void for_each_tensor(Params& params, Fn&& fn) {
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    for (std::size_t h = 0; h < layer.wq.size(); ++h) {
      const std::string hp = pre + "head" + std::to_string(h) + ".";
      fn(hp + "wq", layer.wq[h].values(), TensorKind::weight);
      fn(hp + "wk", layer.wk[h].values(), TensorKind::weight);
      fn(hp + "wv", layer.wv[h].values(), TensorKind::weight);
    }
    fn(pre + "wo", layer.wo.values(), TensorKind::weight);
    fn(pre + "ln_attn.gain", std::span(layer.ln_attn_gain), TensorKind::norm);
    fn(pre + "ln_attn.bias", std::span(layer.ln_attn_bias), TensorKind::norm);
    fn(pre + "ln_mlp.gain", std::span(layer.ln_mlp_gain), TensorKind::norm);
    fn(pre + "ln_mlp.bias", std::span(layer.ln_mlp_bias), TensorKind::norm);
    fn(pre + "mlp.w1", layer.w1.values(), TensorKind::weight);
    fn(pre + "mlp.b1", std::span(layer.b1), TensorKind::bias);
    fn(pre + "mlp.w2", layer.w2.values(), TensorKind::weight);
    fn(pre + "mlp.b2", std::span(layer.b2), TensorKind::bias);
  }
}

std::size_t parameter_count(const EncoderParams& params);

/// Throws ShapeError if any tensor disagrees with `cfg`.
void check_params(const EncoderParams& params, const EncoderConfig& cfg);

/// FNV-1a over the raw bytes of every tensor in canonical order.
std::uint64_t fingerprint(const EncoderParams& params);

/// Xavier-uniform weights, zero biases, unit LN gains. Deterministic in `seed`.
EncoderParams init_params(const EncoderConfig& cfg, std::uint64_t seed);

/// [layer][head] attention matrices, each tokens x tokens.
using AttentionWeights = std::vector<std::vector<Matrix>>;

struct HeadCache {
  Matrix q, k, v, attn;
};

struct LayerCache {
  Matrix input;
  Matrix normed;
  std::vector<HeadCache> heads;
  Matrix concat;
  Matrix z;
  Matrix z_normed;
  Matrix pre_act;
  Matrix act;
};

struct ForwardCache {
  EncoderConfig cfg;
  std::uint64_t params_fingerprint = 0;
  std::size_t tokens = 0;
  std::vector<LayerCache> layers;
};

struct ForwardResult {
  Matrix output;
  std::optional<ForwardCache> cache;
  AttentionWeights attention;
};

/// Runs all layers on a tokens x dim matrix.
/// Throws ShapeError on a dimension mismatch and NumericError (naming the
/// layer) if an intermediate goes non-finite.
ForwardResult forward(const EncoderParams& params, const EncoderConfig& cfg,
                      const Matrix& tokens, bool keep_cache = false);

struct BackwardResult {
  EncoderParams grads;
  Matrix input_grad;
};

/// Exact gradients of the cached forward pass. Rejects a cache produced with
/// different parameters, a different config, or a mis-shaped upstream.
BackwardResult backward(const EncoderParams& params, const EncoderConfig& cfg,
                        const ForwardCache& cache, const Matrix& upstream);

/// Unprojected single-head self-attention written out element by element:
/// out_k = sum_m a_km f_m with a_k. = softmax_m(f_k . f_m). Oracle only.
Matrix attention_single_head_reference(const Matrix& tokens);

/// tanh-approximated GELU and its derivative.
double gelu(double x);
double gelu_grad(double x);

}  // namespace vagg
