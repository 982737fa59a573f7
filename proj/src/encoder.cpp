// SPDX-License-Identifier: Apache-2.0
#include "vagg/encoder.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "vagg/errors.hpp"

namespace vagg {

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

Matrix slice_cols(const Matrix& m, std::size_t begin, std::size_t count) {
  Matrix out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = m(r, begin + c);
  return out;
}

void write_cols(Matrix& dst, const Matrix& src, std::size_t begin) {
  for (std::size_t r = 0; r < src.rows(); ++r)
    for (std::size_t c = 0; c < src.cols(); ++c) dst(r, begin + c) = src(r, c);
}

void check_finite(const Matrix& m, std::size_t layer, const char* what) {
  if (!m.all_finite()) {
    throw NumericError("encoder layer " + std::to_string(layer) + ": non-finite " + what);
  }
}

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError("encoder params: " + name + " is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

void expect_len(const std::vector<double>& v, std::size_t n, const std::string& name) {
  if (v.size() != n) {
    throw ShapeError("encoder params: " + name + " has length " + std::to_string(v.size()) +
                     ", expected " + std::to_string(n));
  }
}

}  // namespace

EncoderConfig EncoderConfig::make(std::size_t dim, std::size_t heads, std::size_t layers) {
  EncoderConfig cfg;
  cfg.dim = dim;
  cfg.heads = heads;
  cfg.layers = layers;
  cfg.mlp_hidden = 4 * dim;
  cfg.validate();
  return cfg;
}

void EncoderConfig::validate() const {
  if (dim == 0 || heads == 0 || layers == 0 || mlp_hidden == 0) {
    throw ValidationError("encoder config: dim, heads, layers and mlp_hidden must be >= 1");
  }
  if (dim % heads != 0) {
    throw ValidationError("encoder config: dim " + std::to_string(dim) +
                          " is not divisible by heads " + std::to_string(heads));
  }
  if (!(ln_eps > 0.0)) throw ValidationError("encoder config: ln_eps must be positive");
}

EncoderParams EncoderParams::zeros(const EncoderConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.dim, dk = cfg.head_dim(), hid = cfg.mlp_hidden;
  EncoderParams p;
  p.layers.resize(cfg.layers);
  for (auto& layer : p.layers) {
    layer.wq.assign(cfg.heads, Matrix(d, dk));
    layer.wk.assign(cfg.heads, Matrix(d, dk));
    layer.wv.assign(cfg.heads, Matrix(d, dk));
    layer.wo = Matrix(cfg.heads * dk, d);
    layer.ln_attn_gain.assign(d, 0.0);
    layer.ln_attn_bias.assign(d, 0.0);
    layer.ln_mlp_gain.assign(d, 0.0);
    layer.ln_mlp_bias.assign(d, 0.0);
    layer.w1 = Matrix(d, hid);
    layer.b1.assign(hid, 0.0);
    layer.w2 = Matrix(hid, d);
    layer.b2.assign(d, 0.0);
  }
  return p;
}

std::size_t parameter_count(const EncoderParams& params) {
  std::size_t n = 0;
  for_each_tensor(params, [&](const std::string&, std::span<const double> v, TensorKind) {
    n += v.size();
  });
  return n;
}

void check_params(const EncoderParams& params, const EncoderConfig& cfg) {
  cfg.validate();
  if (params.layers.size() != cfg.layers) {
    throw ShapeError("encoder params: " + std::to_string(params.layers.size()) +
                     " layers, config wants " + std::to_string(cfg.layers));
  }
  const std::size_t d = cfg.dim, dk = cfg.head_dim(), hid = cfg.mlp_hidden;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    if (layer.wq.size() != cfg.heads || layer.wk.size() != cfg.heads ||
        layer.wv.size() != cfg.heads) {
      throw ShapeError("encoder params: " + pre + " head count mismatch");
    }
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      expect_shape(layer.wq[h], d, dk, pre + "wq");
      expect_shape(layer.wk[h], d, dk, pre + "wk");
      expect_shape(layer.wv[h], d, dk, pre + "wv");
    }
    expect_shape(layer.wo, cfg.heads * dk, d, pre + "wo");
    expect_len(layer.ln_attn_gain, d, pre + "ln_attn.gain");
    expect_len(layer.ln_attn_bias, d, pre + "ln_attn.bias");
    expect_len(layer.ln_mlp_gain, d, pre + "ln_mlp.gain");
    expect_len(layer.ln_mlp_bias, d, pre + "ln_mlp.bias");
    expect_shape(layer.w1, d, hid, pre + "mlp.w1");
    expect_len(layer.b1, hid, pre + "mlp.b1");
    expect_shape(layer.w2, hid, d, pre + "mlp.w2");
    expect_len(layer.b2, d, pre + "mlp.b2");
  }
}

std::uint64_t fingerprint(const EncoderParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for_each_tensor(params, [&](const std::string&, std::span<const double> v, TensorKind) {
    for (double x : v) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffu;
        h *= 0x100000001b3ull;
      }
    }
  });
  return h;
}

EncoderParams init_params(const EncoderConfig& cfg, std::uint64_t seed) {
  EncoderParams p = EncoderParams::zeros(cfg);
  std::mt19937_64 rng(seed);
  auto xavier = [&](Matrix& w) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : w.values()) v = dist(rng);
  };
  for (auto& layer : p.layers) {
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      xavier(layer.wq[h]);
      xavier(layer.wk[h]);
      xavier(layer.wv[h]);
    }
    xavier(layer.wo);
    layer.ln_attn_gain.assign(cfg.dim, 1.0);
    layer.ln_mlp_gain.assign(cfg.dim, 1.0);
    xavier(layer.w1);
    xavier(layer.w2);
  }
  return p;
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

ForwardResult forward(const EncoderParams& params, const EncoderConfig& cfg,
                      const Matrix& tokens, bool keep_cache) {
  check_params(params, cfg);
  if (tokens.cols() != cfg.dim) {
    throw ShapeError("encoder forward: token dim " + std::to_string(tokens.cols()) +
                     " != configured dim " + std::to_string(cfg.dim));
  }
  if (tokens.rows() == 0) throw ShapeError("encoder forward: no tokens");
  if (!tokens.all_finite()) throw NumericError("encoder forward: non-finite input tokens");

  const std::size_t n = tokens.rows();
  const std::size_t dk = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  ForwardResult result;
  if (keep_cache) {
    result.cache.emplace();
    result.cache->cfg = cfg;
    result.cache->params_fingerprint = fingerprint(params);
    result.cache->tokens = n;
    result.cache->layers.resize(cfg.layers);
  }
  result.attention.resize(cfg.layers);

  Matrix x = tokens;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const LayerParams& lp = params.layers[l];
    Matrix normed = layer_norm(x, lp.ln_attn_gain, lp.ln_attn_bias, cfg.ln_eps);

    Matrix concat(n, cfg.heads * dk);
    std::vector<HeadCache> heads(cfg.heads);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      HeadCache& hc = heads[h];
      hc.q = matmul(normed, lp.wq[h]);
      hc.k = matmul(normed, lp.wk[h]);
      hc.v = matmul(normed, lp.wv[h]);
      Matrix logits = matmul_nt(hc.q, hc.k);
      logits *= scale;
      hc.attn = softmax_rows(logits);
      write_cols(concat, matmul(hc.attn, hc.v), h * dk);
      result.attention[l].push_back(hc.attn);
    }
    check_finite(concat, l, "attention output");

    Matrix z = matmul(concat, lp.wo);
    z += x;
    Matrix z_normed = layer_norm(z, lp.ln_mlp_gain, lp.ln_mlp_bias, cfg.ln_eps);
    Matrix pre_act = matmul(z_normed, lp.w1);
    add_row_vector(pre_act, lp.b1);
    Matrix act = pre_act;
    for (double& v : act.values()) v = gelu(v);
    Matrix out = matmul(act, lp.w2);
    add_row_vector(out, lp.b2);
    out += z;
    check_finite(out, l, "block output");

    if (keep_cache) {
      LayerCache& lc = result.cache->layers[l];
      lc.input = std::move(x);
      lc.normed = std::move(normed);
      lc.heads = std::move(heads);
      lc.concat = std::move(concat);
      lc.z = std::move(z);
      lc.z_normed = std::move(z_normed);
      lc.pre_act = std::move(pre_act);
      lc.act = std::move(act);
    }
    x = std::move(out);
  }
  result.output = std::move(x);
  return result;
}

BackwardResult backward(const EncoderParams& params, const EncoderConfig& cfg,
                        const ForwardCache& cache, const Matrix& upstream) {
  check_params(params, cfg);
  if (!(cache.cfg == cfg) || cache.layers.size() != cfg.layers) {
    throw ValidationError("encoder backward: cache was produced with a different config");
  }
  if (cache.params_fingerprint != fingerprint(params)) {
    throw ValidationError("encoder backward: stale cache (parameters changed since forward)");
  }
  if (upstream.rows() != cache.tokens || upstream.cols() != cfg.dim) {
    throw ShapeError("encoder backward: upstream is " + std::to_string(upstream.rows()) + "x" +
                     std::to_string(upstream.cols()) + ", expected " +
                     std::to_string(cache.tokens) + "x" + std::to_string(cfg.dim));
  }

  const std::size_t dk = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  BackwardResult result{EncoderParams::zeros(cfg), Matrix()};

  Matrix grad = upstream;  // dL/d(layer output)
  for (std::size_t li = cfg.layers; li-- > 0;) {
    const LayerParams& lp = params.layers[li];
    const LayerCache& lc = cache.layers[li];
    LayerParams& gp = result.grads.layers[li];

    // MLP branch: out = GELU(LN(z) W1 + b1) W2 + b2 + z
    gp.b2 = column_sums(grad);
    gp.w2 = matmul_tn(lc.act, grad);
    Matrix d_pre = matmul_nt(grad, lp.w2);
    for (std::size_t i = 0; i < d_pre.size(); ++i)
      d_pre.values()[i] *= gelu_grad(lc.pre_act.values()[i]);
    gp.b1 = column_sums(d_pre);
    gp.w1 = matmul_tn(lc.z_normed, d_pre);
    Matrix d_z_normed = matmul_nt(d_pre, lp.w1);
    LayerNormGrads ln2 = layer_norm_grad(lc.z, lp.ln_mlp_gain, d_z_normed, cfg.ln_eps);
    gp.ln_mlp_gain = std::move(ln2.dgain);
    gp.ln_mlp_bias = std::move(ln2.dbias);
    Matrix d_z = std::move(grad);
    d_z += ln2.dx;

    // Attention branch: z = Concat(heads) Wo + x
    gp.wo = matmul_tn(lc.concat, d_z);
    Matrix d_concat = matmul_nt(d_z, lp.wo);
    Matrix d_normed(lc.normed.rows(), lc.normed.cols());
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      const HeadCache& hc = lc.heads[h];
      Matrix d_head = slice_cols(d_concat, h * dk, dk);
      Matrix d_attn = matmul_nt(d_head, hc.v);
      Matrix d_v = matmul_tn(hc.attn, d_head);
      Matrix d_logits = softmax_rows_grad(hc.attn, d_attn);
      d_logits *= scale;
      Matrix d_q = matmul(d_logits, hc.k);
      Matrix d_k = matmul_tn(d_logits, hc.q);
      gp.wq[h] = matmul_tn(lc.normed, d_q);
      gp.wk[h] = matmul_tn(lc.normed, d_k);
      gp.wv[h] = matmul_tn(lc.normed, d_v);
      d_normed += matmul_nt(d_q, lp.wq[h]);
      d_normed += matmul_nt(d_k, lp.wk[h]);
      d_normed += matmul_nt(d_v, lp.wv[h]);
    }
    LayerNormGrads ln1 = layer_norm_grad(lc.input, lp.ln_attn_gain, d_normed, cfg.ln_eps);
    gp.ln_attn_gain = std::move(ln1.dgain);
    gp.ln_attn_bias = std::move(ln1.dbias);
    d_z += ln1.dx;
    grad = std::move(d_z);
  }
  result.input_grad = std::move(grad);
  return result;
}

Matrix attention_single_head_reference(const Matrix& tokens) {
  const std::size_t n = tokens.rows(), d = tokens.cols();
  Matrix out(n, d);
  std::vector<double> logits(n), weights(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t m = 0; m < n; ++m) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += tokens(k, c) * tokens(m, c);
      logits[m] = dot;
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double denom = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      weights[m] = std::exp(logits[m] - mx);
      denom += weights[m];
    }
    for (std::size_t m = 0; m < n; ++m) {
      const double a = weights[m] / denom;
      for (std::size_t c = 0; c < d; ++c) out(k, c) += a * tokens(m, c);
    }
  }
  return out;
}

}  // namespace vagg
