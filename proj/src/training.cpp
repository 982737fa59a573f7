// SPDX-License-Identifier: Apache-2.0
#include "vagg/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numeric>
#include <random>
#include <utility>

#include "vagg/aggregator.hpp"
#include "vagg/errors.hpp"
#include "vagg/seed.hpp"

namespace vagg {

namespace {

enum SeedStream : std::uint64_t { kInitStream = 1, kPairStream = 2, kShuffleStream = 3 };

// Adds `src` into `dst` tensor by tensor (canonical order).
void accumulate(EncoderParams& dst, const EncoderParams& src) {
  std::vector<std::span<const double>> from;
  for_each_tensor(src, [&](const std::string&, std::span<const double> v, TensorKind) {
    from.push_back(v);
  });
  std::size_t i = 0;
  for_each_tensor(dst, [&](const std::string&, std::span<double> v, TensorKind) {
    const auto s = from[i++];
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += s[j];
  });
}

void scale(EncoderParams& p, double s) {
  for_each_tensor(p, [&](const std::string&, std::span<double> v, TensorKind) {
    for (double& x : v) x *= s;
  });
}

}  // namespace

void TrainConfig::validate() const {
  if (!(margin >= 0.0 && margin <= 1.0)) throw ValidationError("train config: margin must be in [0,1]");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("train config: learning rate must be >= 0");
  }
  if (!(weight_decay >= 0.0)) throw ValidationError("train config: weight decay must be >= 0");
  if (batch_size == 0) throw ValidationError("train config: batch size must be >= 1");
  if (impostors_per_genuine == 0) {
    throw ValidationError("train config: impostors per genuine must be >= 1");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("train config: adam betas must be in [0,1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("train config: adam eps must be positive");
}

LossResult cosine_embedding_loss(std::span<const double> video_rep,
                                 std::span<const double> still_rep, int label, double margin) {
  if (video_rep.size() != still_rep.size()) {
    throw ShapeError("cosine_embedding_loss: length mismatch");
  }
  if (label != 1 && label != -1) throw ValidationError("cosine_embedding_loss: label must be +-1");
  const std::size_t d = video_rep.size();
  double dot = 0.0, nr2 = 0.0, ns2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    dot += video_rep[i] * still_rep[i];
    nr2 += video_rep[i] * video_rep[i];
    ns2 += still_rep[i] * still_rep[i];
  }
  const double nr = std::sqrt(nr2), ns = std::sqrt(ns2);
  if (!(nr > kMinNorm) || !(ns > kMinNorm)) {
    throw ScoringError("cosine_embedding_loss: zero-norm representation");
  }
  const double cos = dot / (nr * ns);

  LossResult res;
  res.cosine = cos;
  res.grad_video.assign(d, 0.0);
  res.grad_still.assign(d, 0.0);
  double sign = 0.0;  // dLoss/dcos
  if (label == 1) {
    res.loss = 1.0 - cos;
    sign = -1.0;
  } else if (cos > margin) {
    res.loss = cos - margin;
    sign = 1.0;
  }
  if (sign != 0.0) {
    for (std::size_t i = 0; i < d; ++i) {
      res.grad_video[i] = sign * (still_rep[i] / (nr * ns) - cos * video_rep[i] / nr2);
      res.grad_still[i] = sign * (video_rep[i] / (nr * ns) - cos * still_rep[i] / ns2);
    }
  }
  return res;
}

std::vector<PairSample> build_pairs(const Dataset& subjects, const TrainConfig& cfg,
                                    std::uint64_t seed) {
  const std::size_t n = subjects.size();
  if (n < cfg.impostors_per_genuine + 1) {
    throw ValidationError("build_pairs: " + std::to_string(n) + " subjects, need at least " +
                          std::to_string(cfg.impostors_per_genuine + 1) + " for " +
                          std::to_string(cfg.impostors_per_genuine) + " impostors per genuine");
  }
  std::mt19937_64 rng(seed);
  std::vector<PairSample> pairs;
  pairs.reserve(n * (cfg.impostors_per_genuine + 1));
  std::vector<std::size_t> others;
  others.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    pairs.push_back({make_token_set(subjects[i], subjects[i]), 1});
    others.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) others.push_back(j);
    // Partial Fisher-Yates: the first `impostors_per_genuine` slots are a
    // uniform sample without replacement.
    for (std::size_t s = 0; s < cfg.impostors_per_genuine; ++s) {
      std::uniform_int_distribution<std::size_t> pick(s, others.size() - 1);
      std::swap(others[s], others[pick(rng)]);
      pairs.push_back({make_token_set(subjects[others[s]], subjects[i]), -1});
    }
  }
  return pairs;
}

OptimizerState OptimizerState::zeros(const EncoderConfig& cfg) {
  return {EncoderParams::zeros(cfg), EncoderParams::zeros(cfg), 0};
}

void adamw_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& state,
                const TrainConfig& cfg) {
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
  const double lr = cfg.learning_rate;

  std::vector<std::span<const double>> g;
  std::vector<std::span<double>> m, v;
  for_each_tensor(grads, [&](const std::string&, std::span<const double> s, TensorKind) {
    g.push_back(s);
  });
  for_each_tensor(state.m, [&](const std::string&, std::span<double> s, TensorKind) {
    m.push_back(s);
  });
  for_each_tensor(state.v, [&](const std::string&, std::span<double> s, TensorKind) {
    v.push_back(s);
  });
  std::size_t idx = 0;
  for_each_tensor(params, [&](const std::string& name, std::span<double> theta, TensorKind kind) {
    const auto gi = g.at(idx);
    const auto mi = m.at(idx);
    const auto vi = v.at(idx);
    ++idx;
    if (gi.size() != theta.size() || mi.size() != theta.size() || vi.size() != theta.size()) {
      throw ShapeError("adamw_step: shape mismatch at " + name);
    }
    const double decay = kind == TensorKind::weight ? lr * cfg.weight_decay : 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      mi[j] = cfg.adam_beta1 * mi[j] + (1.0 - cfg.adam_beta1) * gi[j];
      vi[j] = cfg.adam_beta2 * vi[j] + (1.0 - cfg.adam_beta2) * gi[j] * gi[j];
      const double mhat = mi[j] / bc1;
      const double vhat = vi[j] / bc2;
      theta[j] = theta[j] - lr * (mhat / (std::sqrt(vhat) + cfg.adam_eps)) - decay * theta[j];
    }
  });
  if (idx != g.size()) throw ShapeError("adamw_step: gradient tensor count mismatch");
}

PairGradient pair_loss_and_grad(const EncoderParams& params, const EncoderConfig& cfg,
                                const PairSample& pair, double margin) {
  const Matrix tokens = assemble_tokens(pair.tokens);
  ForwardResult fr = forward(params, cfg, tokens, true);
  Embedding video_rep, still_rep;
  split_representations(fr.output, video_rep, still_rep);
  const LossResult lr = cosine_embedding_loss(video_rep, still_rep, pair.label, margin);

  const std::size_t k = tokens.rows() - 1;
  Matrix upstream(tokens.rows(), cfg.dim);
  for (std::size_t c = 0; c < cfg.dim; ++c) {
    upstream(0, c) = lr.grad_still[c];
    const double g = lr.grad_video[c] / static_cast<double>(k);
    for (std::size_t r = 1; r <= k; ++r) upstream(r, c) = g;
  }
  BackwardResult br = backward(params, cfg, *fr.cache, upstream);
  return {lr.loss, std::move(br.grads)};
}

double pair_loss(const EncoderParams& params, const EncoderConfig& cfg, const PairSample& pair,
                 double margin) {
  const AggregateOutput out = aggregate(params, cfg, pair.tokens);
  return cosine_embedding_loss(out.video_rep, out.still_rep, pair.label, margin).loss;
}

TrainResult train(const Dataset& train_subjects, const EncoderConfig& enc,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  enc.validate();
  const auto pairs = build_pairs(train_subjects, cfg, derive_seed(cfg.seed, kPairStream));
  return train_pairs(pairs, init_params(enc, derive_seed(cfg.seed, kInitStream)), enc, cfg,
                     on_epoch);
}

TrainResult train_pairs(const std::vector<PairSample>& pairs, EncoderParams params,
                        const EncoderConfig& enc, const TrainConfig& cfg,
                        const EpochCallback& on_epoch) {
  cfg.validate();
  check_params(params, enc);
  if (pairs.empty()) throw ValidationError("train: no training pairs");
  for (const auto& p : pairs) {
    if (p.tokens.dim() != enc.dim) {
      throw ValidationError("train: embedding dim " + std::to_string(p.tokens.dim()) +
                            " != encoder dim " + std::to_string(enc.dim));
    }
  }

  TrainResult result;
  OptimizerState state = OptimizerState::zeros(enc);
  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, kShuffleStream));
  std::vector<std::size_t> order(pairs.size());
  std::vector<double> pair_losses(pairs.size(), 0.0);
  std::vector<PairGradient> slots(std::min(cfg.batch_size, pairs.size()));
  std::vector<std::exception_ptr> errors(slots.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t begin = 0, batch = 0; begin < order.size(); begin += cfg.batch_size, ++batch) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - begin);
      const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic)
      for (std::int64_t i = 0; i < n; ++i) {
        const auto s = static_cast<std::size_t>(i);
        try {
          slots[s] = pair_loss_and_grad(params, enc, pairs[order[begin + s]], cfg.margin);
        } catch (...) {
          errors[s] = std::current_exception();
        }
      }
      for (std::size_t s = 0; s < count; ++s) {
        if (!errors[s]) continue;
        const std::string where =
            "train: epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ": ";
        try {
          std::rethrow_exception(std::exchange(errors[s], nullptr));
        } catch (const NumericError& e) {
          throw NumericError(where + e.what());
        } catch (const ScoringError& e) {
          throw ScoringError(where + e.what());
        }
      }
      EncoderParams grad = std::move(slots[0].grads);
      double batch_loss = slots[0].loss;
      pair_losses[order[begin]] = slots[0].loss;
      for (std::size_t s = 1; s < count; ++s) {
        accumulate(grad, slots[s].grads);
        batch_loss += slots[s].loss;
        pair_losses[order[begin + s]] = slots[s].loss;
      }
      batch_loss /= static_cast<double>(count);
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train: epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch) + ": non-finite loss");
      }
      scale(grad, 1.0 / static_cast<double>(count));
      adamw_step(params, grad, state, cfg);
      ++result.steps;
    }

    // Summed in pair order so the trace does not depend on the shuffle.
    double epoch_loss = 0.0;
    for (double l : pair_losses) epoch_loss += l;
    epoch_loss /= static_cast<double>(pairs.size());
    result.epoch_losses.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace vagg
