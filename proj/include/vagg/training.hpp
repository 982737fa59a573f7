// SPDX-License-Identifier: Apache-2.0
//
// Metric-learning trainer: cosine embedding loss on (video, still) pairs,
// AdamW with decoupled weight decay, seeded epoch loop.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "vagg/encoder.hpp"
#include "vagg/tokens.hpp"

namespace vagg {

struct TrainConfig {
  double margin = 0.5;
  double learning_rate = 1e-5;
  double weight_decay = 1e-1;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::size_t impostors_per_genuine = 15;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  /// Throws ValidationError on out-of-range values. A zero learning rate is
  /// accepted (it freezes the parameters).
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct PairSample {
  TokenSet tokens;
  int label = 1;  // +1 genuine, -1 impostor
};

struct LossResult {
  double loss = 0.0;
  double cosine = 0.0;
  Embedding grad_video;
  Embedding grad_still;
};

/// 1 - cos(r, r_s) for y = +1; max(0, cos(r, r_s) - margin) for y = -1.
/// The hinge gradient at cos == margin is zero. Throws ScoringError on a
/// zero-norm input.
LossResult cosine_embedding_loss(std::span<const double> video_rep,
                                 std::span<const double> still_rep, int label, double margin);

/// Per subject, in dataset order: one genuine pair, then
/// `impostors_per_genuine` impostor pairs whose stills are drawn without
/// replacement from the other subjects.
std::vector<PairSample> build_pairs(const Dataset& subjects, const TrainConfig& cfg,
                                    std::uint64_t seed);

struct OptimizerState {
  EncoderParams m;
  EncoderParams v;
  std::uint64_t step = 0;

  static OptimizerState zeros(const EncoderConfig& cfg);
};

/// One AdamW update with bias-corrected moments. Decay touches weight
/// matrices only, not LN gains/biases or MLP biases.
void adamw_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& state,
                const TrainConfig& cfg);

struct PairGradient {
  double loss = 0.0;
  EncoderParams grads;
};

/// Loss and parameter gradients through encoder -> aggregate -> loss.
PairGradient pair_loss_and_grad(const EncoderParams& params, const EncoderConfig& cfg,
                                const PairSample& pair, double margin);

/// Scalar pipeline loss only (finite-difference oracle side).
double pair_loss(const EncoderParams& params, const EncoderConfig& cfg, const PairSample& pair,
                 double margin);

struct TrainResult {
  EncoderParams params;
  std::vector<double> epoch_losses;  // mean pair loss per epoch, pre-update
  std::size_t steps = 0;
};

/// Called after every epoch with (epoch index, mean loss).
using EpochCallback = std::function<void(std::size_t, double)>;

/// Trains from init_params(enc, cfg.seed). Pairs are built once; each epoch
/// reshuffles them, takes batch_size pairs at a time (the last batch may be
/// partial) and applies one AdamW step on the batch-mean loss. Per-pair
/// gradients are computed in parallel and reduced in pair order.
/// Throws NumericError (with epoch and batch) on a non-finite loss.
TrainResult train(const Dataset& train_subjects, const EncoderConfig& enc,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Same, continuing from explicit parameters over an explicit pair list.
TrainResult train_pairs(const std::vector<PairSample>& pairs, EncoderParams params,
                        const EncoderConfig& enc, const TrainConfig& cfg,
                        const EpochCallback& on_epoch = {});

}  // namespace vagg
