// SPDX-License-Identifier: Apache-2.0
//
// Video-to-still scoring: the transformer aggregator and the naive pooling
// baselines it is compared against.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vagg/encoder.hpp"
#include "vagg/tokens.hpp"

namespace vagg {

struct AggregateOutput {
  Embedding video_rep;  // mean of the encoded frame tokens
  Embedding still_rep;  // encoded still token
  AttentionWeights attention;
};

AggregateOutput aggregate(const EncoderParams& params, const EncoderConfig& cfg,
                          const TokenSet& ts);

/// Representations r, r_s from an encoder output (row 0 still, rows 1.. frames).
void split_representations(const Matrix& encoded, Embedding& video_rep, Embedding& still_rep);

/// Cosine similarity; throws ScoringError when either norm is (numerically) zero.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Norms at or below this are treated as zero by cosine_similarity.
inline constexpr double kMinNorm = 1e-12;

double score_v2s(const EncoderParams& params, const EncoderConfig& cfg, const TokenSet& ts);

/// Cosine between the mean frame and the still.
double baseline_average_pool(const TokenSet& ts);
/// Cosine between the element-wise max over frames and the still.
double baseline_max_pool(const TokenSet& ts);
/// Cosine between one uniformly drawn frame and the still.
double baseline_random(const TokenSet& ts, std::uint64_t seed);
/// Mean over frames of cosine(frame, still).
double baseline_pairwise(const TokenSet& ts);

/// The frame index baseline_random uses for `frames` frames and `seed`.
std::size_t random_frame_index(std::size_t frames, std::uint64_t seed);

Embedding mean_pool(const std::vector<Embedding>& frames);
Embedding max_pool(const std::vector<Embedding>& frames);

struct FrameWeight {
  std::size_t frame;  // 0-based index into TokenSet::frames
  double weight;
};

/// Weights the still token assigns to each frame in the last layer, averaged
/// over heads, sorted descending (stable, so ties keep frame order).
std::vector<FrameWeight> export_attention_weights(const AggregateOutput& out);

}  // namespace vagg
