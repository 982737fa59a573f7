// SPDX-License-Identifier: Apache-2.0
//
// Verification (TAR@FAR, DET) and identification (rank lists, CMC) metrics,
// plus the video-to-still protocol driver that applies them to any scorer.
#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vagg/tokens.hpp"

namespace vagg {

struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

struct TarResult {
  double tar = 0.0;
  double threshold = 0.0;  // +inf when no observed score qualifies
};

/// Threshold t is the smallest value among all observed scores (genuine and
/// impostor) and +inf with fraction(impostor >= t) <= far_target;
/// TAR = fraction(genuine >= t).
/// Scores equal to the threshold are accepted.
TarResult tar_at_far(const ScoreSet& scores, double far_target);

struct DetPoint {
  double far = 0.0;
  double frr = 0.0;
  friend bool operator==(const DetPoint&, const DetPoint&) = default;
};

/// Operating points at +inf and every distinct observed score, in increasing
/// FAR order. Starts at (0, 1) and ends at (1, 0). Consecutive duplicates are
/// collapsed.
std::vector<DetPoint> det_curve(const ScoreSet& scores);

struct GalleryEntry {
  std::string id;
  Embedding still;
};

/// Scores a TokenSet. `video_seed` identifies the query video so stochastic
/// scorers stay consistent across gallery entries.
using ScoreFn = std::function<double(const TokenSet&, std::uint64_t video_seed)>;

struct Scorer {
  std::string name;
  ScoreFn score;
};

/// Gallery ids by descending score; ties by gallery index; entries whose
/// scoring throws come last in gallery order.
std::vector<std::string> identify(const std::vector<Embedding>& query_frames,
                                  const std::string& query_subject,
                                  const std::vector<GalleryEntry>& gallery, const Scorer& scorer,
                                  std::uint64_t video_seed = 0);

/// Orders gallery indices from one row of scores (NaN marks a failed entry).
std::vector<std::size_t> rank_gallery(const std::vector<double>& scores);

/// 1-based position of `true_id` in `ranked`, or nullopt when absent.
std::optional<std::size_t> rank_of(const std::vector<std::string>& ranked,
                                   const std::string& true_id);

struct CmcResult {
  std::vector<std::pair<std::size_t, double>> points;  // (rank, cumulative accuracy)
  std::map<std::size_t, double> rank_accuracy;
};

/// Cumulative match characteristic for N = 1..max_rank from the 1-based rank
/// of the correct identity per query (nullopt = never retrieved).
CmcResult cmc(const std::vector<std::optional<std::size_t>>& correct_ranks, std::size_t max_rank);

struct EvalOptions {
  std::vector<double> far_targets{1e-3, 1e-2, 1e-1};
  std::vector<std::size_t> report_ranks{1, 5};
  /// Cap on impostor pairings; 0 = every cross-subject pairing.
  std::size_t impostor_cap = 0;
  std::size_t max_rank = 0;  // 0 = gallery size
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::string method;
  std::map<double, TarResult> tar_at_far;
  std::vector<DetPoint> det;
  std::map<std::size_t, double> rank_accuracy;
  std::vector<std::pair<std::size_t, double>> cmc;
  std::size_t genuine_pairs = 0;
  std::size_t impostor_pairs = 0;
  std::size_t scoring_errors = 0;
  ScoreSet scores;
};

/// Every subject's video is scored against every subject's still (the full
/// similarity matrix, computed in parallel). Verification uses the diagonal
/// as genuine pairs and the off-diagonal (optionally seeded-subsampled) as
/// impostors; identification ranks each row against the still gallery. All
/// scorers see the same pairing list.
std::vector<EvalReport> evaluate_v2s(const Dataset& test_subjects,
                                     const std::vector<Scorer>& scorers,
                                     const EvalOptions& options = {});

/// Off-diagonal (video, still) index pairs used for verification.
std::vector<std::pair<std::size_t, std::size_t>> impostor_pairings(std::size_t subjects,
                                                                   std::size_t cap,
                                                                   std::uint64_t seed);

}  // namespace vagg
