// SPDX-License-Identifier: Apache-2.0
//
// Synthetic still/video embeddings. Each subject owns a unit identity
// direction; the still and the clean frames are that direction plus isotropic
// gaussian noise, and a seeded subset of frames per video is corrupted.
#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "vagg/tokens.hpp"

namespace vagg {

enum class CorruptMode {
  gaussian_blast,  // pure noise rescaled to the replaced frame's norm
  zero_out,        // near-zero vector (tiny jitter)
  off_identity,    // a different random direction plus frame noise
};

std::string to_string(CorruptMode mode);
/// Accepts "gaussian-blast", "zero-out", "off-identity".
CorruptMode parse_corrupt_mode(const std::string& name);

struct GenConfig {
  std::size_t num_subjects = 120;
  std::size_t frames_per_video = 8;
  std::size_t dim = 32;
  double still_noise_sigma = 0.2;
  double frame_noise_sigma = 0.2;
  double corrupt_fraction = 0.5;
  CorruptMode corrupt_mode = CorruptMode::off_identity;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Jitter scale used by CorruptMode::zero_out.
inline constexpr double kZeroOutJitter = 1e-4;

/// Number of corrupted frames per video: floor(corrupt_fraction * K).
std::size_t corrupted_frame_count(const GenConfig& cfg);

/// Deterministic in cfg.seed; subjects are generated from per-subject derived
/// seeds so the result does not depend on thread count.
Dataset generate(const GenConfig& cfg);

/// Subject-disjoint (train, test) split with round(train_fraction * n) train
/// subjects. Both halves keep dataset order.
std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed);

}  // namespace vagg
