// SPDX-License-Identifier: Apache-2.0
#include "vagg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>

#include "vagg/errors.hpp"
#include "vagg/seed.hpp"

namespace vagg {

namespace {

Embedding random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Embedding v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = n01(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

Embedding noisy(const Embedding& base, double sigma, std::mt19937_64& rng) {
  Embedding v = base;
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (double& x : v) x += noise(rng);
  }
  return v;
}

double norm_of(const Embedding& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::string subject_name(std::size_t i, std::size_t total) {
  std::string digits = std::to_string(i);
  const std::size_t width = std::max<std::size_t>(4, std::to_string(total).size());
  return "s" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace

std::string to_string(CorruptMode mode) {
  switch (mode) {
    case CorruptMode::gaussian_blast: return "gaussian-blast";
    case CorruptMode::zero_out: return "zero-out";
    case CorruptMode::off_identity: return "off-identity";
  }
  return "unknown";
}

CorruptMode parse_corrupt_mode(const std::string& name) {
  if (name == "gaussian-blast") return CorruptMode::gaussian_blast;
  if (name == "zero-out") return CorruptMode::zero_out;
  if (name == "off-identity") return CorruptMode::off_identity;
  throw ValidationError("unknown corrupt mode '" + name +
                        "' (expected gaussian-blast, zero-out or off-identity)");
}

void GenConfig::validate() const {
  if (num_subjects == 0 || frames_per_video == 0 || dim == 0) {
    throw ValidationError("gen config: subjects, frames and dim must be >= 1");
  }
  if (!(still_noise_sigma >= 0.0) || !(frame_noise_sigma >= 0.0)) {
    throw ValidationError("gen config: noise sigmas must be >= 0");
  }
  if (!(corrupt_fraction >= 0.0 && corrupt_fraction <= 1.0)) {
    throw ValidationError("gen config: corrupt fraction must be in [0,1]");
  }
}

std::size_t corrupted_frame_count(const GenConfig& cfg) {
  // The small nudge keeps e.g. 0.7 * 10 from flooring to 6.
  return static_cast<std::size_t>(
      std::floor(cfg.corrupt_fraction * static_cast<double>(cfg.frames_per_video) + 1e-9));
}

Dataset generate(const GenConfig& cfg) {
  cfg.validate();
  const std::size_t k = cfg.frames_per_video;
  const std::size_t n_bad = corrupted_frame_count(cfg);
  Dataset data(cfg.num_subjects);
  const auto n = static_cast<std::int64_t>(cfg.num_subjects);
#pragma omp parallel for schedule(static)
  for (std::int64_t si = 0; si < n; ++si) {
    const auto i = static_cast<std::size_t>(si);
    std::mt19937_64 rng(derive_seed(cfg.seed, i));
    Subject& s = data[i];
    s.id = subject_name(i, cfg.num_subjects);
    const Embedding direction = random_unit(cfg.dim, rng);
    s.still = noisy(direction, cfg.still_noise_sigma, rng);
    s.frames.reserve(k);
    for (std::size_t f = 0; f < k; ++f) s.frames.push_back(noisy(direction, cfg.frame_noise_sigma, rng));

    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    s.corrupted.assign(k, false);
    for (std::size_t c = 0; c < n_bad; ++c) {
      Embedding& frame = s.frames[idx[c]];
      s.corrupted[idx[c]] = true;
      switch (cfg.corrupt_mode) {
        case CorruptMode::gaussian_blast: {
          const double target = norm_of(frame);
          Embedding blast = random_unit(cfg.dim, rng);
          for (double& x : blast) x *= target;
          frame = std::move(blast);
          break;
        }
        case CorruptMode::zero_out: {
          std::normal_distribution<double> jitter(0.0, kZeroOutJitter);
          for (double& x : frame) x = jitter(rng);
          break;
        }
        case CorruptMode::off_identity:
          frame = noisy(random_unit(cfg.dim, rng), cfg.frame_noise_sigma, rng);
          break;
      }
    }
  }
  return data;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw ValidationError("split: train fraction must be in [0,1]");
  }
  const std::size_t n = data.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[idx[i]] = true;
  std::pair<Dataset, Dataset> out;
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? out.first : out.second).push_back(data[i]);
  return out;
}

}  // namespace vagg
