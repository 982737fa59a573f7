// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats.
//
// Dataset (JSON Lines, one record per line):
//   {"subject":"s0001","kind":"still","values":[...]}
//   {"subject":"s0001","kind":"frame","video":"s0001_v0","frame":3,"corrupted":false,"values":[...]}
// "corrupted" is optional. Each subject needs exactly one still and one video.
//
// Checkpoint: a JSON manifest plus a raw blob of little-endian IEEE-754
// doubles holding every encoder tensor in for_each_tensor order (layer-major;
// per head wq, wk, wv; wo; ln_attn gain, bias; ln_mlp gain, bias; w1, b1,
// w2, b2; each matrix row-major).
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vagg/encoder.hpp"
#include "vagg/tokens.hpp"
#include "vagg/training.hpp"

namespace vagg {

void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);

void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  EncoderConfig encoder;
  TrainConfig train;
  std::vector<double> loss_trace;
  double train_fraction = 0.3;
  std::uint64_t split_seed = 0;
  EncoderParams params;
};

/// Blob bytes for `params` (canonical order, little-endian).
std::vector<unsigned char> encode_params(const EncoderParams& params);
/// Fills `cfg`-shaped params from a blob; throws ValidationError on a length
/// mismatch.
EncoderParams decode_params(const std::vector<unsigned char>& blob, const EncoderConfig& cfg);

/// Blob path next to a manifest: "<stem>.bin".
std::filesystem::path blob_path_for(const std::filesystem::path& manifest);

void save_checkpoint(const std::filesystem::path& manifest, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& manifest);

/// Shortest-round-trip-safe text for CSV: 17 significant digits, '.' decimal.
std::string format_double(double v);

}  // namespace vagg
