// SPDX-License-Identifier: Apache-2.0
#include "vagg/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vagg/errors.hpp"

namespace vagg {

namespace {

// Sum whose result does not depend on the order of `v` (sorted accumulation).
double order_free_sum(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

void TokenSet::validate() const {
  if (frames.empty()) throw ValidationError("token set: video has no frames");
  if (still.empty()) throw ValidationError("token set: empty still embedding");
  auto finite = [](const Embedding& e) {
    return std::all_of(e.begin(), e.end(), [](double v) { return std::isfinite(v); });
  };
  if (!finite(still)) throw ValidationError("token set: non-finite still embedding");
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (frames[k].size() != still.size()) {
      throw ShapeError("token set: frame " + std::to_string(k) + " has dim " +
                       std::to_string(frames[k].size()) + ", still has " +
                       std::to_string(still.size()));
    }
    if (!finite(frames[k])) {
      throw ValidationError("token set: non-finite frame " + std::to_string(k));
    }
  }
}

TokenSet make_token_set(const Subject& still_owner, const Subject& video_owner) {
  return {still_owner.still, video_owner.frames, still_owner.id, video_owner.id};
}

Matrix assemble_tokens(const TokenSet& ts) {
  ts.validate();
  const std::size_t d = ts.dim();
  Matrix m(ts.frames.size() + 1, d);
  std::copy(ts.still.begin(), ts.still.end(), m.row(0).begin());
  for (std::size_t k = 0; k < ts.frames.size(); ++k)
    std::copy(ts.frames[k].begin(), ts.frames[k].end(), m.row(k + 1).begin());
  return m;
}

TokenSet disassemble_tokens(const Matrix& tokens) {
  if (tokens.rows() < 2) throw ShapeError("disassemble_tokens: need a still and >= 1 frame");
  TokenSet ts;
  ts.still.assign(tokens.row(0).begin(), tokens.row(0).end());
  for (std::size_t r = 1; r < tokens.rows(); ++r)
    ts.frames.emplace_back(tokens.row(r).begin(), tokens.row(r).end());
  return ts;
}

void split_representations(const Matrix& encoded, Embedding& video_rep, Embedding& still_rep) {
  const std::size_t d = encoded.cols();
  const std::size_t k = encoded.rows() - 1;
  still_rep.assign(encoded.row(0).begin(), encoded.row(0).end());
  video_rep.assign(d, 0.0);
  std::vector<double> column(k);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t r = 0; r < k; ++r) column[r] = encoded(r + 1, c);
    video_rep[c] = order_free_sum(column) / static_cast<double>(k);
  }
}

AggregateOutput aggregate(const EncoderParams& params, const EncoderConfig& cfg,
                          const TokenSet& ts) {
  ForwardResult fr = forward(params, cfg, assemble_tokens(ts), false);
  AggregateOutput out;
  split_representations(fr.output, out.video_rep, out.still_rep);
  out.attention = std::move(fr.attention);
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (!(na > kMinNorm) || !(nb > kMinNorm)) {
    throw ScoringError("cosine_similarity: zero-norm representation");
  }
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

double score_v2s(const EncoderParams& params, const EncoderConfig& cfg, const TokenSet& ts) {
  const AggregateOutput out = aggregate(params, cfg, ts);
  return cosine_similarity(out.video_rep, out.still_rep);
}

Embedding mean_pool(const std::vector<Embedding>& frames) {
  Embedding m(frames.front().size(), 0.0);
  std::vector<double> column(frames.size());
  for (std::size_t c = 0; c < m.size(); ++c) {
    for (std::size_t k = 0; k < frames.size(); ++k) column[k] = frames[k][c];
    m[c] = order_free_sum(column) / static_cast<double>(frames.size());
  }
  return m;
}

Embedding max_pool(const std::vector<Embedding>& frames) {
  Embedding m = frames.front();
  for (const auto& f : frames)
    for (std::size_t c = 0; c < m.size(); ++c) m[c] = std::max(m[c], f[c]);
  return m;
}

double baseline_average_pool(const TokenSet& ts) {
  ts.validate();
  return cosine_similarity(mean_pool(ts.frames), ts.still);
}

double baseline_max_pool(const TokenSet& ts) {
  ts.validate();
  return cosine_similarity(max_pool(ts.frames), ts.still);
}

std::size_t random_frame_index(std::size_t frames, std::uint64_t seed) {
  if (frames == 0) throw ValidationError("random_frame_index: no frames");
  std::mt19937_64 rng(seed);
  return std::uniform_int_distribution<std::size_t>(0, frames - 1)(rng);
}

double baseline_random(const TokenSet& ts, std::uint64_t seed) {
  ts.validate();
  return cosine_similarity(ts.frames[random_frame_index(ts.frames.size(), seed)], ts.still);
}

double baseline_pairwise(const TokenSet& ts) {
  ts.validate();
  std::vector<double> scores;
  scores.reserve(ts.frames.size());
  for (const auto& f : ts.frames) scores.push_back(cosine_similarity(f, ts.still));
  return order_free_sum(scores) / static_cast<double>(ts.frames.size());
}

std::vector<FrameWeight> export_attention_weights(const AggregateOutput& out) {
  if (out.attention.empty() || out.attention.back().empty()) {
    throw ValidationError("export_attention_weights: no attention recorded");
  }
  const auto& last = out.attention.back();
  const std::size_t tokens = last.front().cols();
  std::vector<FrameWeight> w;
  w.reserve(tokens - 1);
  for (std::size_t m = 1; m < tokens; ++m) {
    double sum = 0.0;
    for (const Matrix& head : last) sum += head(0, m);
    w.push_back({m - 1, sum / static_cast<double>(last.size())});
  }
  std::stable_sort(w.begin(), w.end(),
                   [](const FrameWeight& a, const FrameWeight& b) { return a.weight > b.weight; });
  return w;
}

}  // namespace vagg
