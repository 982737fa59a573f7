// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "vagg/aggregator.hpp"
#include "vagg/errors.hpp"
#include "vagg/synthdata.hpp"

using namespace vagg;

namespace {

double norm(const Embedding& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

}  // namespace

TEST_CASE("noise-free generation collapses to the identity direction") {
  GenConfig g;
  g.still_noise_sigma = g.frame_noise_sigma = 0.0;
  g.corrupt_fraction = 0.0;
  g.num_subjects = 10;
  const Dataset d = generate(g);
  for (const Subject& s : d) {
    CHECK(std::abs(norm(s.still) - 1.0) < 1e-12);
    for (const auto& f : s.frames) CHECK(f == s.still);
    CHECK(std::count(s.corrupted.begin(), s.corrupted.end(), true) == 0);
  }
}

TEST_CASE("generation is deterministic and shaped by the config") {
  GenConfig g;
  g.seed = 7;
  const Dataset a = generate(g), b = generate(g);
  CHECK(a == b);
  REQUIRE(a.size() == 120);
  CHECK(a.front().id == "s0000");
  for (const Subject& s : a) {
    CHECK(s.still.size() == 32);
    CHECK(s.frames.size() == 8);
    CHECK(std::count(s.corrupted.begin(), s.corrupted.end(), true) == 4);
  }
  g.seed = 8;
  CHECK_FALSE(generate(g) == a);
}

TEST_CASE("corruption counts per mode") {
  for (const char* mode : {"gaussian-blast", "zero-out", "off-identity"}) {
    for (double cf : {0.0, 0.3, 0.7, 1.0}) {
      GenConfig g;
      g.num_subjects = 5;
      g.frames_per_video = 10;
      g.corrupt_fraction = cf;
      g.corrupt_mode = parse_corrupt_mode(mode);
      CHECK(to_string(g.corrupt_mode) == mode);
      const std::size_t expect = static_cast<std::size_t>(std::floor(cf * 10 + 1e-9));
      CHECK(corrupted_frame_count(g) == expect);
      GenConfig clean = g;
      clean.corrupt_fraction = 0.0;
      const Dataset d = generate(g), c = generate(clean);
      for (std::size_t i = 0; i < d.size(); ++i) {
        std::size_t altered = 0;
        for (std::size_t k = 0; k < 10; ++k) {
          altered += d[i].frames[k] != c[i].frames[k] ? 1 : 0;
          if (d[i].corrupted[k] && g.corrupt_mode == CorruptMode::gaussian_blast) {
            CHECK(std::abs(norm(d[i].frames[k]) - norm(c[i].frames[k])) < 1e-12);
          }
          if (d[i].corrupted[k] && g.corrupt_mode == CorruptMode::zero_out) {
            CHECK(norm(d[i].frames[k]) < 1e-2);
          }
        }
        CHECK(altered == expect);
      }
    }
  }
  CHECK_THROWS_AS(parse_corrupt_mode("blur"), ValidationError);
}

TEST_CASE("fully corrupted off-identity videos carry no identity signal") {
  GenConfig g;
  g.num_subjects = 200;
  g.corrupt_fraction = 1.0;
  g.frame_noise_sigma = 0.0;
  g.still_noise_sigma = 0.0;
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const Subject& s : generate(g))
    for (const auto& f : s.frames) {
      const double c = cosine_similarity(f, s.still);
      sum += c;
      sq += c * c;
      ++n;
    }
  const double mean = sum / static_cast<double>(n);
  // Random directions in D=32: cosine has sd ~ 1/sqrt(32).
  CHECK(std::abs(mean) < 4.0 / std::sqrt(32.0 * static_cast<double>(n)));
  CHECK(sq / static_cast<double>(n) < 2.0 / 32.0);
}

TEST_CASE("clean frames are closer to their own subject") {
  GenConfig g;
  g.num_subjects = 100;
  g.corrupt_fraction = 0.0;
  g.still_noise_sigma = g.frame_noise_sigma = 0.05;
  const Dataset d = generate(g);
  double same = 0.0, cross = 0.0;
  std::size_t ns = 0, nc = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t a = 0; a < 8; ++a)
      for (std::size_t b = a + 1; b < 8; ++b, ++ns) same += cosine_similarity(d[i].frames[a], d[i].frames[b]);
    const Subject& o = d[(i + 1) % d.size()];
    for (std::size_t a = 0; a < 8; ++a, ++nc) cross += cosine_similarity(d[i].frames[a], o.frames[a]);
  }
  CHECK(same / static_cast<double>(ns) > cross / static_cast<double>(nc) + 0.5);
}

TEST_CASE("generator config validation") {
  GenConfig g;
  g.corrupt_fraction = 1.5;
  CHECK_THROWS_AS(generate(g), ValidationError);
  g = GenConfig{};
  g.frame_noise_sigma = -1.0;
  CHECK_THROWS_AS(generate(g), ValidationError);
  g = GenConfig{};
  g.frames_per_video = 0;
  CHECK_THROWS_AS(generate(g), ValidationError);
}

TEST_CASE("split") {
  GenConfig g;
  g.num_subjects = 1000;
  g.dim = 2;
  g.frames_per_video = 1;
  const Dataset d = generate(g);
  const auto [tr, te] = split(d, 0.3, 5);
  CHECK(tr.size() == 300);
  CHECK(te.size() == 700);
  std::set<std::string> a, b;
  for (const auto& s : tr) a.insert(s.id);
  for (const auto& s : te) b.insert(s.id);
  for (const auto& id : a) CHECK(b.count(id) == 0);
  CHECK(a.size() + b.size() == 1000);

  const auto again = split(d, 0.3, 5);
  CHECK(again.first == tr);
  CHECK_FALSE(split(d, 0.3, 6).first == tr);
  CHECK(split(d, 0.0, 1).first.empty());
  CHECK_THROWS_AS(split(d, 1.2, 1), ValidationError);
}
