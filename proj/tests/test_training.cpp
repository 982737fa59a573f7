// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "vagg/aggregator.hpp"
#include "vagg/errors.hpp"
#include "vagg/gradcheck.hpp"
#include "vagg/seed.hpp"
#include "vagg/synthdata.hpp"
#include "vagg/training.hpp"

using namespace vagg;

namespace {

Dataset easy_data(std::size_t subjects, std::size_t dim, std::uint64_t seed) {
  GenConfig g;
  g.num_subjects = subjects;
  g.dim = dim;
  g.frames_per_video = 3;
  g.still_noise_sigma = 0.0;
  g.frame_noise_sigma = 0.0;
  g.corrupt_fraction = 0.0;
  g.seed = seed;
  return generate(g);
}

}  // namespace

TEST_CASE("default hyperparameters") {
  const TrainConfig c;
  CHECK(c.learning_rate == 1e-5);
  CHECK(c.weight_decay == 1e-1);
  CHECK(c.batch_size == 16);
  CHECK(c.epochs == 10);
  CHECK(c.margin == 0.5);
  CHECK(c.impostors_per_genuine == 15);
}

TEST_CASE("cosine embedding loss hand cases") {
  const std::vector<double> a{1, 2, 3}, b{3, 0, -1};
  CHECK(cosine_embedding_loss(a, a, 1, 0.5).loss == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_embedding_loss(a, b, -1, 0.5).loss == 0.0);
  CHECK(cosine_embedding_loss(a, a, -1, 0.5).loss == doctest::Approx(0.5));
  CHECK_THROWS_AS(cosine_embedding_loss(std::vector<double>{0, 0, 0}, a, 1, 0.5), ScoringError);

  // At the hinge boundary the gradient is defined as zero.
  const std::vector<double> x{1, 0}, y{0.5, std::sqrt(0.75)};
  const LossResult edge = cosine_embedding_loss(x, y, -1, cosine_similarity(x, y));
  CHECK(edge.grad_video == std::vector<double>{0, 0});
  CHECK(edge.grad_still == std::vector<double>{0, 0});
}

TEST_CASE("cosine embedding loss is non-negative with correct gradients") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto r = oracle::random_vector(6, rng), s = oracle::random_vector(6, rng);
    const int y = trial % 2 ? 1 : -1;
    const double margin = trial % 3 == 0 ? 0.0 : 0.5;
    const LossResult res = cosine_embedding_loss(r, s, y, margin);
    CHECK(res.loss >= 0.0);
    if (y == -1 && std::abs(res.cosine - margin) < 1e-4) continue;
    for (std::size_t i = 0; i < 6; ++i) {
      auto rp = r, rm = r;
      rp[i] += 1e-6;
      rm[i] -= 1e-6;
      const double fd = (cosine_embedding_loss(rp, s, y, margin).loss -
                         cosine_embedding_loss(rm, s, y, margin).loss) / 2e-6;
      CHECK(gradient_relative_error(res.grad_video[i], fd) < 1e-6);
    }
  }
}

TEST_CASE("build_pairs counts and exclusion") {
  TrainConfig cfg;
  const Dataset d300 = easy_data(300, 4, 1);
  const auto p300 = build_pairs(d300, cfg, 3);
  std::size_t gen = 0, imp = 0;
  for (const auto& p : p300) (p.label == 1 ? gen : imp)++;
  CHECK(gen == 300);
  CHECK(imp == 4500);

  const Dataset d16 = easy_data(16, 4, 2);
  const auto p16 = build_pairs(d16, cfg, 5);
  REQUIRE(p16.size() == 256);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(p16[i * 16].label == 1);
    CHECK(p16[i * 16].tokens.genuine());
    std::set<std::string> stills;
    for (std::size_t j = 1; j < 16; ++j) {
      const PairSample& s = p16[i * 16 + j];
      CHECK(s.label == -1);
      CHECK(s.tokens.video_subject == d16[i].id);
      CHECK(s.tokens.still_subject != d16[i].id);
      stills.insert(s.tokens.still_subject);
    }
    CHECK(stills.size() == 15);
  }

  const auto again = build_pairs(d16, cfg, 5);
  for (std::size_t i = 0; i < p16.size(); ++i) CHECK(again[i].tokens.still_subject == p16[i].tokens.still_subject);

  try {
    build_pairs(easy_data(15, 4, 1), cfg, 1);
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("15 subjects") != std::string::npos);
  }
}

TEST_CASE("adamw closed-form steps") {
  const EncoderConfig enc = EncoderConfig::make(4, 1, 1);
  TrainConfig cfg;
  EncoderParams theta = EncoderParams::zeros(enc);
  EncoderParams g = EncoderParams::zeros(enc);
  for_each_tensor(g, [](const std::string&, std::span<double> v, TensorKind) {
    for (double& x : v) x = 1.0;
  });
  OptimizerState st = OptimizerState::zeros(enc);
  adamw_step(theta, g, st, cfg);
  CHECK(st.step == 1);
  for_each_tensor(theta, [&](const std::string&, std::span<const double> v, TensorKind) {
    for (double x : v) CHECK(x == doctest::Approx(-1e-5 / (1.0 + 1e-8)).epsilon(1e-14));
  });

  EncoderParams p = init_params(enc, 3);
  for_each_tensor(p, [](const std::string&, std::span<double> v, TensorKind) {
    for (double& x : v) x = 2.0;
  });
  const EncoderParams before = p;
  OptimizerState st2 = OptimizerState::zeros(enc);
  adamw_step(p, EncoderParams::zeros(enc), st2, cfg);
  for_each_tensor(p, [&](const std::string& name, std::span<const double> v, TensorKind kind) {
    INFO(name);
    const double expect = kind == TensorKind::weight ? 2.0 * (1.0 - 1e-5 * 0.1) : 2.0;
    for (double x : v) CHECK(x == doctest::Approx(expect).epsilon(1e-15));
  });
  CHECK_FALSE(p == before);
}

TEST_CASE("adamw is deterministic") {
  const EncoderConfig enc = EncoderConfig::make(4, 2, 1);
  TrainConfig cfg;
  auto run = [&] {
    EncoderParams p = init_params(enc, 1);
    OptimizerState st = OptimizerState::zeros(enc);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n;
    for (int step = 0; step < 20; ++step) {
      EncoderParams g = EncoderParams::zeros(enc);
      for_each_tensor(g, [&](const std::string&, std::span<double> v, TensorKind) {
        for (double& x : v) x = n(rng);
      });
      adamw_step(p, g, st, cfg);
    }
    return p;
  };
  CHECK(run() == run());
}

TEST_CASE("zero learning rate freezes parameters") {
  const Dataset d = easy_data(16, 8, 4);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  const EncoderConfig enc = EncoderConfig::make(8, 2, 1);
  const TrainResult r = train(d, enc, cfg);
  CHECK(r.params == init_params(enc, derive_seed(cfg.seed, 1)));
  REQUIRE(r.epoch_losses.size() == 3);
  CHECK(r.epoch_losses[0] == r.epoch_losses[1]);
  CHECK(r.epoch_losses[1] == r.epoch_losses[2]);
}

TEST_CASE("partial batch is one step") {
  const Dataset d = easy_data(2, 8, 5);
  const EncoderConfig enc = EncoderConfig::make(8, 2, 1);
  TrainConfig cfg;
  cfg.epochs = 1;
  const std::vector<PairSample> one{{make_token_set(d[0], d[0]), 1}};
  const TrainResult r = train_pairs(one, init_params(enc, 1), enc, cfg);
  CHECK(r.steps == 1);
  CHECK(r.epoch_losses.size() == 1);
}

TEST_CASE("training reduces loss and is reproducible") {
  GenConfig g;
  g.num_subjects = 24;
  g.seed = 3;
  const Dataset d = generate(g);
  const EncoderConfig enc = EncoderConfig::make(32, 4, 2);
  TrainConfig cfg;
  cfg.seed = 9;
  const TrainResult a = train(d, enc, cfg);
  CHECK(a.epoch_losses.size() == 10);
  CHECK(a.epoch_losses.back() < a.epoch_losses.front());
  CHECK(a.steps == 10 * ((24 * 16 + 15) / 16));
  const TrainResult b = train(d, enc, cfg);
  CHECK(a.params == b.params);
  CHECK(a.epoch_losses == b.epoch_losses);
}

TEST_CASE("training converges on trivially separable data") {
  const Dataset d = easy_data(16, 16, 6);
  const EncoderConfig enc = EncoderConfig::make(16, 2, 1);
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.epochs = 60;
  cfg.seed = 2;
  const TrainResult r = train(d, enc, cfg);
  for (const PairSample& p : build_pairs(d, cfg, derive_seed(cfg.seed, 2))) {
    const double s = score_v2s(r.params, enc, p.tokens);
    if (p.label == 1) {
      CHECK(s > 1.0 - 1e-2);
    } else {
      CHECK(s < cfg.margin);
    }
  }
}

TEST_CASE("training errors") {
  const Dataset d = easy_data(16, 8, 7);
  TrainConfig cfg;
  CHECK_THROWS_AS(train(d, EncoderConfig::make(16, 2, 1), cfg), ValidationError);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(d, EncoderConfig::make(8, 2, 1), cfg), ValidationError);

  const EncoderConfig enc = EncoderConfig::make(8, 2, 1);
  EncoderParams blown = init_params(enc, 1);
  blown.layers[0].w2.fill(1e306);
  TrainConfig ok;
  const std::vector<PairSample> pairs{{make_token_set(d[0], d[0]), 1}, {make_token_set(d[1], d[0]), -1}};
  try {
    train_pairs(pairs, blown, enc, ok);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch 0, batch 0") != std::string::npos);
  }
}

TEST_CASE("full pipeline gradients") {
  GradCheckOptions opt;
  opt.seed = 5;
  opt.seeds = 10;
  for (const auto& e : check_pipeline_grads(opt).entries) {
    INFO(e.group << " " << e.max_rel_error);
    CHECK(e.pass);
  }
}
