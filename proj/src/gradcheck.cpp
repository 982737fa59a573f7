// SPDX-License-Identifier: Apache-2.0
#include "vagg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "vagg/aggregator.hpp"
#include "vagg/numkernel.hpp"
#include "vagg/seed.hpp"
#include "vagg/training.hpp"

namespace vagg {

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double sigma = 1.0) {
  std::normal_distribution<double> n(0.0, sigma);
  Matrix m(r, c);
  for (double& v : m.values()) v = n(rng);
  return m;
}

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double mean = 0.0) {
  std::normal_distribution<double> d(mean, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

double weighted_sum(const Matrix& m, const Matrix& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.values()[i] * w.values()[i];
  return s;
}

// Compares `analytic` against central differences of `loss` while nudging
// each entry of `values` in place.
class Checker {
 public:
  Checker(const GradCheckOptions& opt, GradCheckReport& report) : opt_(opt), report_(report) {}

  void check(const std::string& group, std::span<double> values,
             std::span<const double> analytic, const std::function<double()>& loss) {
    auto it = std::find_if(report_.entries.begin(), report_.entries.end(),
                           [&](const GradCheckEntry& e) { return e.group == group; });
    if (it == report_.entries.end()) {
      report_.entries.push_back({group, 0, 0.0, true});
      it = report_.entries.end() - 1;
    }
    const bool faulty =
        !opt_.inject_fault.empty() && group.find(opt_.inject_fault) != std::string::npos;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + opt_.step;
      const double up = loss();
      values[j] = saved - opt_.step;
      const double down = loss();
      values[j] = saved;
      const double numeric = (up - down) / (2.0 * opt_.step);
      double a = analytic[j];
      if (faulty && j == 0) a += 1e-2 * (1.0 + std::abs(a));
      const double err = gradient_relative_error(a, numeric);
      it->max_rel_error = std::max(it->max_rel_error, err);
      it->checked += 1;
      if (!(err < opt_.tolerance)) it->pass = false;
    }
  }

 private:
  const GradCheckOptions& opt_;
  GradCheckReport& report_;
};

// Flattened views over two same-shaped parameter sets.
struct TensorViews {
  std::vector<std::string> names;
  std::vector<std::span<double>> values;
  std::vector<std::span<const double>> grads;
};

TensorViews views(EncoderParams& params, const EncoderParams& grads) {
  TensorViews tv;
  for_each_tensor(params, [&](const std::string& name, std::span<double> v, TensorKind) {
    tv.names.push_back(name);
    tv.values.push_back(v);
  });
  for_each_tensor(grads, [&](const std::string&, std::span<const double> v, TensorKind) {
    tv.grads.push_back(v);
  });
  return tv;
}

// Perturb every tensor so LN gains/biases are exercised away from init.
EncoderParams random_params(const EncoderConfig& cfg, std::uint64_t seed) {
  EncoderParams p = init_params(cfg, seed);
  std::mt19937_64 rng(derive_seed(seed, 99));
  std::normal_distribution<double> n(0.0, 0.3);
  for_each_tensor(p, [&](const std::string&, std::span<double> v, TensorKind) {
    for (double& x : v) x += n(rng);
  });
  return p;
}

}  // namespace

double gradient_relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

bool GradCheckReport::pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradCheckEntry& e) { return e.pass; });
}

GradCheckReport check_numkernel_grads(const GradCheckOptions& opt) {
  GradCheckReport report{opt.tolerance, {}};
  Checker checker(opt, report);
  for (std::size_t s = 0; s < opt.seeds; ++s) {
    std::mt19937_64 rng(derive_seed(opt.seed, 1000 + s));

    Matrix a = random_matrix(3, 4, rng), b = random_matrix(4, 5, rng);
    const Matrix wm = random_matrix(3, 5, rng);
    const MatmulGrads mg = matmul_grad(a, b, wm);
    auto mm_loss = [&] { return weighted_sum(matmul(a, b), wm); };
    checker.check("numkernel.matmul.da", a.values(), mg.da.values(), mm_loss);
    checker.check("numkernel.matmul.db", b.values(), mg.db.values(), mm_loss);

    Matrix x = random_matrix(4, 6, rng, 2.0);
    const Matrix ws = random_matrix(4, 6, rng);
    const Matrix sg = softmax_rows_grad(softmax_rows(x), ws);
    checker.check("numkernel.softmax_rows", x.values(), sg.values(),
                  [&] { return weighted_sum(softmax_rows(x), ws); });

    Matrix ln_x = random_matrix(3, 7, rng, 1.5);
    std::vector<double> gain = random_vector(7, rng, 1.0), bias = random_vector(7, rng);
    const Matrix wl = random_matrix(3, 7, rng);
    const LayerNormGrads lg = layer_norm_grad(ln_x, gain, wl);
    auto ln_loss = [&] { return weighted_sum(layer_norm(ln_x, gain, bias), wl); };
    checker.check("numkernel.layer_norm.dx", ln_x.values(), lg.dx.values(), ln_loss);
    checker.check("numkernel.layer_norm.dgain", gain, lg.dgain, ln_loss);
    checker.check("numkernel.layer_norm.dbias", bias, lg.dbias, ln_loss);
  }
  return report;
}

GradCheckReport check_encoder_grads(const GradCheckOptions& opt) {
  GradCheckReport report{opt.tolerance, {}};
  Checker checker(opt, report);
  const EncoderConfig& cfg = opt.encoder;
  for (std::size_t s = 0; s < opt.seeds; ++s) {
    const std::uint64_t seed = derive_seed(opt.seed, 2000 + s);
    std::mt19937_64 rng(seed);
    EncoderParams params = random_params(cfg, seed);
    Matrix tokens = random_matrix(opt.frames + 1, cfg.dim, rng);

    auto loss = [&] {
      const Matrix out = forward(params, cfg, tokens).output;
      double sum = 0.0;
      for (double v : out.values()) sum += v;
      return sum;
    };
    const ForwardResult fr = forward(params, cfg, tokens, true);
    const BackwardResult br =
        backward(params, cfg, *fr.cache, Matrix(tokens.rows(), cfg.dim, 1.0));

    TensorViews tv = views(params, br.grads);
    for (std::size_t t = 0; t < tv.names.size(); ++t)
      checker.check("encoder." + tv.names[t], tv.values[t], tv.grads[t], loss);
    checker.check("encoder.input", tokens.values(), br.input_grad.values(), loss);
  }
  return report;
}

GradCheckReport check_pipeline_grads(const GradCheckOptions& opt) {
  GradCheckReport report{opt.tolerance, {}};
  Checker checker(opt, report);
  const EncoderConfig& cfg = opt.encoder;
  const double margin = 0.5;
  for (std::size_t s = 0; s < opt.seeds; ++s) {
    const std::uint64_t seed = derive_seed(opt.seed, 3000 + s);
    std::mt19937_64 rng(seed);
    EncoderParams params = random_params(cfg, seed);

    PairSample pair;
    pair.tokens.still = random_vector(cfg.dim, rng);
    for (std::size_t k = 0; k < opt.frames; ++k) pair.tokens.frames.push_back(random_vector(cfg.dim, rng));
    pair.label = s % 2 == 0 ? 1 : -1;
    if (pair.label == -1) {
      // Keep clear of the hinge kink, where the loss is not differentiable.
      const AggregateOutput out = aggregate(params, cfg, pair.tokens);
      const double cos = cosine_similarity(out.video_rep, out.still_rep);
      if (std::abs(cos - margin) < 1e-3) pair.label = 1;
    }

    const PairGradient pg = pair_loss_and_grad(params, cfg, pair, margin);
    TensorViews tv = views(params, pg.grads);
    auto loss = [&] { return pair_loss(params, cfg, pair, margin); };
    for (std::size_t t = 0; t < tv.names.size(); ++t)
      checker.check("pipeline." + tv.names[t], tv.values[t], tv.grads[t], loss);
  }
  return report;
}

GradCheckReport run_all_grad_checks(const GradCheckOptions& opt) {
  GradCheckReport all{opt.tolerance, {}};
  for (auto* suite : {&check_numkernel_grads, &check_encoder_grads, &check_pipeline_grads}) {
    GradCheckReport r = suite(opt);
    all.entries.insert(all.entries.end(), r.entries.begin(), r.entries.end());
  }
  return all;
}

}  // namespace vagg
