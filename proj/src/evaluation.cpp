// SPDX-License-Identifier: Apache-2.0
#include "vagg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>

#include "vagg/errors.hpp"
#include "vagg/seed.hpp"

namespace vagg {

namespace {

void require_scores(const ScoreSet& s, const char* op) {
  if (s.genuine.empty() || s.impostor.empty()) {
    throw ValidationError(std::string(op) + ": genuine and impostor scores must be non-empty");
  }
}

// Number of entries of ascending `sorted` that are >= t.
std::size_t count_at_least(const std::vector<double>& sorted, double t) {
  return static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
}

}  // namespace

TarResult tar_at_far(const ScoreSet& scores, double far_target) {
  require_scores(scores, "tar_at_far");
  if (!(far_target > 0.0 && far_target < 1.0)) {
    throw ValidationError("tar_at_far: FAR target must be in (0,1)");
  }
  std::vector<double> imp = scores.impostor;
  std::vector<double> gen = scores.genuine;
  std::sort(imp.begin(), imp.end());
  std::sort(gen.begin(), gen.end());
  const double ni = static_cast<double>(imp.size());

  // fraction(impostor >= t) is non-increasing in t, so the qualifying
  // thresholds are exactly those above `fail`, the largest impostor score
  // whose FAR still exceeds the target. far_target < 1 means the smallest
  // impostor always fails.
  double threshold = std::numeric_limits<double>::infinity();
  double fail = imp.back();
  for (std::size_t i = 1; i < imp.size(); ++i) {
    if (imp[i] == imp[i - 1]) continue;
    if (static_cast<double>(imp.size() - i) / ni <= far_target) {
      threshold = imp[i];
      fail = imp[i - 1];
      break;
    }
  }
  const auto g = std::upper_bound(gen.begin(), gen.end(), fail);
  if (g != gen.end() && *g < threshold) threshold = *g;
  const double tar =
      static_cast<double>(count_at_least(gen, threshold)) / static_cast<double>(gen.size());
  return {tar, threshold};
}

std::vector<DetPoint> det_curve(const ScoreSet& scores) {
  require_scores(scores, "det_curve");
  std::vector<double> gen = scores.genuine;
  std::vector<double> imp = scores.impostor;
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());
  std::vector<double> thresholds;
  thresholds.reserve(gen.size() + imp.size() + 1);
  thresholds.push_back(std::numeric_limits<double>::infinity());
  std::vector<double> all = gen;
  all.insert(all.end(), imp.begin(), imp.end());
  std::sort(all.begin(), all.end(), std::greater<>());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  thresholds.insert(thresholds.end(), all.begin(), all.end());

  const double ng = static_cast<double>(gen.size());
  const double ni = static_cast<double>(imp.size());
  std::vector<DetPoint> points;
  for (double t : thresholds) {
    const double tar = static_cast<double>(count_at_least(gen, t)) / ng;
    const DetPoint p{static_cast<double>(count_at_least(imp, t)) / ni, 1.0 - tar};
    if (points.empty() || !(points.back() == p)) points.push_back(p);
  }
  return points;
}

std::vector<std::size_t> rank_gallery(const std::vector<double>& scores) {
  std::vector<std::size_t> ok, failed;
  for (std::size_t i = 0; i < scores.size(); ++i) (std::isnan(scores[i]) ? failed : ok).push_back(i);
  std::stable_sort(ok.begin(), ok.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  ok.insert(ok.end(), failed.begin(), failed.end());
  return ok;
}

std::vector<std::string> identify(const std::vector<Embedding>& query_frames,
                                  const std::string& query_subject,
                                  const std::vector<GalleryEntry>& gallery, const Scorer& scorer,
                                  std::uint64_t video_seed) {
  if (gallery.empty()) throw ValidationError("identify: empty gallery");
  std::vector<double> scores(gallery.size());
  for (std::size_t g = 0; g < gallery.size(); ++g) {
    const TokenSet ts{gallery[g].still, query_frames, gallery[g].id, query_subject};
    try {
      scores[g] = scorer.score(ts, video_seed);
    } catch (const ScoringError&) {
      scores[g] = std::numeric_limits<double>::quiet_NaN();
    } catch (const NumericError&) {
      scores[g] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  std::vector<std::string> ranked;
  for (std::size_t g : rank_gallery(scores)) ranked.push_back(gallery[g].id);
  return ranked;
}

std::optional<std::size_t> rank_of(const std::vector<std::string>& ranked,
                                   const std::string& true_id) {
  const auto it = std::find(ranked.begin(), ranked.end(), true_id);
  if (it == ranked.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ranked.begin()) + 1;
}

CmcResult cmc(const std::vector<std::optional<std::size_t>>& correct_ranks, std::size_t max_rank) {
  if (correct_ranks.empty()) throw ValidationError("cmc: no queries");
  if (max_rank == 0) throw ValidationError("cmc: max_rank must be >= 1");
  std::vector<std::size_t> hits_at(max_rank + 1, 0);
  for (const auto& r : correct_ranks) {
    if (r && *r >= 1 && *r <= max_rank) ++hits_at[*r];
  }
  CmcResult out;
  const double q = static_cast<double>(correct_ranks.size());
  std::size_t cumulative = 0;
  for (std::size_t n = 1; n <= max_rank; ++n) {
    cumulative += hits_at[n];
    const double acc = static_cast<double>(cumulative) / q;
    out.points.emplace_back(n, acc);
    out.rank_accuracy[n] = acc;
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> impostor_pairings(std::size_t subjects,
                                                                   std::size_t cap,
                                                                   std::uint64_t seed) {
  std::vector<std::pair<std::size_t, std::size_t>> all;
  all.reserve(subjects * (subjects ? subjects - 1 : 0));
  for (std::size_t v = 0; v < subjects; ++v)
    for (std::size_t s = 0; s < subjects; ++s)
      if (v != s) all.emplace_back(v, s);
  if (cap == 0 || cap >= all.size()) return all;
  std::vector<std::pair<std::size_t, std::size_t>> picked;
  picked.reserve(cap);
  std::mt19937_64 rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), cap, rng);
  return picked;
}

std::vector<EvalReport> evaluate_v2s(const Dataset& test_subjects,
                                     const std::vector<Scorer>& scorers,
                                     const EvalOptions& options) {
  const std::size_t n = test_subjects.size();
  if (n < 2) {
    throw ValidationError("evaluate_v2s: need at least 2 test subjects, got " + std::to_string(n));
  }
  const auto impostors = impostor_pairings(n, options.impostor_cap, derive_seed(options.seed, 0));
  const std::size_t max_rank = options.max_rank ? std::min(options.max_rank, n) : n;
  constexpr double kFailed = std::numeric_limits<double>::quiet_NaN();

  std::vector<EvalReport> reports;
  for (const Scorer& scorer : scorers) {
    // score[v * n + s]: video of subject v against the still of subject s.
    std::vector<double> score(n * n, kFailed);
    std::vector<std::exception_ptr> fatal(n);
    const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t vi = 0; vi < rows; ++vi) {
      const auto v = static_cast<std::size_t>(vi);
      const std::uint64_t video_seed = derive_seed(options.seed, v + 1);
      try {
        for (std::size_t s = 0; s < n; ++s) {
          try {
            score[v * n + s] = scorer.score(make_token_set(test_subjects[s], test_subjects[v]),
                                            video_seed);
          } catch (const ScoringError&) {
          } catch (const NumericError&) {
          }
        }
      } catch (...) {
        fatal[v] = std::current_exception();
      }
    }
    for (auto& e : fatal)
      if (e) std::rethrow_exception(e);

    EvalReport rep;
    rep.method = scorer.name;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = score[i * n + i];
      if (std::isnan(g)) {
        ++rep.scoring_errors;
      } else {
        rep.scores.genuine.push_back(g);
      }
    }
    for (const auto& [v, s] : impostors) {
      const double x = score[v * n + s];
      if (std::isnan(x)) {
        ++rep.scoring_errors;
      } else {
        rep.scores.impostor.push_back(x);
      }
    }
    rep.genuine_pairs = rep.scores.genuine.size();
    rep.impostor_pairs = rep.scores.impostor.size();
    if (rep.genuine_pairs == 0 || rep.impostor_pairs == 0) {
      throw ScoringError("evaluate_v2s: every " +
                         std::string(rep.genuine_pairs == 0 ? "genuine" : "impostor") +
                         " pairing failed to score for " + scorer.name);
    }
    for (double far : options.far_targets) rep.tar_at_far[far] = tar_at_far(rep.scores, far);
    rep.det = det_curve(rep.scores);

    std::vector<std::optional<std::size_t>> ranks(n);
    std::vector<double> row(n);
    for (std::size_t v = 0; v < n; ++v) {
      std::copy(score.begin() + static_cast<std::ptrdiff_t>(v * n),
                score.begin() + static_cast<std::ptrdiff_t>((v + 1) * n), row.begin());
      const auto order = rank_gallery(row);
      ranks[v] = static_cast<std::size_t>(std::find(order.begin(), order.end(), v) - order.begin()) + 1;
    }
    const CmcResult c = cmc(ranks, n);
    rep.cmc.assign(c.points.begin(), c.points.begin() + static_cast<std::ptrdiff_t>(max_rank));
    for (std::size_t r : options.report_ranks) {
      // Every query's identity sits somewhere in an n-entry ranking.
      rep.rank_accuracy[r] = r <= n ? c.rank_accuracy.at(r) : 1.0;
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace vagg
