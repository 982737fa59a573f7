// SPDX-License-Identifier: Apache-2.0
#include "vagg/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vagg/aggregator.hpp"
#include "vagg/errors.hpp"
#include "vagg/evaluation.hpp"
#include "vagg/gradcheck.hpp"
#include "vagg/io.hpp"
#include "vagg/synthdata.hpp"
#include "vagg/training.hpp"

namespace vagg {

namespace fs = std::filesystem;

namespace {

struct GenArgs {
  GenConfig gen;
  std::string mode = "off-identity";
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string out;
  std::size_t dim = EncoderConfig{}.dim;
  std::size_t heads = EncoderConfig{}.heads;
  std::size_t layers = EncoderConfig{}.layers;
  TrainConfig train;
  double train_fraction = 0.3;
  std::uint64_t split_seed = 0;
  bool split_seed_set = false;
  bool quiet = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::string subset = "test";
  bool reverse_frames = false;
  std::size_t impostor_cap = 0;
  std::uint64_t seed = 0;
};

struct GradArgs {
  GradCheckOptions opt;
  std::size_t dim = 8;
  std::size_t heads = 2;
  std::size_t layers = 1;
  std::string out;
};

struct ScoreArgs {
  std::string checkpoint;
  std::string data;
  std::string still;
  std::string video;
  std::string out;
  std::uint64_t seed = 0;
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open " + path.string() + " for writing");
  return f;
}

const Subject& find_subject(const Dataset& data, const std::string& id) {
  auto it = std::find_if(data.begin(), data.end(), [&](const Subject& s) { return s.id == id; });
  if (it == data.end()) throw ValidationError("subject '" + id + "' not in dataset");
  return *it;
}

void check_dim(const Dataset& data, std::size_t dim) {
  if (data.empty()) throw ValidationError("dataset is empty");
  if (data.front().still.size() != dim) {
    throw ValidationError("dataset dim " + std::to_string(data.front().still.size()) +
                          " != configured dim " + std::to_string(dim));
  }
}

int cmd_gen_data(const GenArgs& a, std::ostream& out) {
  GenConfig cfg = a.gen;
  cfg.corrupt_mode = parse_corrupt_mode(a.mode);
  const Dataset data = generate(cfg);
  save_dataset(a.out, data);
  out << "wrote " << data.size() << " subjects (K=" << cfg.frames_per_video << ", D=" << cfg.dim
      << ") to " << a.out << '\n';
  return kExitOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const EncoderConfig enc = EncoderConfig::make(a.dim, a.heads, a.layers);
  a.train.validate();
  const Dataset data = load_dataset(a.data);
  check_dim(data, enc.dim);
  const std::uint64_t split_seed = a.split_seed_set ? a.split_seed : a.train.seed;
  const auto [train_set, test_set] = split(data, a.train_fraction, split_seed);
  if (!a.quiet) {
    out << "training on " << train_set.size() << " subjects (" << test_set.size()
        << " held out)\n";
  }
  const TrainResult res = train(train_set, enc, a.train, [&](std::size_t epoch, double loss) {
    if (!a.quiet) out << "epoch " << epoch + 1 << " loss " << format_double(loss) << '\n';
  });

  Checkpoint ckpt;
  ckpt.encoder = enc;
  ckpt.train = a.train;
  ckpt.loss_trace = res.epoch_losses;
  ckpt.train_fraction = a.train_fraction;
  ckpt.split_seed = split_seed;
  ckpt.params = res.params;
  const fs::path manifest(a.out);
  if (manifest.has_parent_path()) fs::create_directories(manifest.parent_path());
  save_checkpoint(manifest, ckpt);
  out << "saved " << manifest.string() << " (" << res.steps << " steps)\n";
  return kExitOk;
}

std::string far_column(double far) {
  std::ostringstream os;
  os << "FAR=" << far;
  return os.str();
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Dataset data = load_dataset(a.data);
  check_dim(data, ckpt.encoder.dim);
  Dataset test = a.subset == "all" ? data : split(data, ckpt.train_fraction, ckpt.split_seed).second;

  const EncoderParams& params = ckpt.params;
  const EncoderConfig& enc = ckpt.encoder;
  std::vector<Scorer> scorers{
      {"transformer", [&](const TokenSet& ts, std::uint64_t) { return score_v2s(params, enc, ts); }}};
  if (a.reverse_frames) {
    scorers.push_back({"transformer-reversed", [&](const TokenSet& ts, std::uint64_t) {
                         TokenSet r = ts;
                         std::reverse(r.frames.begin(), r.frames.end());
                         return score_v2s(params, enc, r);
                       }});
  }
  scorers.push_back({"average-pool", [](const TokenSet& ts, std::uint64_t) { return baseline_average_pool(ts); }});
  scorers.push_back({"max-pool", [](const TokenSet& ts, std::uint64_t) { return baseline_max_pool(ts); }});
  scorers.push_back({"pairwise", [](const TokenSet& ts, std::uint64_t) { return baseline_pairwise(ts); }});
  scorers.push_back({"random", [](const TokenSet& ts, std::uint64_t s) { return baseline_random(ts, s); }});

  EvalOptions opt;
  opt.impostor_cap = a.impostor_cap;
  opt.seed = a.seed;
  const std::vector<EvalReport> reports = evaluate_v2s(test, scorers, opt);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  {
    std::ofstream csv = open_out(dir / "summary.csv");
    csv << "method";
    for (double far : opt.far_targets) csv << ',' << far_column(far);
    for (std::size_t r : opt.report_ranks) csv << ",Rank-" << r;
    csv << ",genuine_pairs,impostor_pairs,scoring_errors\n";
    for (const EvalReport& rep : reports) {
      csv << rep.method;
      for (double far : opt.far_targets) csv << ',' << format_double(rep.tar_at_far.at(far).tar);
      for (std::size_t r : opt.report_ranks) csv << ',' << format_double(rep.rank_accuracy.at(r));
      csv << ',' << rep.genuine_pairs << ',' << rep.impostor_pairs << ',' << rep.scoring_errors << '\n';
    }
  }
  for (const EvalReport& rep : reports) {
    std::ofstream det = open_out(dir / ("det_" + rep.method + ".csv"));
    det << "far,frr\n";
    for (const DetPoint& p : rep.det) det << format_double(p.far) << ',' << format_double(p.frr) << '\n';
    std::ofstream cmc_file = open_out(dir / ("cmc_" + rep.method + ".csv"));
    cmc_file << "rank,accuracy\n";
    for (const auto& [rank, acc] : rep.cmc) cmc_file << rank << ',' << format_double(acc) << '\n';
  }

  out << "V2S on " << test.size() << " subjects (" << reports.front().genuine_pairs << " genuine, "
      << reports.front().impostor_pairs << " impostor pairs)\n";
  out << std::left << std::setw(22) << "method";
  for (double far : opt.far_targets) out << std::setw(11) << far_column(far);
  for (std::size_t r : opt.report_ranks) out << std::setw(9) << ("Rank-" + std::to_string(r));
  out << '\n';
  out << std::fixed << std::setprecision(4);
  for (const EvalReport& rep : reports) {
    out << std::setw(22) << rep.method;
    for (double far : opt.far_targets) out << std::setw(11) << rep.tar_at_far.at(far).tar;
    for (std::size_t r : opt.report_ranks) out << std::setw(9) << rep.rank_accuracy.at(r);
    out << '\n';
  }
  out << "wrote " << (dir / "summary.csv").string() << '\n';
  return kExitOk;
}

int cmd_grad_check(const GradArgs& a, std::ostream& out) {
  GradCheckOptions opt = a.opt;
  opt.encoder = EncoderConfig::make(a.dim, a.heads, a.layers);
  const GradCheckReport rep = run_all_grad_checks(opt);
  std::vector<std::string> failed;
  for (const GradCheckEntry& e : rep.entries) {
    out << std::left << std::setw(36) << e.group << " checked=" << e.checked
        << " max_rel_error=" << format_double(e.max_rel_error) << (e.pass ? " PASS" : " FAIL")
        << '\n';
    if (!e.pass) failed.push_back(e.group);
  }
  if (!a.out.empty()) {
    std::ofstream csv = open_out(a.out);
    csv << "group,checked,max_rel_error,pass\n";
    for (const GradCheckEntry& e : rep.entries) {
      csv << e.group << ',' << e.checked << ',' << format_double(e.max_rel_error) << ','
          << (e.pass ? 1 : 0) << '\n';
    }
  }
  if (failed.empty()) {
    out << "grad-check: PASS (" << rep.entries.size() << " groups, tolerance "
        << format_double(rep.tolerance) << ")\n";
    return kExitOk;
  }
  out << "grad-check: FAIL in";
  for (const std::string& g : failed) out << ' ' << g;
  out << '\n';
  return kExitFailure;
}

int cmd_score(const ScoreArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Dataset data = load_dataset(a.data);
  check_dim(data, ckpt.encoder.dim);
  const Subject& still_owner = find_subject(data, a.still);
  const Subject& video_owner = find_subject(data, a.video.empty() ? a.still : a.video);
  const TokenSet ts = make_token_set(still_owner, video_owner);
  const AggregateOutput agg = aggregate(ckpt.params, ckpt.encoder, ts);
  const double score = cosine_similarity(agg.video_rep, agg.still_rep);
  const auto weights = export_attention_weights(agg);

  out << "still " << still_owner.id << " video " << video_owner.id
      << (ts.genuine() ? " (genuine)" : " (impostor)") << " score " << format_double(score) << '\n';
  if (!a.out.empty()) {
    std::ofstream csv = open_out(a.out);
    const bool labelled = !video_owner.corrupted.empty();
    csv << "rank,frame,weight" << (labelled ? ",corrupted" : "") << '\n';
    for (std::size_t i = 0; i < weights.size(); ++i) {
      csv << i + 1 << ',' << weights[i].frame << ',' << format_double(weights[i].weight);
      if (labelled) csv << ',' << (video_owner.corrupted[weights[i].frame] ? 1 : 0);
      csv << '\n';
    }
    out << "wrote " << a.out << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transformer video-to-still aggregation: data, training, evaluation"};
  app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags win");
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "Write a synthetic still/video embedding dataset");
  g->add_option("--subjects", gen.gen.num_subjects)->check(CLI::PositiveNumber)->capture_default_str();
  g->add_option("--frames", gen.gen.frames_per_video)->check(CLI::PositiveNumber)->capture_default_str();
  g->add_option("--dim", gen.gen.dim)->check(CLI::PositiveNumber)->capture_default_str();
  g->add_option("--still-sigma", gen.gen.still_noise_sigma)->check(CLI::NonNegativeNumber)->capture_default_str();
  g->add_option("--frame-sigma", gen.gen.frame_noise_sigma)->check(CLI::NonNegativeNumber)->capture_default_str();
  g->add_option("--corrupt-fraction", gen.gen.corrupt_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  g->add_option("--corrupt-mode", gen.mode)
      ->check(CLI::IsMember({"gaussian-blast", "zero-out", "off-identity"}))
      ->capture_default_str();
  g->add_option("--seed", gen.gen.seed)->capture_default_str();
  g->add_option("--out", gen.out, "Dataset path (JSON Lines)")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the aggregator and write a checkpoint");
  t->add_option("--data", tr.data, "Dataset path")->required()->check(CLI::ExistingFile);
  t->add_option("--out", tr.out, "Checkpoint manifest path (blob goes next to it as .bin)")->required();
  t->add_option("--dim", tr.dim)->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--heads", tr.heads)->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--layers", tr.layers)->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--lr", tr.train.learning_rate)->check(CLI::NonNegativeNumber)->capture_default_str();
  t->add_option("--weight-decay", tr.train.weight_decay)->check(CLI::NonNegativeNumber)->capture_default_str();
  t->add_option("--batch-size", tr.train.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--epochs", tr.train.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--margin", tr.train.margin)->check(CLI::Range(-1.0, 1.0))->capture_default_str();
  t->add_option("--impostors", tr.train.impostors_per_genuine, "Impostor pairs per genuine pair")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  t->add_option("--train-fraction", tr.train_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  auto* split_opt = t->add_option("--split-seed", tr.split_seed, "Defaults to --seed");
  t->add_option("--seed", tr.train.seed)->capture_default_str();
  t->add_flag("--quiet", tr.quiet, "No per-epoch output");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "V2S verification and identification report");
  e->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
  e->add_option("--data", ev.data)->required()->check(CLI::ExistingFile);
  e->add_option("--out", ev.out, "Output directory for summary.csv and DET/CMC point files")->required();
  e->add_option("--subjects", ev.subset, "'test' = held-out split recorded in the checkpoint, 'all' = whole file")
      ->check(CLI::IsMember({"test", "all"}))
      ->capture_default_str();
  e->add_flag("--reverse-frames", ev.reverse_frames, "Also score with frames in reversed order");
  e->add_option("--impostor-cap", ev.impostor_cap, "Subsample impostor pairings (0 = all)")->capture_default_str();
  e->add_option("--seed", ev.seed)->capture_default_str();

  GradArgs gc;
  auto* c = app.add_subcommand("grad-check", "Finite-difference check of every analytic gradient");
  c->add_option("--seed", gc.opt.seed)->capture_default_str();
  c->add_option("--seeds", gc.opt.seeds, "Random instances per suite")->check(CLI::PositiveNumber)->capture_default_str();
  c->add_option("--step", gc.opt.step)->check(CLI::PositiveNumber)->capture_default_str();
  c->add_option("--tolerance", gc.opt.tolerance)->check(CLI::PositiveNumber)->capture_default_str();
  c->add_option("--dim", gc.dim)->check(CLI::PositiveNumber)->capture_default_str();
  c->add_option("--heads", gc.heads)->check(CLI::PositiveNumber)->capture_default_str();
  c->add_option("--layers", gc.layers)->check(CLI::PositiveNumber)->capture_default_str();
  c->add_option("--frames", gc.opt.frames)->check(CLI::PositiveNumber)->capture_default_str();
  c->add_option("--inject-fault", gc.opt.inject_fault,
                "Test hook: corrupt the analytic gradient of groups containing this text");
  c->add_option("--out", gc.out, "Optional CSV report");

  ScoreArgs sc;
  auto* s = app.add_subcommand("score", "Score one still/video pairing and dump attention weights");
  s->add_option("--checkpoint", sc.checkpoint)->required()->check(CLI::ExistingFile);
  s->add_option("--data", sc.data)->required()->check(CLI::ExistingFile);
  s->add_option("--still", sc.still, "Subject whose still is the reference")->required();
  s->add_option("--video", sc.video, "Subject whose video is scored (default: same as --still)");
  s->add_option("--out", sc.out, "Attention weight CSV, one row per frame");
  s->add_option("--seed", sc.seed, "Unused; accepted for uniformity")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  tr.split_seed_set = split_opt->count() > 0;

  try {
    if (*g) return cmd_gen_data(gen, out);
    if (*t) return cmd_train(tr, out);
    if (*e) return cmd_eval(ev, out);
    if (*c) return cmd_grad_check(gc, out);
    if (*s) return cmd_score(sc, out);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace vagg
