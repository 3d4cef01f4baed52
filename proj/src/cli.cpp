#include "labeldist/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "labeldist/distributions.hpp"
#include "labeldist/io.hpp"
#include "labeldist/losses.hpp"
#include "labeldist/training.hpp"

namespace labeldist {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// ---- sweep ----

struct SweepArgs {
  double sigma_hat = 0.5;
  double nu = 6.0;
  double mu_delta = 0.0;
  double lo = 0.05;
  double hi = 2.0;
  double step = 0.005;
  std::string variant = "both";
  std::string out;
};

void run_sweep(const SweepArgs& a) {
  if (!(a.nu > 2.0)) throw ValidationError("sweep: --nu must exceed 2");
  if (!(a.sigma_hat >= kSigmaFloor))
    throw ValidationError("sweep: --sigma-hat must be >= 1e-6");
  if (!(a.lo >= kSigmaFloor)) throw ValidationError("sweep: --lo must be >= 1e-6");
  if (!(a.step > 0.0)) throw ValidationError("sweep: --step must be positive");
  if (!(a.hi > a.lo) && a.hi != a.lo)
    throw ValidationError("sweep: --hi must be >= --lo");
  if (a.variant != "t_kl" && a.variant != "gauss_kl" && a.variant != "both")
    throw ValidationError("sweep: --variant must be t_kl, gauss_kl, or both");

  const Gaussian pred(0.0, a.sigma_hat);
  std::string csv = "sigma,kl_t,kl_gauss\n";
  double best_t = std::numeric_limits<double>::infinity(), best_t_sigma = a.lo;
  double best_g = std::numeric_limits<double>::infinity(), best_g_sigma = a.lo;
  const long n_points =
      static_cast<long>(std::floor((a.hi - a.lo) / a.step + 0.5)) + 1;
  for (long i = 0; i < n_points; ++i) {
    const double s = a.lo + i * a.step;
    if (s > a.hi + 0.5 * a.step) break;
    const double kt = kl_t_gauss(a.nu, a.mu_delta, s, pred);
    const double kg = kl_gauss_gauss(Gaussian(a.mu_delta, s), pred);
    csv += format_double(s) + ',' + format_double(kt) + ',' + format_double(kg) + '\n';
    if (kt < best_t) {
      best_t = kt;
      best_t_sigma = s;
    }
    if (kg < best_g) {
      best_g = kg;
      best_g_sigma = s;
    }
  }
  if (a.variant != "gauss_kl")
    csv += "# argmin kl_t sigma=" + format_double(best_t_sigma) +
           " value=" + format_double(best_t) + '\n';
  if (a.variant != "t_kl")
    csv += "# argmin kl_gauss sigma=" + format_double(best_g_sigma) +
           " value=" + format_double(best_g) + '\n';

  std::ofstream ofs(a.out, std::ios::binary | std::ios::trunc);
  if (!ofs) throw ValidationError("cannot write file: " + a.out);
  ofs << csv;
  if (!ofs.flush()) throw ValidationError("write failed: " + a.out);
  std::cout << "sweep: " << n_points << " grid points -> " << a.out << "\n";
}

// ---- gen-data ----

struct GenArgs {
  std::string preset = "custom";
  int sequences = 9;
  int frames = 300;
  int annotators = 6;
  int feature_dim = 8;
  double frame_period = 0.040;
  double mu_m = std::numeric_limits<double>::quiet_NaN();
  double mu_s = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 1;
  std::string out;
};

void run_gen_data(const GenArgs& a) {
  SynthSpec spec;
  if (a.preset == "arousal")
    spec = arousal_preset(a.seed);
  else if (a.preset == "valence")
    spec = valence_preset(a.seed);
  else if (a.preset == "custom")
    spec.seed = a.seed;
  else
    throw ValidationError("gen-data: --preset must be arousal, valence, or custom");
  spec.sequences = a.sequences;
  spec.frames = a.frames;
  spec.annotators = a.annotators;
  spec.feature_dim = a.feature_dim;
  spec.frame_period = a.frame_period;
  if (a.preset == "custom") {
    if (std::isnan(a.mu_m) || std::isnan(a.mu_s))
      throw ValidationError("gen-data: custom preset needs --mu-m and --mu-s");
    spec.target_mu_m = a.mu_m;
    spec.target_mu_s = a.mu_s;
    spec.dimension_name = "custom";
  } else {
    if (!std::isnan(a.mu_m)) spec.target_mu_m = a.mu_m;
    if (!std::isnan(a.mu_s)) spec.target_mu_s = a.mu_s;
  }

  const SynthResult res = synth_corpus(spec);
  CorpusManifest manifest;
  manifest.dimension = spec.dimension_name;
  manifest.sequences = spec.sequences;
  manifest.frames = spec.frames;
  manifest.annotators = spec.annotators;
  manifest.feature_dim = spec.feature_dim;
  manifest.frame_period = spec.frame_period;
  manifest.seed = spec.seed;
  manifest.target_mu_m = spec.target_mu_m;
  manifest.target_mu_s = spec.target_mu_s;
  manifest.achieved_mu_m = res.achieved_mu_m;
  manifest.achieved_mu_s = res.achieved_mu_s;
  save_corpus(a.out, res.corpus, manifest);
  std::cout << "gen-data: " << spec.sequences << " sequences -> " << a.out
            << " (mu_m " << format_double(res.achieved_mu_m) << ", mu_s "
            << format_double(res.achieved_mu_s) << ")\n";
}

// ---- train ----

struct TrainArgs {
  std::string config;
  std::string corpus;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void run_train(const TrainArgs& a) {
  TrainConfig cfg = read_config(a.config);
  if (a.seed_set) cfg.seed = a.seed;
  const Corpus corpus = load_corpus(a.corpus);
  const TrainResult res = train(cfg, corpus);
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw ValidationError("cannot create directory: " + a.out);
  write_checkpoint((fs::path(a.out) / "checkpoint.txt").string(), res.best);
  write_loss_trace_csv((fs::path(a.out) / "loss_trace.csv").string(), res.trace);
  std::cout << "train: " << loss_variant_name(cfg.loss_variant) << " seed "
            << cfg.seed << ", best epoch " << res.best_epoch << " -> " << a.out
            << "\n";
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint;
  std::string corpus;
  std::string out;
  int n_passes = 0; // 0 = use the checkpoint's value
  std::uint64_t seed = 1;
  std::string split = "all";
  int holdout = 2;
};

Corpus select_split(Corpus corpus, const std::string& split, int holdout) {
  const int S = static_cast<int>(corpus.size());
  if (split == "all") return corpus;
  if (holdout < 1 || holdout >= S)
    throw ValidationError(
        "eval: --holdout must leave at least one sequence on each side");
  if (split == "train") {
    corpus.erase(corpus.begin() + (S - holdout), corpus.end());
    return corpus;
  }
  if (split == "holdout") {
    Corpus tail(corpus.begin() + (S - holdout), corpus.end());
    return tail;
  }
  throw ValidationError("eval: --split must be all, train, or holdout");
}

void run_eval(const EvalArgs& a) {
  const Checkpoint ckpt = read_checkpoint(a.checkpoint);
  const Corpus corpus = select_split(load_corpus(a.corpus), a.split, a.holdout);
  const MetricReport rep = evaluate(ckpt, corpus, a.n_passes, a.seed);
  write_metrics_json(a.out, rep);
  std::cout << "eval: ccc_m " << format_double(rep.ccc_m) << ", ccc_s "
            << format_double(rep.ccc_s) << ", kl_eval "
            << format_double(rep.kl_eval) << " -> " << a.out << "\n";
}

// ---- compare ----

struct CompareArgs {
  std::string config;
  std::string corpus;
  std::string out;
  int seeds = 10;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

struct VariantRuns {
  std::vector<double> kl_eval, ccc_m, ccc_s;
  std::vector<double> abs_errors; // |mu_hat - m| pooled over frames and seeds
};

VariantRuns run_variant(const TrainConfig& base, LossVariant variant,
                        std::uint64_t base_seed, int seeds, const Corpus& corpus) {
  const int S = static_cast<int>(corpus.size());
  const int H = base.holdout_sequences;
  VariantRuns runs;
  for (int i = 0; i < seeds; ++i) {
    TrainConfig cfg = base;
    cfg.loss_variant = variant;
    cfg.seed = base_seed + static_cast<std::uint64_t>(i);
    const TrainResult res = train(cfg, corpus);

    // Same per-sequence protocol as evaluate(): mean-weight mu_hat,
    // n-pass sigma_hat, stream split by holdout sequence index.
    Rng master(cfg.seed);
    std::vector<LabelDistribution> truths;
    std::vector<PredictiveDistribution> preds;
    std::vector<std::string> names;
    for (int q = S - H; q < S; ++q) {
      truths.push_back(label_distribution(corpus[q].ann));
      Rng rng = master.split(static_cast<std::uint64_t>(q - (S - H)) + 1);
      preds.push_back(predict(res.best.net, corpus[q].features, cfg.n_passes, rng));
      names.push_back(corpus[q].name);
    }
    const MetricReport rep =
        metrics_from_predictions(truths, preds, variant, names);
    runs.kl_eval.push_back(rep.kl_eval);
    runs.ccc_m.push_back(rep.ccc_m);
    runs.ccc_s.push_back(rep.ccc_s);
    for (std::size_t q = 0; q < truths.size(); ++q)
      for (std::size_t t = 0; t < truths[q].m.size(); ++t)
        runs.abs_errors.push_back(std::fabs(preds[q].mu_hat[t] - truths[q].m[t]));
  }
  return runs;
}

ojson variant_json(const VariantRuns& runs) {
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  ojson j;
  j["kl_eval"] = runs.kl_eval;
  j["ccc_m"] = runs.ccc_m;
  j["ccc_s"] = runs.ccc_s;
  j["mean_kl_eval"] = mean(runs.kl_eval);
  j["mean_ccc_m"] = mean(runs.ccc_m);
  j["mean_ccc_s"] = mean(runs.ccc_s);
  return j;
}

void run_compare(const CompareArgs& a) {
  if (a.seeds < 2) throw ValidationError("compare: --seeds must be >= 2");
  TrainConfig cfg = read_config(a.config);
  if (cfg.holdout_sequences < 1)
    throw ValidationError("compare: config needs holdout_sequences >= 1");
  const std::uint64_t base_seed = a.seed_set ? a.seed : cfg.seed;
  const Corpus corpus = load_corpus(a.corpus);

  const VariantRuns t_runs =
      run_variant(cfg, LossVariant::t_kl, base_seed, a.seeds, corpus);
  const VariantRuns g_runs =
      run_variant(cfg, LossVariant::gauss_kl, base_seed, a.seeds, corpus);

  // Lower-is-better metrics test H1 "gauss exceeds t"; higher-is-better CCC
  // metrics test H1 "t exceeds gauss" -- small p always favors the t variant.
  const double p_abs = one_tailed_t_test(g_runs.abs_errors, t_runs.abs_errors);
  ojson j;
  j["seeds"] = a.seeds;
  j["base_seed"] = base_seed;
  j["holdout_sequences"] = cfg.holdout_sequences;
  j["variants"] = ojson::object();
  j["variants"]["t_kl"] = variant_json(t_runs);
  j["variants"]["gauss_kl"] = variant_json(g_runs);
  j["p_value"] = p_abs;
  j["p_values"] = ojson::object();
  j["p_values"]["abs_error"] = p_abs;
  j["p_values"]["kl_eval"] = one_tailed_t_test(g_runs.kl_eval, t_runs.kl_eval);
  j["p_values"]["ccc_m"] = one_tailed_t_test(t_runs.ccc_m, g_runs.ccc_m);
  j["p_values"]["ccc_s"] = one_tailed_t_test(t_runs.ccc_s, g_runs.ccc_s);

  std::ofstream ofs(a.out, std::ios::binary | std::ios::trunc);
  if (!ofs) throw ValidationError("cannot write file: " + a.out);
  ofs << j.dump(2) << "\n";
  if (!ofs.flush()) throw ValidationError("write failed: " + a.out);
  std::cout << "compare: " << a.seeds << " seeds per variant, p_value "
            << format_double(p_abs) << " -> " << a.out << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"t-distribution label-uncertainty losses: landscape sweeps, "
               "synthetic corpora, stochastic-regressor training, evaluation, "
               "and variant comparison"};
  app.require_subcommand(1);

  SweepArgs sweep;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "Loss-landscape sweep over the annotation spread");
  sweep_cmd->add_option("--sigma-hat", sweep.sigma_hat, "Predicted std")->required();
  sweep_cmd->add_option("--nu", sweep.nu, "Degrees of freedom (> 2)")->required();
  sweep_cmd->add_option("--mu-delta", sweep.mu_delta, "Truth-minus-predicted mean");
  sweep_cmd->add_option("--lo", sweep.lo, "Grid start (default 0.05)");
  sweep_cmd->add_option("--hi", sweep.hi, "Grid end (default 2.0)");
  sweep_cmd->add_option("--step", sweep.step, "Grid step (default 0.005)");
  sweep_cmd->add_option("--variant", sweep.variant, "t_kl, gauss_kl, or both");
  sweep_cmd->add_option("--out", sweep.out, "Output CSV path")->required();
  sweep_cmd->callback([&] { run_sweep(sweep); });

  GenArgs gen;
  CLI::App* gen_cmd =
      app.add_subcommand("gen-data", "Generate a calibrated synthetic corpus");
  gen_cmd->add_option("--preset", gen.preset, "arousal, valence, or custom");
  gen_cmd->add_option("--sequences", gen.sequences, "Sequence count (default 9)");
  gen_cmd->add_option("--frames", gen.frames, "Frames per sequence (default 300)");
  gen_cmd->add_option("--annotators", gen.annotators, "Annotator count (default 6)");
  gen_cmd->add_option("--feature-dim", gen.feature_dim, "Feature count (default 8)");
  gen_cmd->add_option("--frame-period", gen.frame_period,
                      "Seconds per frame (default 0.04)");
  gen_cmd->add_option("--mu-m", gen.mu_m, "Target corpus mean of the rating mean");
  gen_cmd->add_option("--mu-s", gen.mu_s, "Target corpus mean of the rating spread");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed (default 1)");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->callback([&] { run_gen_data(gen); });

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train one model variant");
  train_cmd->add_option("--config", tr.config, "key=value config file")->required();
  train_cmd->add_option("--corpus", tr.corpus, "Corpus directory")->required();
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  CLI::Option* tr_seed = train_cmd->add_option("--seed", tr.seed, "Override config seed");
  train_cmd->callback([&] {
    tr.seed_set = tr_seed->count() > 0;
    run_train(tr);
  });

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--corpus", ev.corpus, "Corpus directory")->required();
  eval_cmd->add_option("--out", ev.out, "Output metrics JSON path")->required();
  eval_cmd->add_option("--n-passes", ev.n_passes,
                       "Stochastic passes (default: checkpoint value)");
  eval_cmd->add_option("--seed", ev.seed, "Sampling seed (default 1)");
  eval_cmd->add_option("--split", ev.split, "all, train, or holdout (default all)");
  eval_cmd->add_option("--holdout", ev.holdout,
                       "Trailing sequences forming the holdout (default 2)");
  eval_cmd->callback([&] { run_eval(ev); });

  CompareArgs cmp;
  CLI::App* cmp_cmd = app.add_subcommand(
      "compare", "Train both divergence variants across seeds and test significance");
  cmp_cmd->add_option("--config", cmp.config, "key=value config file")->required();
  cmp_cmd->add_option("--corpus", cmp.corpus, "Corpus directory")->required();
  cmp_cmd->add_option("--out", cmp.out, "Output comparison JSON path")->required();
  cmp_cmd->add_option("--seeds", cmp.seeds, "Seeds per variant (default 10)");
  CLI::Option* cmp_seed =
      cmp_cmd->add_option("--seed", cmp.seed, "Override config base seed");
  cmp_cmd->callback([&] {
    cmp.seed_set = cmp_seed->count() > 0;
    run_compare(cmp);
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace labeldist
