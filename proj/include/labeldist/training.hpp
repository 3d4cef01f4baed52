#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "labeldist/annotations.hpp"
#include "labeldist/bayes_net.hpp"
#include "labeldist/errors.hpp"
#include "labeldist/losses.hpp"
#include "labeldist/matrix.hpp"
#include "labeldist/rng.hpp"

namespace labeldist {

// One corpus entry: frame-aligned features (frames x d) and ratings.
struct Sequence {
  Matrix features;
  AnnotationMatrix ann;
  double frame_period = 0.040;
  std::string name;
};

using Corpus = std::vector<Sequence>;

enum class SelectOn { train, holdout };

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 5;        // windows per optimizer step
  int sequence_length = 300; // frames per training window
  int epochs = 100;
  int n_passes = 30;         // stochastic forward passes per step
  std::uint64_t seed = 1;
  LossVariant loss_variant = LossVariant::t_kl;
  std::vector<int> hidden = {64, 64};
  double prior_sigma = 1.0;
  double likelihood_sigma = 0.1;
  int holdout_sequences = 2; // trailing sequences kept out of training
  SelectOn select_on = SelectOn::train;
};

// Throws ValidationError on out-of-range fields.
void validate_config(const TrainConfig& cfg);

// Canonical key=value rendering (fixed key order, %.17g reals) and its
// FNV-1a hash; the hash is embedded in checkpoints so an evaluation can
// detect config drift.
std::string config_canonical(const TrainConfig& cfg);
std::uint64_t config_hash(const TrainConfig& cfg);

const char* loss_variant_name(LossVariant v);
LossVariant loss_variant_from_name(const std::string& name); // throws ValidationError

// Per-tensor Adam accumulator; `step` counts updates applied to this tensor.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long long step = 0;
};

// In-place Adam update (beta1 0.9, beta2 0.999, eps 1e-8, bias correction).
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, double lr);

// ---- synthetic corpus ----

struct SynthSpec {
  int sequences = 9;
  int frames = 300;
  int annotators = 6;
  double target_mu_m = 0.01; // corpus mean of the per-frame rating mean
  double target_mu_s = 0.23; // corpus mean of the per-frame rating spread
  std::uint64_t seed = 1;
  double frame_period = 0.040;
  int feature_dim = 8;
  std::string dimension_name = "custom";
};

SynthSpec arousal_preset(std::uint64_t seed);
SynthSpec valence_preset(std::uint64_t seed);

struct SynthResult {
  Corpus corpus;
  double achieved_mu_m = 0.0;
  double achieved_mu_s = 0.0;
  double bias = 0.0;   // latent offset found by calibration
  double spread = 0.0; // disagreement scale found by calibration
};

// Deterministic generator: smooth latent traces (sums of low-frequency
// sinusoids through tanh), per-annotator perturbations (slow personal drift
// plus heavy-tailed nu=3 noise, both scaled by `spread`), and features that
// are noisy nonlinear transforms of the latent.  Regenerating with the same
// spec and (bias, spread) is byte-deterministic.
SynthResult synth_corpus_raw(const SynthSpec& spec, double bias, double spread);

// Calibrated generator: bisects (spread, bias) until the corpus-level means
// of m and s land on the spec targets (within 0.05; typically ~1e-3).
// Throws ValidationError for infeasible targets (|target_mu_m| >= 0.9 or
// target_mu_s outside (0, 1]).
SynthResult synth_corpus(const SynthSpec& spec);

// ---- training loop ----

struct Checkpoint {
  BayesNet net;
  LossVariant loss_variant = LossVariant::t_kl;
  int n_passes = 30;
  std::uint64_t cfg_hash = 0;
};

struct EpochRow {
  int epoch = 0; // 1-based
  LossReport train;
  LossReport holdout;
  bool has_holdout = false;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRow> trace;
  int best_epoch = 0;
};

// Runs epochs x batches of Adam on the combined objective
//   (1 - ccc) + [complexity/num_batches + avg-pass nll] + mean-frame KL.
// Train rows average the per-batch reports of the epoch; holdout rows
// re-evaluate the held-out frames with the stochastic (training) protocol and
// the same complexity weighting.  The returned checkpoint is the epoch with
// the best (lowest) selection loss per cfg.select_on.  Throws DivergenceError
// when any batch loss turns non-finite.
TrainResult train(const TrainConfig& cfg, const Corpus& corpus);

// ---- evaluation ----

struct SequenceMetrics {
  std::string name;
  double ccc_m = 0.0;
  double ccc_s = 0.0;
  double kl_eval = 0.0;
};

struct MetricReport {
  double ccc_m = 0.0;
  double ccc_s = 0.0;
  double kl_eval = 0.0;
  std::vector<SequenceMetrics> per_sequence;
};

// Metrics from explicit predictions, so oracle predictors can be injected:
// ccc_m over the concatenated mean traces, ccc_s over the spread traces,
// kl_eval = frame mean of the divergence matching `variant` (the t form is
// used for `none`, the library's default label model).
MetricReport metrics_from_predictions(const std::vector<LabelDistribution>& truths,
                                      const std::vector<PredictiveDistribution>& preds,
                                      LossVariant variant,
                                      const std::vector<std::string>& names);

// Test-protocol evaluation: per sequence, mu_hat from the mean weights and
// sigma_hat from n_passes sampled passes (seeded per sequence index).
MetricReport evaluate(const Checkpoint& ckpt, const Corpus& corpus, int n_passes,
                      std::uint64_t seed);

// ---- significance test ----

// Regularized incomplete beta I_x(a, b) by Lentz continued fraction,
// converged to better than 1e-8.
double incomplete_beta(double a, double b, double x);

// P(T <= t) for Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);

// Welch's unequal-variance one-tailed test of H1: mean(a) > mean(b);
// returns p = P(T_df >= t).  Requires both samples to have >= 2 entries.
double one_tailed_t_test(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace labeldist
