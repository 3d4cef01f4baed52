#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "labeldist/training.hpp"

using labeldist::adam_step;
using labeldist::AdamState;
using labeldist::AnnotationMatrix;
using labeldist::arousal_preset;
using labeldist::Checkpoint;
using labeldist::config_canonical;
using labeldist::config_hash;
using labeldist::Corpus;
using labeldist::evaluate;
using labeldist::incomplete_beta;
using labeldist::kSigmaFloor;
using labeldist::LabelDistribution;
using labeldist::label_distribution;
using labeldist::loss_variant_from_name;
using labeldist::loss_variant_name;
using labeldist::LossVariant;
using labeldist::Matrix;
using labeldist::MetricReport;
using labeldist::metrics_from_predictions;
using labeldist::one_tailed_t_test;
using labeldist::PredictiveDistribution;
using labeldist::scale_from_std;
using labeldist::Sequence;
using labeldist::student_t_cdf;
using labeldist::SynthResult;
using labeldist::SynthSpec;
using labeldist::synth_corpus;
using labeldist::synth_corpus_raw;
using labeldist::TrainConfig;
using labeldist::TrainResult;
using labeldist::train;
using labeldist::valence_preset;
using labeldist::validate_config;
using labeldist::ValidationError;

namespace {

#include "welch_cases.inc"

// tiny corpus whose rating mean is exactly a linear function of the single
// feature, so a bias-free linear model can reach ccc ~ 1
Corpus toy_linear_corpus(int sequences, int frames) {
  Corpus corpus;
  for (int q = 0; q < sequences; ++q) {
    Matrix X(frames, 1);
    AnnotationMatrix ann(frames, 4);
    for (int t = 0; t < frames; ++t) {
      const double z = 0.6 * std::sin(0.13 * t + 0.8 * q) +
                       0.25 * std::sin(0.031 * t + 0.3 * q);
      X(t, 0) = z;
      // fixed annotator offsets: mean 0, nonzero spread at every frame
      ann.set(t, 0, z + 0.06);
      ann.set(t, 1, z - 0.06);
      ann.set(t, 2, z + 0.02);
      ann.set(t, 3, z - 0.02);
    }
    Sequence seq{std::move(X), std::move(ann), 0.04, "toy_" + std::to_string(q)};
    corpus.push_back(std::move(seq));
  }
  return corpus;
}

}  // namespace

TEST_CASE("adam_step: zero gradient leaves parameters untouched") {
  std::vector<double> p = {0.5, -1.0, 2.0};
  AdamState st;
  adam_step(p, {0.0, 0.0, 0.0}, st, 0.01);
  CHECK(p[0] == 0.5);
  CHECK(p[1] == -1.0);
  CHECK(p[2] == 2.0);
  CHECK(st.step == 1);
}

TEST_CASE("adam_step: first step moves by ~lr against the gradient sign") {
  std::vector<double> p = {1.0, 1.0};
  AdamState st;
  adam_step(p, {1.0, -3.0}, st, 0.01);
  // bias-corrected m/sqrt(v) = g/|g| on step one
  CHECK(std::fabs(p[0] - (1.0 - 0.01)) < 1e-8);
  CHECK(std::fabs(p[1] - (1.0 + 0.01)) < 1e-8);
}

TEST_CASE("adam_step: deterministic and stateful") {
  std::vector<double> pa = {0.2}, pb = {0.2};
  AdamState sa, sb;
  for (int k = 0; k < 25; ++k) {
    const double g = std::sin(0.7 * k);
    adam_step(pa, {g}, sa, 0.005);
    adam_step(pb, {g}, sb, 0.005);
  }
  CHECK(pa[0] == pb[0]);
  CHECK(sa.step == 25);
  std::vector<double> bad = {1.0};
  AdamState sc;
  CHECK_THROWS_AS(adam_step(bad, {1.0, 2.0}, sc, 0.01), std::invalid_argument);
}

TEST_CASE("config validation rejects out-of-range fields") {
  TrainConfig cfg;
  CHECK_NOTHROW(validate_config(cfg));
  TrainConfig bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(validate_config(bad), ValidationError);
  bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS_AS(validate_config(bad), ValidationError);
  bad = cfg;
  bad.n_passes = 1;
  CHECK_THROWS_AS(validate_config(bad), ValidationError);
  bad = cfg;
  bad.sequence_length = 1;
  CHECK_THROWS_AS(validate_config(bad), ValidationError);
  bad = cfg;
  bad.hidden = {32, 0};
  CHECK_THROWS_AS(validate_config(bad), ValidationError);
}

TEST_CASE("canonical config text is stable and hash-sensitive") {
  TrainConfig cfg;
  const std::string text = config_canonical(cfg);
  CHECK(text.find("learning_rate=") != std::string::npos);
  CHECK(text.find("loss_variant=t_kl") != std::string::npos);
  CHECK(config_hash(cfg) == config_hash(cfg));
  TrainConfig other = cfg;
  other.seed = 2;
  CHECK(config_hash(other) != config_hash(cfg));
  other = cfg;
  other.hidden = {64};
  CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("loss variant names round-trip") {
  for (LossVariant v : {LossVariant::t_kl, LossVariant::gauss_kl, LossVariant::none}) {
    CHECK(loss_variant_from_name(loss_variant_name(v)) == v);
  }
  CHECK_THROWS_AS(loss_variant_from_name("tkl"), ValidationError);
}

TEST_CASE("synthetic presets calibrate to their rating-statistics targets") {
  const SynthResult arousal = synth_corpus(arousal_preset(1));
  CHECK(std::fabs(arousal.achieved_mu_m - 0.01) < 0.005);
  CHECK(std::fabs(arousal.achieved_mu_s - 0.23) < 0.005);
  CHECK(static_cast<int>(arousal.corpus.size()) == 9);
  CHECK(arousal.corpus[0].features.rows == 300);
  CHECK(arousal.corpus[0].features.cols == 8);
  CHECK(arousal.corpus[0].ann.annotators() == 6);

  const SynthResult valence = synth_corpus(valence_preset(3));
  CHECK(std::fabs(valence.achieved_mu_m - 0.11) < 0.005);
  CHECK(std::fabs(valence.achieved_mu_s - 0.14) < 0.005);
}

TEST_CASE("synth_corpus rejects infeasible calibration targets") {
  SynthSpec spec = arousal_preset(1);
  spec.sequences = 2;
  spec.frames = 40;
  spec.target_mu_s = 1.5;  // spreads are bounded by the [-1, 1] label range
  CHECK_THROWS_AS(synth_corpus(spec), ValidationError);
  spec.target_mu_s = 0.0;
  CHECK_THROWS_AS(synth_corpus(spec), ValidationError);
  spec.target_mu_s = 0.23;
  spec.target_mu_m = 0.95;  // no headroom left for the latent trace
  CHECK_THROWS_AS(synth_corpus(spec), ValidationError);
}

TEST_CASE("synthetic generation is deterministic in the seed") {
  const SynthResult a = synth_corpus(arousal_preset(5));
  const SynthResult b = synth_corpus(arousal_preset(5));
  CHECK(a.bias == b.bias);
  CHECK(a.spread == b.spread);
  for (std::size_t q = 0; q < a.corpus.size(); ++q) {
    for (std::size_t i = 0; i < a.corpus[q].features.data.size(); ++i)
      CHECK(a.corpus[q].features.data[i] == b.corpus[q].features.data[i]);
    for (int t = 0; t < a.corpus[q].ann.frames(); ++t)
      for (int i = 0; i < a.corpus[q].ann.annotators(); ++i)
        CHECK(a.corpus[q].ann(t, i) == b.corpus[q].ann(t, i));
  }
  const SynthResult c = synth_corpus(arousal_preset(6));
  CHECK(c.corpus[0].ann(0, 0) != a.corpus[0].ann(0, 0));
}

TEST_CASE("zero disagreement spread floors every per-frame std") {
  SynthSpec spec = arousal_preset(2);
  spec.sequences = 2;
  spec.frames = 40;
  const SynthResult r = synth_corpus_raw(spec, 0.0, 0.0);
  for (const Sequence& seq : r.corpus) {
    const LabelDistribution ld = label_distribution(seq.ann);
    for (double s : ld.s) CHECK(s == kSigmaFloor);
    // all annotators carry the identical latent trace
    for (int t = 0; t < seq.ann.frames(); ++t)
      for (int i = 1; i < seq.ann.annotators(); ++i)
        CHECK(seq.ann(t, i) == seq.ann(t, 0));
  }
}

TEST_CASE("training fits a linear toy corpus") {
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 2;
  cfg.sequence_length = 40;
  cfg.epochs = 150;
  cfg.n_passes = 8;
  cfg.seed = 11;
  cfg.loss_variant = LossVariant::none;
  cfg.hidden = {};
  cfg.holdout_sequences = 1;
  const Corpus corpus = toy_linear_corpus(3, 80);
  const TrainResult result = train(cfg, corpus);
  CHECK(static_cast<int>(result.trace.size()) == 150);
  CHECK(result.best_epoch >= 1);
  // the trace tracks both splits every epoch
  for (const auto& row : result.trace) CHECK(row.has_holdout);
  // final fit: mean-weight prediction correlates strongly with the rating mean
  const MetricReport rep = evaluate(result.best, corpus, 8, 77);
  CHECK(rep.ccc_m > 0.9);
  CHECK(static_cast<int>(rep.per_sequence.size()) == 3);
}

TEST_CASE("training is bit-deterministic in config and seed") {
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 2;
  cfg.sequence_length = 25;
  cfg.epochs = 4;
  cfg.n_passes = 5;
  cfg.seed = 9;
  cfg.hidden = {6};
  cfg.holdout_sequences = 1;
  const Corpus corpus = toy_linear_corpus(3, 50);
  const TrainResult a = train(cfg, corpus);
  const TrainResult b = train(cfg, corpus);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t e = 0; e < a.trace.size(); ++e) {
    CHECK(a.trace[e].train.total == b.trace[e].train.total);
    CHECK(a.trace[e].holdout.total == b.trace[e].holdout.total);
  }
  CHECK(a.best_epoch == b.best_epoch);
  // different seed, different trajectory
  cfg.seed = 10;
  const TrainResult c = train(cfg, corpus);
  CHECK(c.trace[0].train.total != a.trace[0].train.total);
}

TEST_CASE("metrics hit their analytic optimum for an oracle predictor") {
  // with mu_hat = m and sigma_hat at the stationary scale lambda, the
  // per-frame divergence collapses to ln(2 pi e)/2 - entropy(nu, scale 1)
  const double nu = 6.0, s = 0.3;
  const double lam = scale_from_std(nu, s);
  LabelDistribution truth;
  truth.nu = nu;
  for (int t = 0; t < 50; ++t) {
    truth.m.push_back(0.5 * std::sin(0.2 * t));
    truth.s.push_back(s);
  }
  PredictiveDistribution pred;
  pred.mu_hat = truth.m;
  pred.sigma_hat.assign(50, lam);
  pred.n_passes = 30;

  const MetricReport rep = metrics_from_predictions({truth}, {pred},
                                                    LossVariant::t_kl, {"seq"});
  CHECK(std::fabs(rep.ccc_m - 1.0) < 1e-9);
  CHECK(std::fabs(rep.kl_eval - (-0.1727827919606421)) < 1e-9);

  // the gaussian variant's optimum is zero divergence at sigma_hat = s
  PredictiveDistribution pg = pred;
  pg.sigma_hat.assign(50, s);
  const MetricReport rg = metrics_from_predictions({truth}, {pg},
                                                   LossVariant::gauss_kl, {"seq"});
  CHECK(std::fabs(rg.kl_eval) < 1e-12);

  // variant none falls back to the t-form divergence
  const MetricReport rn = metrics_from_predictions({truth}, {pred},
                                                   LossVariant::none, {"seq"});
  CHECK(rn.kl_eval == rep.kl_eval);
}

TEST_CASE("metrics: constant predicted spread against varying s stays in range") {
  LabelDistribution truth;
  truth.nu = 6.0;
  PredictiveDistribution pred;
  pred.n_passes = 2;
  for (int t = 0; t < 40; ++t) {
    truth.m.push_back(0.3 * std::sin(0.2 * t));
    truth.s.push_back(0.2 + 0.1 * std::sin(0.5 * t));  // varying spread
    pred.mu_hat.push_back(0.3 * std::sin(0.2 * t));
    pred.sigma_hat.push_back(0.25);  // degenerate: zero variance across frames
  }
  const MetricReport rep = metrics_from_predictions({truth}, {pred},
                                                    LossVariant::t_kl, {"seq"});
  CHECK(std::isfinite(rep.ccc_s));
  CHECK(rep.ccc_s >= -1.0);
  CHECK(rep.ccc_s <= 1.0);
  CHECK(std::isfinite(rep.kl_eval));
}

TEST_CASE("evaluate is deterministic and reports every sequence") {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  cfg.sequence_length = 25;
  cfg.n_passes = 4;
  cfg.hidden = {5};
  cfg.holdout_sequences = 1;
  const Corpus corpus = toy_linear_corpus(3, 50);
  const TrainResult tr = train(cfg, corpus);
  const MetricReport a = evaluate(tr.best, corpus, 6, 123);
  const MetricReport b = evaluate(tr.best, corpus, 6, 123);
  CHECK(a.ccc_m == b.ccc_m);
  CHECK(a.ccc_s == b.ccc_s);
  CHECK(a.kl_eval == b.kl_eval);
  REQUIRE(a.per_sequence.size() == 3);
  for (std::size_t q = 0; q < 3; ++q) {
    CHECK(a.per_sequence[q].kl_eval == b.per_sequence[q].kl_eval);
    CHECK(std::isfinite(a.per_sequence[q].ccc_m));
  }
  const MetricReport c = evaluate(tr.best, corpus, 6, 124);
  CHECK(c.kl_eval != a.kl_eval);  // spread re-sampled under the new seed
}

TEST_CASE("incomplete_beta reference values") {
  CHECK(incomplete_beta(0.5, 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(incomplete_beta(3.0, 3.0, 0.5) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(incomplete_beta(3.0, 0.5, 0.3) ==
        doctest::Approx(0.0096036935902880701).epsilon(1e-10));
  CHECK(incomplete_beta(2.5, 4.0, 0.8) ==
        doctest::Approx(0.988878702369507).epsilon(1e-10));
  CHECK(incomplete_beta(50.0, 0.5, 0.99) ==
        doctest::Approx(0.31730439787419759).epsilon(1e-10));
  CHECK(incomplete_beta(1.0, 1.0, 0.0) == 0.0);
  CHECK(incomplete_beta(1.0, 1.0, 1.0) == 1.0);
}

TEST_CASE("student_t_cdf reference values and symmetry") {
  CHECK(student_t_cdf(0.0, 5.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(student_t_cdf(1.0, 3.0) ==
        doctest::Approx(0.80449889052211468).epsilon(1e-10));
  CHECK(student_t_cdf(2.0, 6.0) ==
        doctest::Approx(0.95378684423416243).epsilon(1e-10));
  CHECK(student_t_cdf(-0.75, 17.6) ==
        doctest::Approx(0.23158175578677804).epsilon(1e-10));
  CHECK(student_t_cdf(1.96, 100.0) ==
        doctest::Approx(0.97361054931688517).epsilon(1e-10));
  for (double t : {0.3, 1.2, 2.8}) {
    CHECK(student_t_cdf(-t, 9.0) ==
          doctest::Approx(1.0 - student_t_cdf(t, 9.0)).epsilon(1e-10));
  }
}

TEST_CASE("one-tailed unequal-variance t-test matches the reference cases") {
  CHECK(std::fabs(one_tailed_t_test(welch_a_a, welch_a_b) -
                  0.9999792570852977) < 1e-6);
  CHECK(std::fabs(one_tailed_t_test(welch_b_a, welch_b_b) -
                  0.08539013219833853) < 1e-6);
  CHECK(std::fabs(one_tailed_t_test(welch_c_a, welch_c_b) -
                  0.48616175911507165) < 1e-6);
}

TEST_CASE("t-test edge policies") {
  // identical samples: zero statistic
  const std::vector<double> x = {0.1, 0.2, 0.3, 0.4};
  CHECK(one_tailed_t_test(x, x) == doctest::Approx(0.5).epsilon(1e-12));
  // overwhelming separation
  std::vector<double> hi, lo;
  for (int i = 0; i < 12; ++i) {
    hi.push_back(10.0 + 0.01 * i);
    lo.push_back(0.01 * i);
  }
  CHECK(one_tailed_t_test(hi, lo) < 1e-6);
  CHECK(one_tailed_t_test(lo, hi) > 1.0 - 1e-6);
  // zero variance in both samples: decided by the mean ordering
  const std::vector<double> c1 = {1.0, 1.0, 1.0};
  const std::vector<double> c0 = {0.0, 0.0, 0.0};
  CHECK(one_tailed_t_test(c1, c0) == 0.0);
  CHECK(one_tailed_t_test(c0, c1) == 1.0);
  CHECK(one_tailed_t_test(c1, c1) == 0.5);
  CHECK_THROWS_AS(one_tailed_t_test({1.0}, x), ValidationError);
}
