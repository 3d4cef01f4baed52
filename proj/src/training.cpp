#include "labeldist/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "labeldist/distributions.hpp"
#include "labeldist/special_math.hpp"

namespace labeldist {

namespace {

std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Stream keys for Rng::split, spaced so (epoch, batch) pairs never collide.
constexpr std::uint64_t kStreamInit = 0;
constexpr std::uint64_t kStreamShuffle = 1ULL << 56;
constexpr std::uint64_t kStreamBatch = 2ULL << 56;
constexpr std::uint64_t kStreamHoldout = 3ULL << 56;

}  // namespace

void validate_config(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate))
    throw ValidationError("config: learning_rate must be positive and finite");
  if (cfg.batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
  if (cfg.sequence_length < 2)
    throw ValidationError("config: sequence_length must be >= 2");
  if (cfg.epochs < 1) throw ValidationError("config: epochs must be >= 1");
  if (cfg.n_passes < 2)
    throw ValidationError("config: n_passes must be >= 2 (spread needs two samples)");
  if (!(cfg.prior_sigma > 0.0) || !std::isfinite(cfg.prior_sigma))
    throw ValidationError("config: prior_sigma must be positive and finite");
  if (!(cfg.likelihood_sigma > 0.0) || !std::isfinite(cfg.likelihood_sigma))
    throw ValidationError("config: likelihood_sigma must be positive and finite");
  if (cfg.holdout_sequences < 0)
    throw ValidationError("config: holdout_sequences must be >= 0");
  for (int h : cfg.hidden)
    if (h < 1) throw ValidationError("config: hidden layer sizes must be >= 1");
}

const char* loss_variant_name(LossVariant v) {
  switch (v) {
    case LossVariant::t_kl: return "t_kl";
    case LossVariant::gauss_kl: return "gauss_kl";
    case LossVariant::none: return "none";
  }
  return "t_kl";
}

LossVariant loss_variant_from_name(const std::string& name) {
  if (name == "t_kl") return LossVariant::t_kl;
  if (name == "gauss_kl") return LossVariant::gauss_kl;
  if (name == "none") return LossVariant::none;
  throw ValidationError("unknown loss_variant '" + name +
                        "' (expected t_kl, gauss_kl, or none)");
}

std::string config_canonical(const TrainConfig& cfg) {
  std::string hidden;
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    if (i) hidden += ',';
    hidden += std::to_string(cfg.hidden[i]);
  }
  std::string s;
  s += "learning_rate=" + fmt_g17(cfg.learning_rate) + "\n";
  s += "batch_size=" + std::to_string(cfg.batch_size) + "\n";
  s += "sequence_length=" + std::to_string(cfg.sequence_length) + "\n";
  s += "epochs=" + std::to_string(cfg.epochs) + "\n";
  s += "n_passes=" + std::to_string(cfg.n_passes) + "\n";
  s += "seed=" + std::to_string(cfg.seed) + "\n";
  s += "loss_variant=" + std::string(loss_variant_name(cfg.loss_variant)) + "\n";
  s += "hidden=" + hidden + "\n";
  s += "prior_sigma=" + fmt_g17(cfg.prior_sigma) + "\n";
  s += "likelihood_sigma=" + fmt_g17(cfg.likelihood_sigma) + "\n";
  s += "holdout_sequences=" + std::to_string(cfg.holdout_sequences) + "\n";
  s += "select_on=" + std::string(cfg.select_on == SelectOn::train ? "train" : "holdout") + "\n";
  return s;
}

std::uint64_t config_hash(const TrainConfig& cfg) {
  const std::string s = config_canonical(cfg);
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, double lr) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: parameter/gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  } else if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: state size mismatch");
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++state.step;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    params[i] -= lr * (state.m[i] / bc1) / (std::sqrt(state.v[i] / bc2) + eps);
  }
}

// ---- synthetic corpus ----

SynthSpec arousal_preset(std::uint64_t seed) {
  SynthSpec s;
  s.target_mu_m = 0.01;
  s.target_mu_s = 0.23;
  s.seed = seed;
  s.dimension_name = "arousal";
  return s;
}

SynthSpec valence_preset(std::uint64_t seed) {
  SynthSpec s;
  s.target_mu_m = 0.11;
  s.target_mu_s = 0.14;
  s.seed = seed;
  s.dimension_name = "valence";
  return s;
}

namespace {

// Everything random in one corpus, drawn once; bias/spread are applied as
// deterministic transforms afterwards so calibration never disturbs the
// draw order.
struct RawCorpus {
  std::vector<std::vector<double>> base;          // [seq][t], pre-tanh latent
  std::vector<std::vector<double>> perturb_unit;  // [seq][t*a + i], unit spread
  std::vector<std::vector<double>> feat_noise;    // [seq][t*d + j]
};

RawCorpus draw_raw(const SynthSpec& spec) {
  RawCorpus raw;
  Rng master(spec.seed);
  const int T = spec.frames, a = spec.annotators, d = spec.feature_dim;
  const double two_pi = 6.283185307179586;
  for (int q = 0; q < spec.sequences; ++q) {
    Rng rng = master.split(static_cast<std::uint64_t>(q) + 1);

    double amp[3], omega[3], phase[3];
    for (int k = 0; k < 3; ++k) {
      amp[k] = 0.25 + 0.5 * rng.uniform();
      omega[k] = 0.021 + 0.23 * rng.uniform();
      phase[k] = two_pi * rng.uniform();
    }
    std::vector<double> drift_amp(a), drift_omega(a), drift_phase(a);
    for (int i = 0; i < a; ++i) {
      drift_amp[i] = 0.5 + 0.5 * rng.uniform();
      drift_omega[i] = 0.01 + 0.05 * rng.uniform();
      drift_phase[i] = two_pi * rng.uniform();
    }

    std::vector<double> base(T);
    for (int t = 0; t < T; ++t) {
      double v = 0.0;
      for (int k = 0; k < 3; ++k) v += amp[k] * std::sin(omega[k] * t + phase[k]);
      base[t] = v;
    }

    // Per-frame, per-annotator disagreement at unit spread: slow personal
    // drift plus heavy-tailed noise (nu=3 t deviate = n0 / sqrt(chi2_3 / 3)).
    std::vector<double> perturb(static_cast<std::size_t>(T) * a);
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < a; ++i) {
        const double n0 = rng.normal();
        const double c1 = rng.normal(), c2 = rng.normal(), c3 = rng.normal();
        const double chi2 = c1 * c1 + c2 * c2 + c3 * c3;
        const double t3 = n0 / std::sqrt(std::max(chi2 / 3.0, 1e-12));
        const double drift =
            drift_amp[i] * std::sin(drift_omega[i] * t + drift_phase[i]);
        perturb[static_cast<std::size_t>(t) * a + i] = 0.4 * drift + 0.6 * t3;
      }

    std::vector<double> fnoise(static_cast<std::size_t>(T) * d);
    for (std::size_t z = 0; z < fnoise.size(); ++z) fnoise[z] = rng.normal();

    raw.base.push_back(std::move(base));
    raw.perturb_unit.push_back(std::move(perturb));
    raw.feat_noise.push_back(std::move(fnoise));
  }
  return raw;
}

double feature_transform(int j, double z) {
  const double scale = 1.0 + (j / 8) * 0.125;
  switch (j % 8) {
    case 0: return scale * z;
    case 1: return z * z * scale;
    case 2: return std::sin(2.7 * scale * z);
    case 3: return std::tanh(1.5 * scale * z + 0.3);
    case 4: return std::fabs(z) * scale;
    case 5: return z * z * z * scale;
    case 6: return std::cos(1.3 * scale * z);
    default: return 0.6 * z + 0.2 * z * z * scale;
  }
}

SynthResult assemble(const SynthSpec& spec, const RawCorpus& raw, double bias,
                     double spread) {
  SynthResult out;
  out.bias = bias;
  out.spread = spread;
  const int T = spec.frames, a = spec.annotators, d = spec.feature_dim;
  double sum_m = 0.0, sum_s = 0.0;
  long n_frames = 0;
  for (int q = 0; q < spec.sequences; ++q) {
    AnnotationMatrix ann(T, a);
    Matrix X(T, d);
    for (int t = 0; t < T; ++t) {
      const double z = std::tanh(bias + raw.base[q][t]);
      for (int i = 0; i < a; ++i) {
        const double y =
            z + spread * raw.perturb_unit[q][static_cast<std::size_t>(t) * a + i];
        ann.set(t, i, std::clamp(y, -1.0, 1.0));
      }
      for (int j = 0; j < d; ++j)
        X(t, j) = feature_transform(j, z) +
                  0.05 * raw.feat_noise[q][static_cast<std::size_t>(t) * d + j];
    }
    const std::vector<double> m = mean_label(ann);
    const std::vector<double> s = unbiased_std(ann);
    for (int t = 0; t < T; ++t) {
      sum_m += m[t];
      sum_s += s[t];
    }
    n_frames += T;
    char name[32];
    std::snprintf(name, sizeof name, "seq_%02d", q + 1);
    out.corpus.push_back(Sequence{std::move(X), std::move(ann), spec.frame_period, name});
  }
  out.achieved_mu_m = sum_m / n_frames;
  out.achieved_mu_s = sum_s / n_frames;
  return out;
}

void validate_synth_spec(const SynthSpec& spec) {
  if (spec.sequences < 1) throw ValidationError("synth: sequences must be >= 1");
  if (spec.frames < 2) throw ValidationError("synth: frames must be >= 2");
  if (spec.annotators < 3)
    throw ValidationError(
        "synth: annotators must be >= 3 (the label model sets the degrees of "
        "freedom to the annotator count, which must exceed 2)");
  if (spec.feature_dim < 1) throw ValidationError("synth: feature_dim must be >= 1");
  if (!(spec.frame_period > 0.0))
    throw ValidationError("synth: frame_period must be positive");
  if (!(spec.target_mu_s > 0.0) || spec.target_mu_s > 1.0)
    throw ValidationError("synth: target_mu_s must lie in (0, 1]");
  if (!(std::fabs(spec.target_mu_m) < 0.9))
    throw ValidationError("synth: |target_mu_m| must be < 0.9");
}

}  // namespace

SynthResult synth_corpus_raw(const SynthSpec& spec, double bias, double spread) {
  validate_synth_spec(spec);
  if (spread < 0.0) throw ValidationError("synth: spread must be >= 0");
  return assemble(spec, draw_raw(spec), bias, spread);
}

SynthResult synth_corpus(const SynthSpec& spec) {
  validate_synth_spec(spec);
  const RawCorpus raw = draw_raw(spec);

  // mean_s is monotone increasing in spread, mean_m in bias; two rounds of
  // alternating bisection decouple the mild cross-dependence.
  double bias = std::atanh(std::clamp(spec.target_mu_m, -0.85, 0.85));
  double spread = 0.0;
  for (int round = 0; round < 2; ++round) {
    double lo = 0.0, hi = 3.0;
    for (int it = 0; it < 48; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (assemble(spec, raw, bias, mid).achieved_mu_s < spec.target_mu_s)
        lo = mid;
      else
        hi = mid;
    }
    spread = 0.5 * (lo + hi);
    lo = -3.0;
    hi = 3.0;
    for (int it = 0; it < 48; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (assemble(spec, raw, mid, spread).achieved_mu_m < spec.target_mu_m)
        lo = mid;
      else
        hi = mid;
    }
    bias = 0.5 * (lo + hi);
  }

  SynthResult out = assemble(spec, raw, bias, spread);
  if (std::fabs(out.achieved_mu_m - spec.target_mu_m) > 0.05 ||
      std::fabs(out.achieved_mu_s - spec.target_mu_s) > 0.05)
    throw ValidationError(
        "synth: calibration could not reach the requested corpus statistics "
        "(achieved mu_m=" + fmt_g17(out.achieved_mu_m) +
        ", mu_s=" + fmt_g17(out.achieved_mu_s) + ")");
  return out;
}

// ---- training loop ----

namespace {

struct Window {
  int seq = 0;
  int start = 0;
  int len = 0;
};

struct BatchData {
  Matrix X;               // frames x d
  std::vector<double> m;  // per-frame rating mean
  std::vector<double> s;  // per-frame rating spread
};

void validate_corpus(const Corpus& corpus) {
  if (corpus.empty()) throw ValidationError("corpus is empty");
  const int d = corpus.front().features.cols;
  const int a = corpus.front().ann.annotators();
  for (const Sequence& seq : corpus) {
    if (seq.features.rows != seq.ann.frames())
      throw ValidationError("sequence '" + seq.name +
                            "': feature and annotation frame counts differ");
    if (seq.features.rows < 2)
      throw ValidationError("sequence '" + seq.name + "': needs >= 2 frames");
    if (seq.features.cols != d)
      throw ValidationError("sequence '" + seq.name + "': feature dim differs");
    if (seq.ann.annotators() != a)
      throw ValidationError("sequence '" + seq.name + "': annotator count differs");
    for (int t = 0; t < seq.features.rows; ++t)
      for (int j = 0; j < d; ++j)
        if (!std::isfinite(seq.features(t, j)))
          throw ValidationError("sequence '" + seq.name + "': non-finite feature");
  }
  if (a < 3)
    throw ValidationError(
        "corpus has fewer than 3 annotators; the label model needs degrees of "
        "freedom = annotator count > 2");
}

BatchData gather(const Corpus& corpus,
                 const std::vector<LabelDistribution>& labels,
                 const std::vector<Window>& windows) {
  int F = 0;
  for (const Window& w : windows) F += w.len;
  const int d = corpus.front().features.cols;
  BatchData b;
  b.X = Matrix(F, d);
  b.m.resize(F);
  b.s.resize(F);
  int row = 0;
  for (const Window& w : windows) {
    const Matrix& feat = corpus[w.seq].features;
    const LabelDistribution& ld = labels[w.seq];
    for (int t = 0; t < w.len; ++t, ++row) {
      for (int j = 0; j < d; ++j) b.X(row, j) = feat(w.start + t, j);
      b.m[row] = ld.m[w.start + t];
      b.s[row] = ld.s[w.start + t];
    }
  }
  return b;
}

// Population-std Gaussian fit per frame over the pass outputs, matching
// fit_gaussian (divisor n, kSigmaFloor).  floored[f] marks frames whose raw
// spread fell below the floor, where the spread gradient is zero.
void fit_frames(const std::vector<const std::vector<double>*>& outs, int F,
                std::vector<double>& mu, std::vector<double>& sd,
                std::vector<char>& floored) {
  const int n = static_cast<int>(outs.size());
  mu.assign(F, 0.0);
  sd.assign(F, 0.0);
  floored.assign(F, 0);
  for (int i = 0; i < n; ++i) {
    const std::vector<double>& y = *outs[i];
    for (int f = 0; f < F; ++f) mu[f] += y[f];
  }
  for (int f = 0; f < F; ++f) mu[f] /= n;
  for (int i = 0; i < n; ++i) {
    const std::vector<double>& y = *outs[i];
    for (int f = 0; f < F; ++f) {
      const double dlt = y[f] - mu[f];
      sd[f] += dlt * dlt;
    }
  }
  for (int f = 0; f < F; ++f) {
    const double raw = std::sqrt(sd[f] / n);
    if (raw < kSigmaFloor) {
      sd[f] = kSigmaFloor;
      floored[f] = 1;
    } else {
      sd[f] = raw;
    }
  }
}

double frame_kl(LossVariant v, double nu, double m, double s, double mu_hat,
                double sd_hat) {
  switch (v) {
    case LossVariant::t_kl:
      return kl_t_gauss(nu, m, s, Gaussian(mu_hat, sd_hat));
    case LossVariant::gauss_kl:
      return kl_gauss_gauss(Gaussian(m, s), Gaussian(mu_hat, sd_hat));
    case LossVariant::none:
      return 0.0;
  }
  return 0.0;
}

KlGrad frame_kl_grad(LossVariant v, double nu, double m, double s, double mu_hat,
                     double sd_hat) {
  switch (v) {
    case LossVariant::t_kl:
      return kl_t_gauss_grad(nu, m, s, Gaussian(mu_hat, sd_hat));
    case LossVariant::gauss_kl:
      return kl_gauss_gauss_grad(Gaussian(m, s), Gaussian(mu_hat, sd_hat));
    case LossVariant::none:
      return KlGrad{};
  }
  return KlGrad{};
}

struct AdamLayerState {
  AdamState mu_w, rho_w, mu_b, rho_b;
};

// Loss report for one frame block under the training (stochastic) protocol,
// with the complexity term down-weighted like a training batch.
LossReport block_report(const BayesNet& net, const BatchData& b, double nu,
                        const TrainConfig& cfg, double complexity_weight,
                        Rng& rng, const char* what) {
  const int F = b.X.rows, n = cfg.n_passes;
  std::vector<std::vector<double>> outs(n);
  for (int i = 0; i < n; ++i) {
    const WeightSample ws = sample_weights(net, rng);
    outs[i] = forward_sampled(net, ws, b.X);
  }
  std::vector<const std::vector<double>*> refs(n);
  for (int i = 0; i < n; ++i) refs[i] = &outs[i];
  std::vector<double> mu, sd;
  std::vector<char> floored;
  fit_frames(refs, F, mu, sd, floored);
  for (int f = 0; f < F; ++f)
    if (!std::isfinite(mu[f]) || !std::isfinite(sd[f]))
      throw DivergenceError(std::string("non-finite prediction while evaluating ") +
                            what);

  LossReport rep;
  rep.ccc_term = 1.0 - ccc(b.m, mu);
  double kl = 0.0;
  for (int f = 0; f < F; ++f) kl += frame_kl(cfg.loss_variant, nu, b.m[f], b.s[f], mu[f], sd[f]);
  rep.kl_term = kl / F;
  double nll = 0.0;
  for (int i = 0; i < n; ++i) nll += gaussian_nll(outs[i], b.m, cfg.likelihood_sigma);
  rep.bbb_term = complexity_weight * complexity_closed_form(net) + nll / n;
  rep.total = rep.ccc_term + rep.bbb_term + rep.kl_term;
  if (!std::isfinite(rep.total))
    throw DivergenceError(std::string("non-finite loss while evaluating ") + what);
  return rep;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Corpus& corpus) {
  validate_config(cfg);
  validate_corpus(corpus);
  const int S = static_cast<int>(corpus.size());
  const int H = cfg.holdout_sequences;
  if (H >= S)
    throw ValidationError("config: holdout_sequences must leave at least one "
                          "training sequence");
  if (cfg.select_on == SelectOn::holdout && H == 0)
    throw ValidationError("config: select_on=holdout requires holdout_sequences >= 1");

  std::vector<LabelDistribution> labels;
  labels.reserve(corpus.size());
  for (const Sequence& seq : corpus) labels.push_back(label_distribution(seq.ann));
  const double nu = labels.front().nu;
  const int d = corpus.front().features.cols;

  // Training windows: consecutive sequence_length chunks; a sequence shorter
  // than one window contributes itself whole.
  std::vector<Window> windows;
  for (int q = 0; q < S - H; ++q) {
    const int T = corpus[q].features.rows;
    if (T < cfg.sequence_length) {
      windows.push_back(Window{q, 0, T});
      continue;
    }
    for (int start = 0; start + cfg.sequence_length <= T; start += cfg.sequence_length)
      windows.push_back(Window{q, start, cfg.sequence_length});
  }
  const int W = static_cast<int>(windows.size());
  const int B = (W + cfg.batch_size - 1) / cfg.batch_size;

  std::vector<Window> holdout_windows;
  for (int q = S - H; q < S; ++q)
    holdout_windows.push_back(Window{q, 0, corpus[q].features.rows});
  BatchData holdout_data;
  if (H > 0) holdout_data = gather(corpus, labels, holdout_windows);

  Rng master(cfg.seed);
  Rng init_rng = master.split(kStreamInit);
  BayesNet net = make_net(d, cfg.hidden, cfg.prior_sigma, init_rng);

  std::vector<AdamLayerState> adam(net.layers.size());
  const double inv_slik2 = 1.0 / (cfg.likelihood_sigma * cfg.likelihood_sigma);

  TrainResult result;
  result.best.loss_variant = cfg.loss_variant;
  result.best.n_passes = cfg.n_passes;
  result.best.cfg_hash = config_hash(cfg);
  double best_value = std::numeric_limits<double>::infinity();
  BayesNet best_net = net;
  int best_epoch = 0;

  std::vector<int> order(W);
  for (int i = 0; i < W; ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = master.split(kStreamShuffle + static_cast<std::uint64_t>(epoch));
    for (int i = W - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform() * (i + 1));
      std::swap(order[i], order[std::min(j, i)]);
    }

    double sum_ccc = 0.0, sum_bbb = 0.0, sum_kl = 0.0;
    for (int bidx = 0; bidx < B; ++bidx) {
      std::vector<Window> batch_windows;
      for (int i = bidx * cfg.batch_size;
           i < std::min(W, (bidx + 1) * cfg.batch_size); ++i)
        batch_windows.push_back(windows[order[i]]);
      const BatchData b = gather(corpus, labels, batch_windows);
      const int F = b.X.rows, n = cfg.n_passes;

      Rng step_rng = master.split(kStreamBatch +
                                  (static_cast<std::uint64_t>(epoch) << 24) +
                                  static_cast<std::uint64_t>(bidx));
      const PassBatch pb(net, b.X, n, step_rng);

      std::vector<const std::vector<double>*> refs(n);
      for (int i = 0; i < n; ++i) refs[i] = &pb.outputs(i);
      std::vector<double> mu, sd;
      std::vector<char> floored;
      fit_frames(refs, F, mu, sd, floored);
      for (int f = 0; f < F; ++f)
        if (!std::isfinite(mu[f]) || !std::isfinite(sd[f]))
          throw DivergenceError("training diverged: non-finite prediction at epoch " +
                                std::to_string(epoch + 1) + ", batch " +
                                std::to_string(bidx + 1));

      LossReport rep;
      rep.ccc_term = 1.0 - ccc(b.m, mu);
      std::vector<double> kmu(F), ksd(F);
      double kl = 0.0;
      for (int f = 0; f < F; ++f) {
        kl += frame_kl(cfg.loss_variant, nu, b.m[f], b.s[f], mu[f], sd[f]);
        const KlGrad kg = frame_kl_grad(cfg.loss_variant, nu, b.m[f], b.s[f], mu[f], sd[f]);
        kmu[f] = kg.d_mu_hat / F;
        ksd[f] = kg.d_sigma_hat / F;
      }
      rep.kl_term = kl / F;
      double nll = 0.0;
      for (int i = 0; i < n; ++i) nll += gaussian_nll(pb.outputs(i), b.m, cfg.likelihood_sigma);
      rep.bbb_term = complexity_closed_form(net) / B + nll / n;
      rep.total = rep.ccc_term + rep.bbb_term + rep.kl_term;
      if (!std::isfinite(rep.total))
        throw DivergenceError("training diverged: non-finite loss at epoch " +
                              std::to_string(epoch + 1) + ", batch " +
                              std::to_string(bidx + 1));

      const std::vector<double> cg = ccc_loss_grad(b.m, mu);
      std::vector<std::vector<double>> d_out(n, std::vector<double>(F));
      for (int i = 0; i < n; ++i) {
        const std::vector<double>& y = pb.outputs(i);
        for (int f = 0; f < F; ++f) {
          double g = (cg[f] + kmu[f]) / n + (y[f] - b.m[f]) * inv_slik2 / n;
          if (!floored[f]) g += ksd[f] * (y[f] - mu[f]) / (n * sd[f]);
          d_out[i][f] = g;
        }
      }
      NetGrads grads = NetGrads::zeros_like(net);
      pb.backward(net, d_out, grads);
      add_complexity_grad_closed(net, 1.0 / B, grads);

      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        adam_step(net.layers[l].mu_w.data, grads.d_mu_w[l].data, adam[l].mu_w,
                  cfg.learning_rate);
        adam_step(net.layers[l].rho_w.data, grads.d_rho_w[l].data, adam[l].rho_w,
                  cfg.learning_rate);
        adam_step(net.layers[l].mu_b, grads.d_mu_b[l], adam[l].mu_b,
                  cfg.learning_rate);
        adam_step(net.layers[l].rho_b, grads.d_rho_b[l], adam[l].rho_b,
                  cfg.learning_rate);
      }

      sum_ccc += rep.ccc_term;
      sum_bbb += rep.bbb_term;
      sum_kl += rep.kl_term;
    }

    EpochRow row;
    row.epoch = epoch + 1;
    row.train.ccc_term = sum_ccc / B;
    row.train.bbb_term = sum_bbb / B;
    row.train.kl_term = sum_kl / B;
    row.train.total = row.train.ccc_term + row.train.bbb_term + row.train.kl_term;
    if (H > 0) {
      Rng hold_rng = master.split(kStreamHoldout + static_cast<std::uint64_t>(epoch));
      row.holdout = block_report(net, holdout_data, nu, cfg, 1.0 / B, hold_rng,
                                 "the held-out partition");
      row.has_holdout = true;
    }
    result.trace.push_back(row);

    const double sel =
        cfg.select_on == SelectOn::train ? row.train.total : row.holdout.total;
    if (sel < best_value) {
      best_value = sel;
      best_net = net;
      best_epoch = epoch + 1;
    }
  }

  result.best.net = std::move(best_net);
  result.best_epoch = best_epoch;
  return result;
}

// ---- evaluation ----

MetricReport metrics_from_predictions(const std::vector<LabelDistribution>& truths,
                                      const std::vector<PredictiveDistribution>& preds,
                                      LossVariant variant,
                                      const std::vector<std::string>& names) {
  if (truths.size() != preds.size() || truths.size() != names.size())
    throw std::invalid_argument("metrics_from_predictions: list size mismatch");
  if (truths.empty())
    throw std::invalid_argument("metrics_from_predictions: no sequences");
  const LossVariant kl_variant =
      variant == LossVariant::none ? LossVariant::t_kl : variant;

  MetricReport report;
  std::vector<double> all_m, all_mu, all_s, all_sd;
  double kl_sum = 0.0;
  long frames = 0;
  for (std::size_t q = 0; q < truths.size(); ++q) {
    const LabelDistribution& tr = truths[q];
    const PredictiveDistribution& pd = preds[q];
    const int T = static_cast<int>(tr.m.size());
    if (static_cast<int>(pd.mu_hat.size()) != T ||
        static_cast<int>(pd.sigma_hat.size()) != T)
      throw std::invalid_argument("metrics_from_predictions: frame count mismatch");
    SequenceMetrics sm;
    sm.name = names[q];
    sm.ccc_m = ccc(tr.m, pd.mu_hat);
    sm.ccc_s = ccc(tr.s, pd.sigma_hat);
    double kl = 0.0;
    for (int t = 0; t < T; ++t)
      kl += frame_kl(kl_variant, tr.nu, tr.m[t], tr.s[t], pd.mu_hat[t], pd.sigma_hat[t]);
    sm.kl_eval = kl / T;
    kl_sum += kl;
    frames += T;
    report.per_sequence.push_back(std::move(sm));
    all_m.insert(all_m.end(), tr.m.begin(), tr.m.end());
    all_mu.insert(all_mu.end(), pd.mu_hat.begin(), pd.mu_hat.end());
    all_s.insert(all_s.end(), tr.s.begin(), tr.s.end());
    all_sd.insert(all_sd.end(), pd.sigma_hat.begin(), pd.sigma_hat.end());
  }
  report.ccc_m = ccc(all_m, all_mu);
  report.ccc_s = ccc(all_s, all_sd);
  report.kl_eval = kl_sum / frames;
  return report;
}

MetricReport evaluate(const Checkpoint& ckpt, const Corpus& corpus, int n_passes,
                      std::uint64_t seed) {
  validate_corpus(corpus);
  const int n = n_passes > 0 ? n_passes : ckpt.n_passes;
  if (n < 2) throw ValidationError("evaluate: n_passes must be >= 2");
  Rng master(seed);
  std::vector<LabelDistribution> truths;
  std::vector<PredictiveDistribution> preds;
  std::vector<std::string> names;
  for (std::size_t q = 0; q < corpus.size(); ++q) {
    truths.push_back(label_distribution(corpus[q].ann));
    Rng rng = master.split(q + 1);
    preds.push_back(predict(ckpt.net, corpus[q].features, n, rng));
    names.push_back(corpus[q].name);
  }
  return metrics_from_predictions(truths, preds, ckpt.loss_variant, names);
}

// ---- significance test ----

namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr double kFpMin = 1e-300;
  constexpr double kEps = 1e-12;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double dnm = 1.0 - qab * x / qap;
  if (std::fabs(dnm) < kFpMin) dnm = kFpMin;
  dnm = 1.0 / dnm;
  double h = dnm;
  for (int it = 1; it <= 300; ++it) {
    const int m2 = 2 * it;
    double aa = it * (b - it) * x / ((qam + m2) * (a + m2));
    dnm = 1.0 + aa * dnm;
    if (std::fabs(dnm) < kFpMin) dnm = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    dnm = 1.0 / dnm;
    h *= dnm * c;
    aa = -(a + it) * (qab + it) * x / ((a + m2) * (qap + m2));
    dnm = 1.0 + aa * dnm;
    if (std::fabs(dnm) < kFpMin) dnm = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    dnm = 1.0 / dnm;
    const double del = dnm * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::domain_error("incomplete_beta: a and b must be positive");
  if (std::isnan(x) || x < -1e-12 || x > 1.0 + 1e-12)
    throw std::domain_error("incomplete_beta: x must lie in [0, 1]");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - incomplete_beta(b, a, 1.0 - x);
  const double ln_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
  return std::exp(ln_front) * beta_continued_fraction(a, b, x) / a;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw std::domain_error("student_t_cdf: df must be positive");
  if (t == 0.0) return 0.5;
  const double x = df / (df + t * t);
  const double p = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - p : p;
}

double one_tailed_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  const int na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
  if (na < 2 || nb < 2)
    throw ValidationError("one_tailed_t_test: each sample needs >= 2 values");
  double ma = 0.0, mb = 0.0;
  for (double v : a) {
    if (!std::isfinite(v)) throw ValidationError("one_tailed_t_test: non-finite value");
    ma += v;
  }
  for (double v : b) {
    if (!std::isfinite(v)) throw ValidationError("one_tailed_t_test: non-finite value");
    mb += v;
  }
  ma /= na;
  mb /= nb;
  double va = 0.0, vb = 0.0;
  for (double v : a) va += (v - ma) * (v - ma);
  for (double v : b) vb += (v - mb) * (v - mb);
  va /= na - 1;
  vb /= nb - 1;
  if (va <= 0.0 && vb <= 0.0) {
    if (ma == mb) return 0.5;
    return ma > mb ? 0.0 : 1.0;
  }
  const double sa = va / na, sb = vb / nb;
  const double t = (ma - mb) / std::sqrt(sa + sb);
  const double df =
      (sa + sb) * (sa + sb) / (sa * sa / (na - 1) + sb * sb / (nb - 1));
  return 1.0 - student_t_cdf(t, df);
}

}  // namespace labeldist
