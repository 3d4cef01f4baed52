#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "labeldist/annotations.hpp"
#include "labeldist/errors.hpp"
#include "labeldist/matrix.hpp"
#include "labeldist/training.hpp"

namespace labeldist {

// %.17g rendering: round-trips doubles exactly, so rewritten files are
// byte-identical across runs.
std::string format_double(double v);

// Hex image of the IEEE-754 bit pattern (16 lowercase digits); the
// bit-exact transport used inside checkpoints.
std::string double_to_hex(double v);
double hex_to_double(const std::string& s, const std::string& context);

// ---- annotation CSV ----
// Header `time_s,ann_1,...,ann_a`; one row per frame; times must ascend with
// uniform spacing (tolerance 1e-6 s).  Values are clamped to [-1, 1] on read;
// non-finite entries are rejected.

void write_annotation_csv(const std::string& path, const AnnotationMatrix& ann,
                          double frame_period);

struct AnnotationFile {
  AnnotationMatrix ann;
  double frame_period;
};
AnnotationFile read_annotation_csv(const std::string& path);

// ---- feature CSV ----
// Header `time_s,f_1,...,f_d`, same timing contract; values must be finite.

void write_feature_csv(const std::string& path, const Matrix& features,
                       double frame_period);

struct FeatureFile {
  Matrix features;
  double frame_period;
};
FeatureFile read_feature_csv(const std::string& path);

// ---- loss trace CSV ----
// Header `epoch,split,ccc_term,bbb_term,kl_term,total`; one row per epoch and
// split (train always, holdout when present).

void write_loss_trace_csv(const std::string& path, const std::vector<EpochRow>& trace);
std::vector<EpochRow> read_loss_trace_csv(const std::string& path);

// ---- metrics JSON ----
// Keys ccc_m, ccc_s, kl_eval, per_sequence (array of {sequence, ccc_m, ccc_s,
// kl_eval}).

void write_metrics_json(const std::string& path, const MetricReport& report);
MetricReport read_metrics_json(const std::string& path);

// ---- corpus manifest ----

struct CorpusManifest {
  std::string dimension;
  int sequences = 0;
  int frames = 0;
  int annotators = 0;
  int feature_dim = 0;
  double frame_period = 0.040;
  std::uint64_t seed = 0;
  double target_mu_m = 0.0;
  double target_mu_s = 0.0;
  double achieved_mu_m = 0.0;
  double achieved_mu_s = 0.0;
  std::vector<std::string> annotation_files; // relative to the manifest dir
  std::vector<std::string> feature_files;
};

void write_manifest_json(const std::string& path, const CorpusManifest& manifest);
CorpusManifest read_manifest_json(const std::string& path);

// Writes one annotation + feature CSV pair per sequence plus manifest.json.
void save_corpus(const std::string& dir, const Corpus& corpus,
                 CorpusManifest manifest);

// Loads a directory written by save_corpus via its manifest.json.
Corpus load_corpus(const std::string& dir);

// ---- checkpoint ----
// Versioned text container with hex-encoded parameters; read(write(c)) == c
// bit for bit.

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

// ---- config file ----
// Flat key=value lines; '#' starts a comment; unknown keys are rejected.
// Keys: learning_rate, batch_size, sequence_length, epochs, n_passes, seed,
// loss_variant, hidden (comma-separated sizes), prior_sigma,
// likelihood_sigma, holdout_sequences, select_on.

TrainConfig parse_config_text(const std::string& text, const std::string& context);
TrainConfig read_config(const std::string& path);
void write_config(const std::string& path, const TrainConfig& cfg);

}  // namespace labeldist
