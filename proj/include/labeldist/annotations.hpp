#pragma once

#include <vector>

namespace labeldist {

// Frame-by-annotator rating matrix.  Values are clamped to [-1, 1] on
// ingestion; NaN or infinite ratings are rejected.  Requires at least one
// frame and two annotators.
class AnnotationMatrix {
 public:
  AnnotationMatrix(int frames, int annotators);

  // rows[t][i] = rating of annotator i at frame t; all rows equal length.
  static AnnotationMatrix from_rows(const std::vector<std::vector<double>>& rows);

  int frames() const { return frames_; }
  int annotators() const { return annotators_; }

  double operator()(int t, int i) const {
    return data_[static_cast<std::size_t>(t) * annotators_ + i];
  }
  // Clamps to [-1, 1]; throws on NaN/inf.
  void set(int t, int i, double y);

 private:
  int frames_;
  int annotators_;
  std::vector<double> data_;
};

// Per-frame mean rating m_t = (1/a) * sum_i y_{t,i}.
std::vector<double> mean_label(const AnnotationMatrix& ann);

// Per-frame rating spread with the unbiased divisor (a - 1), floored at
// kSigmaFloor so degenerate frames (all annotators agree) stay usable as a
// distribution scale.
std::vector<double> unbiased_std(const AnnotationMatrix& ann);

// Evaluator-weighted estimator: annotator weights are the Pearson
// correlations against the leave-one-out mean over all frames, clipped to
// [0, 1] and normalized.  If every weight clips to zero the per-frame mean is
// returned instead.  An annotator whose own trace has zero variance (with
// more than one frame) is treated as corrupt input and rejected.
std::vector<double> ewe_label(const AnnotationMatrix& ann);

// Per-frame t-distribution frame for the rating spread: nu = annotator count,
// location m_t, std s_t (floored at kSigmaFloor).
struct LabelDistribution {
  double nu = 3.0;
  std::vector<double> m;
  std::vector<double> s;
};

// Requires at least 3 annotators so that nu = a stays in the finite-variance
// regime (nu > 2).
LabelDistribution label_distribution(const AnnotationMatrix& ann);

}  // namespace labeldist
