#include "labeldist/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "labeldist/distributions.hpp"

namespace labeldist {

AnnotationMatrix::AnnotationMatrix(int frames, int annotators)
    : frames_(frames), annotators_(annotators) {
  if (frames < 1) throw std::invalid_argument("AnnotationMatrix: needs frames >= 1");
  if (annotators < 2) throw std::invalid_argument("AnnotationMatrix: needs annotators >= 2");
  data_.assign(static_cast<std::size_t>(frames) * annotators, 0.0);
}

AnnotationMatrix AnnotationMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("AnnotationMatrix: needs frames >= 1");
  const int a = static_cast<int>(rows[0].size());
  AnnotationMatrix m(static_cast<int>(rows.size()), a);
  for (int t = 0; t < m.frames(); ++t) {
    if (static_cast<int>(rows[t].size()) != a)
      throw std::invalid_argument("AnnotationMatrix: ragged rows");
    for (int i = 0; i < a; ++i) m.set(t, i, rows[t][i]);
  }
  return m;
}

void AnnotationMatrix::set(int t, int i, double y) {
  if (!std::isfinite(y))
    throw std::invalid_argument("AnnotationMatrix: rating must be finite");
  data_[static_cast<std::size_t>(t) * annotators_ + i] = std::clamp(y, -1.0, 1.0);
}

std::vector<double> mean_label(const AnnotationMatrix& ann) {
  std::vector<double> m(ann.frames());
  for (int t = 0; t < ann.frames(); ++t) {
    double s = 0.0;
    for (int i = 0; i < ann.annotators(); ++i) s += ann(t, i);
    m[t] = s / ann.annotators();
  }
  return m;
}

std::vector<double> unbiased_std(const AnnotationMatrix& ann) {
  const std::vector<double> m = mean_label(ann);
  std::vector<double> s(ann.frames());
  for (int t = 0; t < ann.frames(); ++t) {
    double ss = 0.0;
    for (int i = 0; i < ann.annotators(); ++i) {
      const double d = ann(t, i) - m[t];
      ss += d * d;
    }
    s[t] = std::max(std::sqrt(ss / (ann.annotators() - 1)), kSigmaFloor);
  }
  return s;
}

namespace {

// Pearson correlation; returns 0 when either side has zero variance (no
// linear agreement evidence).
double pearson_or_zero(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double mx = 0.0, my = 0.0;
  for (int t = 0; t < n; ++t) {
    mx += x[t];
    my += y[t];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int t = 0; t < n; ++t) {
    const double dx = x[t] - mx;
    const double dy = y[t] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

std::vector<double> ewe_label(const AnnotationMatrix& ann) {
  const int T = ann.frames();
  const int a = ann.annotators();

  std::vector<std::vector<double>> traces(a, std::vector<double>(T));
  for (int i = 0; i < a; ++i)
    for (int t = 0; t < T; ++t) traces[i][t] = ann(t, i);

  if (T > 1) {
    for (int i = 0; i < a; ++i) {
      double lo = traces[i][0], hi = traces[i][0];
      for (double v : traces[i]) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (lo == hi)
        throw std::invalid_argument("ewe_label: annotator trace has zero variance");
    }
  }

  std::vector<double> weights(a, 0.0);
  double wsum = 0.0;
  if (T > 1) {
    std::vector<double> others(T);
    for (int i = 0; i < a; ++i) {
      for (int t = 0; t < T; ++t) {
        double s = 0.0;
        for (int j = 0; j < a; ++j)
          if (j != i) s += traces[j][t];
        others[t] = s / (a - 1);
      }
      weights[i] = std::clamp(pearson_or_zero(traces[i], others), 0.0, 1.0);
      wsum += weights[i];
    }
  }

  if (wsum <= 0.0) return mean_label(ann);  // no agreement signal anywhere

  std::vector<double> out(T);
  for (int t = 0; t < T; ++t) {
    double s = 0.0;
    for (int i = 0; i < a; ++i) s += weights[i] * ann(t, i);
    out[t] = s / wsum;
  }
  return out;
}

LabelDistribution label_distribution(const AnnotationMatrix& ann) {
  if (ann.annotators() < 3)
    throw std::invalid_argument(
        "label_distribution: needs at least 3 annotators (nu = annotator count "
        "must exceed 2 for a finite-variance t)");
  LabelDistribution ld;
  ld.nu = static_cast<double>(ann.annotators());
  ld.m = mean_label(ann);
  ld.s = unbiased_std(ann);
  return ld;
}

}  // namespace labeldist
