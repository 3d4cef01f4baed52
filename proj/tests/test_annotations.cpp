#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "labeldist/annotations.hpp"
#include "labeldist/distributions.hpp"

using labeldist::AnnotationMatrix;
using labeldist::ewe_label;
using labeldist::kSigmaFloor;
using labeldist::label_distribution;
using labeldist::LabelDistribution;
using labeldist::mean_label;
using labeldist::unbiased_std;

namespace {

AnnotationMatrix mat(const std::vector<std::vector<double>>& rows) {
  return AnnotationMatrix::from_rows(rows);
}

}  // namespace

TEST_CASE("ingestion clamps to [-1, 1] and rejects non-finite ratings") {
  AnnotationMatrix a(1, 3);
  a.set(0, 0, 3.5);
  a.set(0, 1, -2.0);
  a.set(0, 2, 0.25);
  CHECK(a(0, 0) == 1.0);
  CHECK(a(0, 1) == -1.0);
  CHECK(a(0, 2) == 0.25);
  CHECK_THROWS_AS(a.set(0, 0, std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(a.set(0, 0, INFINITY), std::invalid_argument);
  CHECK_THROWS_AS(AnnotationMatrix(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(AnnotationMatrix(5, 1), std::invalid_argument);
}

TEST_CASE("mean_label arithmetic") {
  CHECK(mean_label(mat({{0.2, 0.4, 0.6}}))[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(mean_label(mat({{-1.0, 1.0}}))[0] == doctest::Approx(0.0).scale(1e-15));
  const AnnotationMatrix c = mat({{0.3, 0.3, 0.3}, {-0.1, -0.1, -0.1}});
  const std::vector<double> m = mean_label(c);
  CHECK(m[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(m[1] == doctest::Approx(-0.1).epsilon(1e-15));
}

TEST_CASE("unbiased_std uses divisor a-1 and floors degenerate frames") {
  CHECK(unbiased_std(mat({{0.2, 0.4, 0.6}}))[0] == doctest::Approx(0.2).epsilon(1e-13));
  CHECK(unbiased_std(mat({{-1.0, 1.0}}))[0] ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(unbiased_std(mat({{0.5, 0.5, 0.5, 0.5}}))[0] == kSigmaFloor);
}

TEST_CASE("mean and std are permutation-invariant over annotators") {
  const AnnotationMatrix a = mat({{0.1, -0.4, 0.8, 0.3}, {0.0, 0.2, -0.2, 0.6}});
  const AnnotationMatrix b = mat({{0.3, 0.8, -0.4, 0.1}, {0.6, -0.2, 0.2, 0.0}});
  const std::vector<double> ma = mean_label(a), mb = mean_label(b);
  const std::vector<double> sa = unbiased_std(a), sb = unbiased_std(b);
  for (int t = 0; t < 2; ++t) {
    CHECK(ma[t] == doctest::Approx(mb[t]).epsilon(1e-15));
    CHECK(sa[t] == doctest::Approx(sb[t]).epsilon(1e-15));
  }
}

TEST_CASE("affine equivariance away from the clamp") {
  // y -> alpha y + beta maps m -> alpha m + beta, s -> alpha s
  const std::vector<std::vector<double>> base = {
      {0.10, -0.20, 0.05}, {0.30, 0.15, -0.10}, {-0.25, 0.00, 0.20}};
  const double alpha = 1.5, beta = 0.1;
  std::vector<std::vector<double>> scaled = base;
  for (auto& row : scaled)
    for (double& y : row) y = alpha * y + beta;
  const AnnotationMatrix a = mat(base), b = mat(scaled);
  const std::vector<double> ma = mean_label(a), mb = mean_label(b);
  const std::vector<double> sa = unbiased_std(a), sb = unbiased_std(b);
  for (int t = 0; t < 3; ++t) {
    CHECK(mb[t] == doctest::Approx(alpha * ma[t] + beta).epsilon(1e-12));
    CHECK(sb[t] == doctest::Approx(alpha * sa[t]).epsilon(1e-12));
  }
}

TEST_CASE("ewe_label weights identical annotators equally") {
  const AnnotationMatrix a =
      mat({{0.1, 0.1}, {0.4, 0.4}, {-0.3, -0.3}, {0.2, 0.2}});
  const std::vector<double> m = ewe_label(a);
  const std::vector<double> want = {0.1, 0.4, -0.3, 0.2};
  for (int t = 0; t < 4; ++t) CHECK(m[t] == doctest::Approx(want[t]).epsilon(1e-12));
}

TEST_CASE("ewe_label clips an anti-correlated annotator to weight zero") {
  // two aligned sinusoid annotators plus one inverted-and-damped saboteur
  const int T = 10;
  std::vector<std::vector<double>> rows(T, std::vector<double>(3));
  for (int t = 0; t < T; ++t) {
    const double v = 0.6 * std::sin(0.7 * t);
    rows[t][0] = v;
    rows[t][1] = v;
    rows[t][2] = -0.8 * v + 0.05;
  }
  const AnnotationMatrix a = mat(rows);
  const std::vector<double> m = ewe_label(a);
  for (int t = 0; t < T; ++t) {
    CHECK(std::fabs(m[t] - rows[t][0]) < 1e-9);
  }
}

TEST_CASE("ewe_label falls back to the mean when every weight clips") {
  // both annotators anti-correlated with each other -> both r < 0 -> fallback
  const int T = 8;
  std::vector<std::vector<double>> rows(T, std::vector<double>(2));
  for (int t = 0; t < T; ++t) {
    const double v = 0.5 * std::sin(0.9 * t + 0.3);
    rows[t][0] = v;
    rows[t][1] = -v;
  }
  const AnnotationMatrix a = mat(rows);
  const std::vector<double> m = ewe_label(a);
  const std::vector<double> plain = mean_label(a);
  for (int t = 0; t < T; ++t) CHECK(m[t] == doctest::Approx(plain[t]).epsilon(1e-12));
}

TEST_CASE("ewe_label rejects a flat annotator trace") {
  const AnnotationMatrix a = mat({{0.5, 0.1}, {0.5, 0.3}, {0.5, -0.2}});
  CHECK_THROWS_AS(ewe_label(a), std::invalid_argument);
}

TEST_CASE("label_distribution ties nu to the annotator count") {
  std::vector<std::vector<double>> rows(5, std::vector<double>(6));
  for (int t = 0; t < 5; ++t)
    for (int i = 0; i < 6; ++i) rows[t][i] = 0.1 * t - 0.05 * i;
  const LabelDistribution ld = label_distribution(mat(rows));
  CHECK(ld.nu == 6.0);
  CHECK(static_cast<int>(ld.m.size()) == 5);
  CHECK(static_cast<int>(ld.s.size()) == 5);

  const LabelDistribution flat =
      label_distribution(mat({{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}}));
  CHECK(flat.nu == 3.0);
  CHECK(flat.m[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(flat.s[0] == kSigmaFloor);
  CHECK(flat.s[1] == kSigmaFloor);

  CHECK_THROWS_AS(label_distribution(mat({{0.1, 0.2}})), std::invalid_argument);
}
