#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "labeldist/distributions.hpp"
#include "labeldist/rng.hpp"
#include "oracles.hpp"

using labeldist::fit_gaussian;
using labeldist::Gaussian;
using labeldist::gaussian_log_pdf;
using labeldist::kSigmaFloor;
using labeldist::Rng;
using labeldist::sample_gaussian;
using labeldist::scale_from_std;
using labeldist::std_from_scale;
using labeldist::StudentT;
using labeldist::student_t_entropy;
using labeldist::student_t_log_pdf;

TEST_CASE("gaussian_log_pdf reference values and symmetry") {
  // -0.5 ln(2 pi)
  CHECK(gaussian_log_pdf(Gaussian(0.0, 1.0), 0.0) ==
        doctest::Approx(-0.91893853320467274).epsilon(1e-14));
  CHECK(gaussian_log_pdf(Gaussian(3.0, 2.0), 3.0) ==
        doctest::Approx(-0.91893853320467274 - std::log(2.0)).epsilon(1e-14));
  for (double c : {0.3, 1.0, 2.7}) {
    CHECK(gaussian_log_pdf(Gaussian(0.5, 1.3), 0.5 + c) ==
          doctest::Approx(gaussian_log_pdf(Gaussian(0.5, 1.3), 0.5 - c))
              .epsilon(1e-14));
  }
}

TEST_CASE("student_t_log_pdf reference value at the mode") {
  // -ln(sqrt(6) B(3, 1/2)), B(3, 1/2) = 16/15
  CHECK(student_t_log_pdf(StudentT(6.0, 0.0, 1.0), 0.0) ==
        doctest::Approx(-0.96041825575159867).epsilon(1e-14));
}

TEST_CASE("student_t_log_pdf symmetry about the location") {
  const StudentT t(7.5, 0.4, 0.8);
  for (double c : {0.2, 1.1, 3.0, 10.0}) {
    CHECK(student_t_log_pdf(t, 0.4 + c) ==
          doctest::Approx(student_t_log_pdf(t, 0.4 - c)).epsilon(1e-14));
  }
}

TEST_CASE("student_t_log_pdf approaches the gaussian for huge nu") {
  const StudentT t(1e6, 0.0, 1.0);
  const Gaussian g(0.0, 1.0);
  for (double y : {0.0, 0.5, 1.0, 2.0, 3.0}) {
    CHECK(std::fabs(student_t_log_pdf(t, y) - gaussian_log_pdf(g, y)) < 1e-4);
  }
}

TEST_CASE("student_t pdf integrates to 1") {
  // nu = 6: two-sided tail mass beyond 60 sigma is ~1.4e-9, far below the
  // tolerance; heavier nu = 3 tails need a much wider window (the mass
  // beyond +-60 is already ~1.0e-5), so that case integrates over +-2000.
  for (double nu : {6.0, 12.0, 30.0}) {
    const StudentT t(nu, 0.0, 1.0);
    const double mass = test_oracles::integrate(
        [&](double y) { return std::exp(student_t_log_pdf(t, y)); }, -60.0,
        60.0, 4000);
    CHECK(std::fabs(mass - 1.0) < 1e-5);
  }
  const StudentT t3(3.0, 0.0, 1.0);
  const double mass3 = test_oracles::integrate(
      [&](double y) { return std::exp(student_t_log_pdf(t3, y)); }, -2000.0,
      2000.0, 20000);
  CHECK(std::fabs(mass3 - 1.0) < 1e-6);
}

TEST_CASE("student_t has heavier tails than the matched gaussian") {
  CHECK(student_t_log_pdf(StudentT(6.0, 0.0, 1.0), 4.0) >
        gaussian_log_pdf(Gaussian(0.0, 1.0), 4.0));
}

TEST_CASE("student_t_entropy closed form vs quadrature") {
  const double closed = student_t_entropy(6.0, 1.0);
  CHECK(closed == doctest::Approx(1.5917213251653148).epsilon(1e-14));
  const StudentT t(6.0, 0.0, 1.0);
  const double quad = test_oracles::integrate(
      [&](double y) {
        const double lp = student_t_log_pdf(t, y);
        return -std::exp(lp) * lp;
      },
      -60.0, 60.0, 4000);
  CHECK(std::fabs(closed - quad) < 1e-5);
}

TEST_CASE("student_t_entropy limits and scale shift") {
  // gaussian limit 0.5 ln(2 pi e)
  CHECK(std::fabs(student_t_entropy(1e6, 1.0) - 1.4189385332046727) < 1e-4);
  CHECK(student_t_entropy(6.0, 2.0) ==
        doctest::Approx(student_t_entropy(6.0, 1.0) + std::log(2.0))
            .epsilon(1e-14));
  CHECK_THROWS_AS(student_t_entropy(2.0, 1.0), std::domain_error);
}

TEST_CASE("std_from_scale / scale_from_std") {
  CHECK(std_from_scale(6.0, 1.0) ==
        doctest::Approx(1.224744871391589).epsilon(1e-14));
  CHECK(std::fabs(std_from_scale(1e6, 1.0) - 1.0) < 1e-5);
  CHECK(scale_from_std(6.0, 0.5) ==
        doctest::Approx(0.40824829046386302).epsilon(1e-14));
  CHECK(scale_from_std(30.0, 1.0) ==
        doctest::Approx(0.9660917830792959).epsilon(1e-14));
  CHECK(scale_from_std(6.0, 1.224744871391589) ==
        doctest::Approx(1.0).epsilon(1e-14));
  for (double nu : {3.0, 6.0, 12.0, 30.0}) {
    for (double s : {0.2, 0.7, 1.5}) {
      CHECK(std_from_scale(nu, scale_from_std(nu, s)) ==
            doctest::Approx(s).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(std_from_scale(2.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(scale_from_std(2.0, 1.0), std::domain_error);
}

TEST_CASE("fit_gaussian moments (population std) and floor") {
  const Gaussian g = fit_gaussian({0.2, 0.4, 0.6});
  CHECK(g.mu == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(g.sigma == doctest::Approx(0.16329931618554521).epsilon(1e-13));

  const Gaussian two = fit_gaussian({-1.0, 1.0});
  CHECK(std::fabs(two.mu) < 1e-15);
  CHECK(two.sigma == doctest::Approx(1.0).epsilon(1e-15));

  const Gaussian flat = fit_gaussian({0.37, 0.37, 0.37, 0.37});
  CHECK(flat.mu == doctest::Approx(0.37).epsilon(1e-15));
  CHECK(flat.sigma == kSigmaFloor);

  CHECK_THROWS_AS(fit_gaussian({1.0}), std::invalid_argument);
}

TEST_CASE("sample_gaussian determinism and degenerate width") {
  Rng a(12345), b(12345);
  const Gaussian g(0.3, 1.7);
  for (int i = 0; i < 100; ++i) {
    CHECK(sample_gaussian(g, a) == sample_gaussian(g, b));
  }
  Rng c(99);
  const Gaussian tight(2.5, kSigmaFloor);
  for (int i = 0; i < 20; ++i) {
    CHECK(std::fabs(sample_gaussian(tight, c) - 2.5) < 1e-4);
  }
}

TEST_CASE("sample_gaussian law of large numbers") {
  Rng rng(2024);
  const Gaussian g(0.0, 1.0);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_gaussian(g, rng);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(std::fabs(mean) < 0.02);
  CHECK(std::fabs(sd - 1.0) < 0.02);
}

TEST_CASE("rng split streams are independent of parent draws") {
  Rng parent(7);
  Rng child_before = parent.split(42);
  (void)parent.normal();
  (void)parent.uniform();
  Rng child_after = parent.split(42);
  for (int i = 0; i < 16; ++i) {
    CHECK(child_before.next_u64() == child_after.next_u64());
  }
  // distinct keys give distinct streams
  Rng other = parent.split(43);
  bool all_equal = true;
  Rng again = parent.split(42);
  for (int i = 0; i < 16; ++i) {
    if (again.next_u64() != other.next_u64()) all_equal = false;
  }
  CHECK_FALSE(all_equal);
}
