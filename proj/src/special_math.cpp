#include "labeldist/special_math.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace labeldist {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // ln(2*pi)/2

// Lanczos g = 7, n = 9 coefficient set (Godfrey).
constexpr double kLanczos[9] = {
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
};

double log_gamma_lanczos(double x) {
  // Gamma(x) = sqrt(2*pi) * t^(x - 1/2) * e^-t * A(x),  t = x + g - 1/2
  const double z = x - 1.0;
  double a = kLanczos[0];
  for (int i = 1; i < 9; ++i) a += kLanczos[i] / (z + i);
  const double t = z + 7.5;
  return kHalfLog2Pi + (z + 0.5) * std::log(t) - t + std::log(a);
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw std::domain_error("log_gamma: requires finite x > 0");
  if (x < 0.5) {
    // Reflection keeps the Lanczos argument away from the pole at 0.
    return std::log(kPi / std::sin(kPi * x)) - log_gamma_lanczos(1.0 - x);
  }
  return log_gamma_lanczos(x);
}

double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw std::domain_error("digamma: requires finite x > 0");
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;  // psi(x) = psi(x + 1) - 1/x
    x += 1.0;
  }
  // psi(x) ~ ln x - 1/(2x) - sum B_{2n} / (2n x^{2n}); truncated after x^-12,
  // so the first omitted term at x = 10 is below 1e-15.
  const double u = 1.0 / (x * x);
  const double series =
      u * (1.0 / 12.0 -
           u * (1.0 / 120.0 -
                u * (1.0 / 252.0 -
                     u * (1.0 / 240.0 -
                          u * (1.0 / 132.0 - u * (691.0 / 32760.0))))));
  return acc + std::log(x) - 0.5 / x - series;
}

double log_beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::domain_error("log_beta: requires a > 0 and b > 0");
  return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

double softplus(double x) {
  if (std::isnan(x)) throw std::domain_error("softplus: NaN input");
  const double r = x > 0.0 ? x + std::log1p(std::exp(-x))
                           : std::log1p(std::exp(x));
  return r > 0.0 ? r : std::numeric_limits<double>::min();
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw std::domain_error("softplus_inverse: requires y > 0");
  // x = ln(e^y - 1); for large y, e^y overflows but x -> y.
  return y > 40.0 ? y : std::log(std::expm1(y));
}

}  // namespace labeldist
