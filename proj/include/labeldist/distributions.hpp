#pragma once

#include <vector>

#include "labeldist/rng.hpp"

namespace labeldist {

// Lower bound applied to every standard deviation and scale parameter in the
// artifact; keeps log terms finite when annotations or samples collapse.
inline constexpr double kSigmaFloor = 1e-6;

struct Gaussian {
  double mu = 0.0;
  double sigma = 1.0;

  Gaussian() = default;
  // sigma is clamped up to kSigmaFloor; negative or non-finite parameters are
  // rejected.
  Gaussian(double mu_, double sigma_);
};

// Location-scale Student t; sigma is the scale parameter, not the standard
// deviation (std = sigma * sqrt(nu / (nu - 2)) for nu > 2).
struct StudentT {
  double nu = 3.0;
  double mu = 0.0;
  double sigma = 1.0;

  StudentT() = default;
  // Requires nu > 2 (finite variance regime); sigma clamped up to kSigmaFloor.
  StudentT(double nu_, double mu_, double sigma_);
};

double gaussian_log_pdf(const Gaussian& g, double y);

// ln p(y | nu, mu, sigma) = -ln B(1/2, nu/2) - ln sqrt(nu sigma^2)
//                           - (nu+1)/2 * ln(1 + (y-mu)^2 / (nu sigma^2))
double student_t_log_pdf(const StudentT& t, double y);

// Differential entropy of the location-scale t:
//   H = ln(sigma sqrt(nu) B(nu/2, 1/2))
//       + (nu+1)/2 * (psi((1+nu)/2) - psi(nu/2))
// Requires nu > 2 and sigma > 0.
double student_t_entropy(double nu, double sigma);

// std = scale * sqrt(nu / (nu - 2)); domain error for nu <= 2.
double std_from_scale(double nu, double scale);

// scale = std * sqrt((nu - 2) / nu); domain error for nu <= 2.
double scale_from_std(double nu, double std_dev);

// Moment fit: mean and population standard deviation (divisor n), sigma
// floored at kSigmaFloor.  Requires n >= 2.
Gaussian fit_gaussian(const std::vector<double>& xs);

inline double sample_gaussian(const Gaussian& g, Rng& rng) {
  return g.mu + g.sigma * rng.normal();
}

}  // namespace labeldist
