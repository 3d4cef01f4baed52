#include "labeldist/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "labeldist/special_math.hpp"

namespace labeldist {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // ln(2*pi)/2

double checked_sigma(double sigma, const char* who) {
  if (!std::isfinite(sigma) || sigma < 0.0)
    throw std::invalid_argument(std::string(who) + ": sigma must be finite and >= 0");
  return std::max(sigma, kSigmaFloor);
}
}  // namespace

Gaussian::Gaussian(double mu_, double sigma_) : mu(mu_), sigma(checked_sigma(sigma_, "Gaussian")) {
  if (!std::isfinite(mu)) throw std::invalid_argument("Gaussian: mu must be finite");
}

StudentT::StudentT(double nu_, double mu_, double sigma_)
    : nu(nu_), mu(mu_), sigma(checked_sigma(sigma_, "StudentT")) {
  if (!std::isfinite(mu)) throw std::invalid_argument("StudentT: mu must be finite");
  if (!(nu > 2.0)) throw std::domain_error("StudentT: requires nu > 2");
}

double gaussian_log_pdf(const Gaussian& g, double y) {
  const double z = (y - g.mu) / g.sigma;
  return -kHalfLog2Pi - std::log(g.sigma) - 0.5 * z * z;
}

double student_t_log_pdf(const StudentT& t, double y) {
  const double z = (y - t.mu) / t.sigma;
  return -log_beta(0.5, t.nu / 2.0) - 0.5 * std::log(t.nu) - std::log(t.sigma) -
         0.5 * (t.nu + 1.0) * std::log1p(z * z / t.nu);
}

double student_t_entropy(double nu, double sigma) {
  if (!(nu > 2.0)) throw std::domain_error("student_t_entropy: requires nu > 2");
  if (!(sigma > 0.0)) throw std::domain_error("student_t_entropy: requires sigma > 0");
  return std::log(sigma) + 0.5 * std::log(nu) + log_beta(nu / 2.0, 0.5) +
         0.5 * (nu + 1.0) * (digamma(0.5 * (1.0 + nu)) - digamma(0.5 * nu));
}

double std_from_scale(double nu, double scale) {
  if (!(nu > 2.0)) throw std::domain_error("std_from_scale: requires nu > 2");
  if (!(scale > 0.0)) throw std::domain_error("std_from_scale: requires scale > 0");
  return scale * std::sqrt(nu / (nu - 2.0));
}

double scale_from_std(double nu, double std_dev) {
  if (!(nu > 2.0)) throw std::domain_error("scale_from_std: requires nu > 2");
  if (!(std_dev > 0.0)) throw std::domain_error("scale_from_std: requires std > 0");
  return std_dev * std::sqrt((nu - 2.0) / nu);
}

Gaussian fit_gaussian(const std::vector<double>& xs) {
  if (xs.size() < 2) throw std::invalid_argument("fit_gaussian: needs n >= 2 samples");
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    ss += d * d;
  }
  return Gaussian(mean, std::sqrt(ss / n));
}

}  // namespace labeldist
