#pragma once

#include <vector>

#include "labeldist/annotations.hpp"
#include "labeldist/distributions.hpp"

namespace labeldist {

// Concordance correlation between two traces of equal length (>= 2):
//   ccc = 2 cov / (var_x + var_y + (mean_x - mean_y)^2)
// with population (divisor T) moments.  Degenerate policy: if the denominator
// vanishes (both traces constant with equal means) the traces are identical
// and the result is 1; a zero covariance with nonzero denominator yields 0
// naturally.
double ccc(const std::vector<double>& x, const std::vector<double>& y);

// KL(N(mu, sigma) || N(mu_hat, sigma_hat))
//   = ln(sigma_hat / sigma) + (sigma^2 + (mu - mu_hat)^2) / (2 sigma_hat^2) - 1/2
double kl_gauss_gauss(const Gaussian& truth, const Gaussian& pred);

// Cross-entropy of a truth distribution against a Gaussian prediction, using
// only the truth's first moment and a caller-supplied second-moment slot:
//   H = ln(2 pi sigma_hat^2)/2 + (var_slot + (mu - mu_hat)^2) / (2 sigma_hat^2)
// Exact (equals -integral p ln N) precisely when var_slot is the truth's true
// variance.
double cross_entropy_t_gauss(double truth_mean, double truth_var_slot, const Gaussian& pred);

// Spread-relaxing divergence between the per-frame annotation frame
// (nu, m, s) and a Gaussian prediction.  The annotation std s is mapped to the
// t scale lambda = s * sqrt((nu-2)/nu), and lambda^2 fills both the
// cross-entropy second-moment slot and the entropy scale:
//   kl = cross_entropy_t_gauss(m, lambda^2, pred) - student_t_entropy(nu, lambda)
// Consequences (both intentional):
//   * for m = mu_hat, the minimizer over s is s* = sigma_hat * sqrt(nu/(nu-2))
//     (the spread relaxation that distinguishes this loss from the Gaussian KL);
//   * the value is not a true KL divergence and attains negative values, with
//     minimum over (s, sigma_hat) equal to ln(2 pi e)/2 - student_t_entropy(nu, 1).
// Stationary in sigma_hat at sigma_hat^2 = lambda^2 + (m - mu_hat)^2.
double kl_t_gauss(double nu, double m, double s, const Gaussian& pred);

struct KlGrad {
  double d_mu_hat = 0.0;
  double d_sigma_hat = 0.0;
};

KlGrad kl_gauss_gauss_grad(const Gaussian& truth, const Gaussian& pred);
KlGrad kl_t_gauss_grad(double nu, double m, double s, const Gaussian& pred);

// Gradient of the loss term (1 - ccc(m, m_hat)) with respect to each m_hat_t.
std::vector<double> ccc_loss_grad(const std::vector<double>& m,
                                  const std::vector<double>& m_hat);

enum class LossVariant { t_kl, gauss_kl, none };

// Decomposed training objective; total is always the exact sum of the three
// terms.
struct LossReport {
  double ccc_term = 0.0;
  double bbb_term = 0.0;
  double kl_term = 0.0;
  double total = 0.0;
};

// Assembles the objective for one sequence given per-frame predictions:
//   ccc_term = 1 - ccc(truth.m, mu_hat)
//   kl_term  = mean over frames of the selected divergence (0 for none)
//   bbb_term = caller-supplied evidence-bound value
LossReport total_loss(const LabelDistribution& truth,
                      const std::vector<double>& mu_hat,
                      const std::vector<double>& sigma_hat,
                      double bbb_term,
                      LossVariant variant);

}  // namespace labeldist
