#include "labeldist/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "labeldist/special_math.hpp"

namespace labeldist {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // ln(2*pi)/2

struct Moments {
  double mean_x, mean_y, var_x, var_y, cov;
};

Moments moments(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  Moments mo{0.0, 0.0, 0.0, 0.0, 0.0};
  for (int t = 0; t < n; ++t) {
    mo.mean_x += x[t];
    mo.mean_y += y[t];
  }
  mo.mean_x /= n;
  mo.mean_y /= n;
  for (int t = 0; t < n; ++t) {
    const double dx = x[t] - mo.mean_x;
    const double dy = y[t] - mo.mean_y;
    mo.var_x += dx * dx;
    mo.var_y += dy * dy;
    mo.cov += dx * dy;
  }
  mo.var_x /= n;
  mo.var_y /= n;
  mo.cov /= n;
  return mo;
}

void check_traces(const std::vector<double>& x, const std::vector<double>& y, const char* who) {
  if (x.size() != y.size()) throw std::invalid_argument(std::string(who) + ": length mismatch");
  if (x.size() < 2) throw std::invalid_argument(std::string(who) + ": needs at least 2 frames");
}

}  // namespace

double ccc(const std::vector<double>& x, const std::vector<double>& y) {
  check_traces(x, y, "ccc");
  const Moments mo = moments(x, y);
  const double md = mo.mean_x - mo.mean_y;
  const double denom = mo.var_x + mo.var_y + md * md;
  if (denom <= 0.0) {
    // Both traces constant; equal means (denom == 0) means identical traces.
    return (mo.var_x == 0.0 && mo.var_y == 0.0 && md == 0.0) ? 1.0 : 0.0;
  }
  return 2.0 * mo.cov / denom;
}

double kl_gauss_gauss(const Gaussian& truth, const Gaussian& pred) {
  const double md = truth.mu - pred.mu;
  return std::log(pred.sigma / truth.sigma) +
         (truth.sigma * truth.sigma + md * md) / (2.0 * pred.sigma * pred.sigma) - 0.5;
}

double cross_entropy_t_gauss(double truth_mean, double truth_var_slot, const Gaussian& pred) {
  if (!(truth_var_slot >= 0.0))
    throw std::invalid_argument("cross_entropy_t_gauss: variance slot must be >= 0");
  const double md = truth_mean - pred.mu;
  return kHalfLog2Pi + std::log(pred.sigma) +
         (truth_var_slot + md * md) / (2.0 * pred.sigma * pred.sigma);
}

double kl_t_gauss(double nu, double m, double s, const Gaussian& pred) {
  const double lambda = scale_from_std(nu, s);
  return cross_entropy_t_gauss(m, lambda * lambda, pred) - student_t_entropy(nu, lambda);
}

KlGrad kl_gauss_gauss_grad(const Gaussian& truth, const Gaussian& pred) {
  KlGrad g;
  const double md = truth.mu - pred.mu;
  const double s2 = pred.sigma * pred.sigma;
  g.d_mu_hat = -md / s2;
  g.d_sigma_hat = 1.0 / pred.sigma - (truth.sigma * truth.sigma + md * md) / (s2 * pred.sigma);
  return g;
}

KlGrad kl_t_gauss_grad(double nu, double m, double s, const Gaussian& pred) {
  KlGrad g;
  const double lambda = scale_from_std(nu, s);
  const double md = m - pred.mu;
  const double s2 = pred.sigma * pred.sigma;
  g.d_mu_hat = -md / s2;
  g.d_sigma_hat = 1.0 / pred.sigma - (lambda * lambda + md * md) / (s2 * pred.sigma);
  return g;
}

std::vector<double> ccc_loss_grad(const std::vector<double>& m,
                                  const std::vector<double>& m_hat) {
  check_traces(m, m_hat, "ccc_loss_grad");
  const int n = static_cast<int>(m.size());
  const Moments mo = moments(m, m_hat);
  const double md = mo.mean_x - mo.mean_y;
  const double denom = mo.var_x + mo.var_y + md * md;
  std::vector<double> g(n, 0.0);
  if (denom <= 0.0) return g;  // flat at the degenerate point
  const double num = 2.0 * mo.cov;
  // d num / d m_hat_t = 2 (m_t - mean_m) / n      (mean shifts cancel)
  // d den / d m_hat_t = 2 (m_hat_t - mean_mhat) / n - 2 (mean_m - mean_mhat) / n
  for (int t = 0; t < n; ++t) {
    const double dnum = 2.0 * (m[t] - mo.mean_x) / n;
    const double dden = 2.0 * ((m_hat[t] - mo.mean_y) - md) / n;
    const double dccc = (dnum * denom - num * dden) / (denom * denom);
    g[t] = -dccc;  // loss is 1 - ccc
  }
  return g;
}

LossReport total_loss(const LabelDistribution& truth,
                      const std::vector<double>& mu_hat,
                      const std::vector<double>& sigma_hat,
                      double bbb_term,
                      LossVariant variant) {
  if (mu_hat.size() != truth.m.size() || sigma_hat.size() != truth.m.size())
    throw std::invalid_argument("total_loss: trace length mismatch");
  LossReport r;
  r.ccc_term = 1.0 - ccc(truth.m, mu_hat);
  r.bbb_term = bbb_term;
  if (variant != LossVariant::none) {
    const int n = static_cast<int>(truth.m.size());
    double acc = 0.0;
    for (int t = 0; t < n; ++t) {
      const Gaussian pred(mu_hat[t], sigma_hat[t]);
      acc += variant == LossVariant::t_kl
                 ? kl_t_gauss(truth.nu, truth.m[t], truth.s[t], pred)
                 : kl_gauss_gauss(Gaussian(truth.m[t], truth.s[t]), pred);
    }
    r.kl_term = acc / n;
  }
  r.total = r.ccc_term + r.bbb_term + r.kl_term;
  return r;
}

}  // namespace labeldist
