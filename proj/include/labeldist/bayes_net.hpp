#pragma once

#include <vector>

#include "labeldist/matrix.hpp"
#include "labeldist/rng.hpp"

namespace labeldist {

// One fully-connected layer with a diagonal-Gaussian weight posterior:
// each weight and bias has a posterior mean (mu) and a pre-softplus spread
// parameter (rho), sigma_w = softplus(rho).
struct VariationalLayer {
  Matrix mu_w, rho_w;               // out x in
  std::vector<double> mu_b, rho_b;  // out
  int in() const { return mu_w.cols; }
  int out() const { return mu_w.rows; }
};

// MLP with tanh hidden activations and a linear scalar output.  The weight
// prior is N(0, prior_sigma^2) on every parameter.
struct BayesNet {
  std::vector<VariationalLayer> layers;
  double prior_sigma = 1.0;

  int input_dim() const { return layers.front().in(); }
  int param_count() const;
};

// Posterior means initialized N(0, 0.1), all rho at -3 (sigma_w ~= 0.049).
// Draw order: per layer, weights row-major, then biases.
BayesNet make_net(int input_dim, const std::vector<int>& hidden_sizes,
                  double prior_sigma, Rng& rng);

// One reparameterized draw of every weight: w = mu + softplus(rho) * eps.
struct WeightSample {
  std::vector<Matrix> w;
  std::vector<std::vector<double>> b;
  std::vector<Matrix> eps_w;
  std::vector<std::vector<double>> eps_b;
};

WeightSample sample_weights(const BayesNet& net, Rng& rng);

// X holds one feature row per frame.  Outputs are per-frame scalars.
std::vector<double> forward_mean(const BayesNet& net, const Matrix& X);
std::vector<double> forward_sampled(const BayesNet& net, const WeightSample& ws,
                                    const Matrix& X);

struct PredictiveDistribution {
  std::vector<double> mu_hat;
  std::vector<double> sigma_hat;  // floored at kSigmaFloor
  int n_passes = 0;
};

// Training-time protocol: mu_hat and sigma_hat are the per-frame mean and
// population std of n >= 2 stochastic forward passes.
PredictiveDistribution predict_stochastic(const BayesNet& net, const Matrix& X,
                                          int n, Rng& rng);

// Test-time protocol: mu_hat comes from the posterior-mean weights; sigma_hat
// is still the spread of n stochastic passes.
PredictiveDistribution predict(const BayesNet& net, const Matrix& X, int n, Rng& rng);

// Exact sum over parameters of KL(N(mu, sigma_w) || N(0, prior_sigma)).
double complexity_closed_form(const BayesNet& net);

struct McEstimate {
  double mean = 0.0;
  double std_err = 0.0;
};

// Monte-Carlo complexity: mean over n draws of ln q(w|theta) - ln P(w).
// Agrees with complexity_closed_form in expectation.
McEstimate complexity_monte_carlo(const BayesNet& net, int n, Rng& rng);

// -ln P(targets | y_hat) under a fixed-sigma Gaussian likelihood, summed over
// frames.
double gaussian_nll(const std::vector<double>& y_hat,
                    const std::vector<double>& targets, double sigma_lik);

enum class ComplexityMode { closed_form, monte_carlo };

// Negative evidence bound for one data block:
//   mean over n passes of [ complexity_i - ln P(D | w_i) ]
// where complexity_i is ln q(w_i|theta) - ln P(w_i) in monte_carlo mode and
// the exact KL(q || P) (identical for every pass) in closed_form mode.
double elbo(const BayesNet& net, const Matrix& X, const std::vector<double>& targets,
            int n, double sigma_lik, ComplexityMode mode, Rng& rng);

// Parameter-shaped gradient accumulator.
struct NetGrads {
  std::vector<Matrix> d_mu_w, d_rho_w;
  std::vector<std::vector<double>> d_mu_b, d_rho_b;

  static NetGrads zeros_like(const BayesNet& net);
};

// n sampled passes over one feature block with stored activations, so that
// arbitrary per-pass, per-frame output gradients can be pushed back through
// the reparameterization onto (mu, rho).
class PassBatch {
 public:
  PassBatch(const BayesNet& net, const Matrix& X, int n, Rng& rng);

  int n_passes() const { return n_; }
  int frames() const { return frames_; }
  const std::vector<double>& outputs(int pass) const { return outs_[pass]; }
  const WeightSample& sample(int pass) const { return samples_[pass]; }

  // d_out[pass][frame] = dL/d y_{pass,frame}.  Accumulates into g.
  void backward(const BayesNet& net, const std::vector<std::vector<double>>& d_out,
                NetGrads& g) const;

 private:
  int n_ = 0;
  int frames_ = 0;
  std::vector<WeightSample> samples_;
  std::vector<std::vector<std::vector<double>>> acts_;  // [pass][hidden layer][unit*F + f]
  std::vector<std::vector<double>> outs_;               // [pass][frame]
  std::vector<double> x_t_;                             // input, unit-major [k*F + f]
};

// d(weight * closed-form complexity)/d(theta), accumulated into g.
void add_complexity_grad_closed(const BayesNet& net, double weight, NetGrads& g);

// Pathwise d(weight * MC complexity)/d(theta) for the draws held by the batch.
void add_complexity_grad_mc(const BayesNet& net, const PassBatch& batch,
                            double weight, NetGrads& g);

// Full pathwise gradient of elbo() under the same draw order (common random
// numbers), for gradient checks and small problems.
NetGrads elbo_grad(const BayesNet& net, const Matrix& X,
                   const std::vector<double>& targets, int n, double sigma_lik,
                   ComplexityMode mode, Rng& rng);

}  // namespace labeldist
