#include "labeldist/bayes_net.hpp"

#include <cmath>
#include <stdexcept>

#include "labeldist/distributions.hpp"
#include "labeldist/special_math.hpp"

namespace labeldist {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // ln(2*pi)/2

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

void check_input(const BayesNet& net, const Matrix& X) {
  if (net.layers.empty()) throw std::invalid_argument("BayesNet: no layers");
  if (X.cols != net.input_dim())
    throw std::invalid_argument("BayesNet: feature dim mismatch");
  if (X.rows < 1) throw std::invalid_argument("BayesNet: empty feature block");
}

// y[u*F+f] = b[u] + sum_k W(u,k) x[k*F+f]; unit-major buffers keep the inner
// loop contiguous over frames.
void linear_forward(const Matrix& W, const std::vector<double>& b,
                    const double* x, int F, double* y) {
  const int out = W.rows, in = W.cols;
  for (int u = 0; u < out; ++u) {
    double* yu = y + static_cast<std::size_t>(u) * F;
    for (int f = 0; f < F; ++f) yu[f] = b[u];
    for (int k = 0; k < in; ++k) {
      const double w = W(u, k);
      const double* xk = x + static_cast<std::size_t>(k) * F;
      for (int f = 0; f < F; ++f) yu[f] += w * xk[f];
    }
  }
}

}  // namespace

int BayesNet::param_count() const {
  int n = 0;
  for (const auto& l : layers)
    n += l.out() * l.in() + l.out();
  return n;
}

BayesNet make_net(int input_dim, const std::vector<int>& hidden_sizes,
                  double prior_sigma, Rng& rng) {
  if (input_dim < 1) throw std::invalid_argument("make_net: input_dim >= 1 required");
  if (!(prior_sigma > 0.0)) throw std::invalid_argument("make_net: prior_sigma > 0 required");
  for (int h : hidden_sizes)
    if (h < 1) throw std::invalid_argument("make_net: hidden sizes must be >= 1");

  BayesNet net;
  net.prior_sigma = prior_sigma;
  std::vector<int> dims;
  dims.push_back(input_dim);
  for (int h : hidden_sizes) dims.push_back(h);
  dims.push_back(1);

  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    VariationalLayer layer;
    const int in = dims[l], out = dims[l + 1];
    layer.mu_w = Matrix(out, in);
    layer.rho_w = Matrix(out, in, -3.0);
    layer.mu_b.assign(out, 0.0);
    layer.rho_b.assign(out, -3.0);
    for (int u = 0; u < out; ++u)
      for (int k = 0; k < in; ++k) layer.mu_w(u, k) = 0.1 * rng.normal();
    for (int u = 0; u < out; ++u) layer.mu_b[u] = 0.1 * rng.normal();
    net.layers.push_back(std::move(layer));
  }
  return net;
}

WeightSample sample_weights(const BayesNet& net, Rng& rng) {
  WeightSample ws;
  for (const auto& l : net.layers) {
    Matrix w(l.out(), l.in()), eps(l.out(), l.in());
    for (int u = 0; u < l.out(); ++u)
      for (int k = 0; k < l.in(); ++k) {
        const double e = rng.normal();
        eps(u, k) = e;
        w(u, k) = l.mu_w(u, k) + softplus(l.rho_w(u, k)) * e;
      }
    std::vector<double> b(l.out()), eb(l.out());
    for (int u = 0; u < l.out(); ++u) {
      const double e = rng.normal();
      eb[u] = e;
      b[u] = l.mu_b[u] + softplus(l.rho_b[u]) * e;
    }
    ws.w.push_back(std::move(w));
    ws.b.push_back(std::move(b));
    ws.eps_w.push_back(std::move(eps));
    ws.eps_b.push_back(std::move(eb));
  }
  return ws;
}

namespace {

// Shared forward walk over unit-major buffers.  weights(l) supplies the
// realized weight matrix / bias of layer l.
template <typename WeightsFn, typename BiasFn>
std::vector<double> forward_impl(const BayesNet& net, const Matrix& X,
                                 WeightsFn weights, BiasFn biases,
                                 std::vector<std::vector<double>>* keep_hidden) {
  check_input(net, X);
  const int F = X.rows;
  const int L = static_cast<int>(net.layers.size());

  std::vector<double> cur(static_cast<std::size_t>(X.cols) * F);
  for (int k = 0; k < X.cols; ++k)
    for (int f = 0; f < F; ++f) cur[static_cast<std::size_t>(k) * F + f] = X(f, k);

  std::vector<double> next;
  for (int l = 0; l < L; ++l) {
    const Matrix& W = weights(l);
    next.assign(static_cast<std::size_t>(W.rows) * F, 0.0);
    linear_forward(W, biases(l), cur.data(), F, next.data());
    if (l + 1 < L) {
      for (double& v : next) v = std::tanh(v);
      if (keep_hidden) (*keep_hidden)[l] = next;
    }
    cur.swap(next);
  }
  return cur;  // single output unit: already per-frame
}

}  // namespace

std::vector<double> forward_mean(const BayesNet& net, const Matrix& X) {
  return forward_impl(
      net, X, [&](int l) -> const Matrix& { return net.layers[l].mu_w; },
      [&](int l) -> const std::vector<double>& { return net.layers[l].mu_b; }, nullptr);
}

std::vector<double> forward_sampled(const BayesNet& net, const WeightSample& ws,
                                    const Matrix& X) {
  return forward_impl(
      net, X, [&](int l) -> const Matrix& { return ws.w[l]; },
      [&](int l) -> const std::vector<double>& { return ws.b[l]; }, nullptr);
}

PredictiveDistribution predict_stochastic(const BayesNet& net, const Matrix& X,
                                          int n, Rng& rng) {
  if (n < 2) throw std::invalid_argument("predict_stochastic: needs n >= 2 passes");
  check_input(net, X);
  const int F = X.rows;
  std::vector<std::vector<double>> outs(n);
  for (int i = 0; i < n; ++i) {
    const WeightSample ws = sample_weights(net, rng);
    outs[i] = forward_sampled(net, ws, X);
  }
  PredictiveDistribution pd;
  pd.n_passes = n;
  pd.mu_hat.resize(F);
  pd.sigma_hat.resize(F);
  std::vector<double> col(n);
  for (int f = 0; f < F; ++f) {
    for (int i = 0; i < n; ++i) col[i] = outs[i][f];
    const Gaussian g = fit_gaussian(col);
    pd.mu_hat[f] = g.mu;
    pd.sigma_hat[f] = g.sigma;
  }
  return pd;
}

PredictiveDistribution predict(const BayesNet& net, const Matrix& X, int n, Rng& rng) {
  PredictiveDistribution pd = predict_stochastic(net, X, n, rng);
  pd.mu_hat = forward_mean(net, X);
  return pd;
}

double complexity_closed_form(const BayesNet& net) {
  const double sp = net.prior_sigma;
  double acc = 0.0;
  auto term = [&](double mu, double rho) {
    const double sq = softplus(rho);
    // KL(N(mu, sq) || N(0, sp))
    return std::log(sp / sq) + (sq * sq + mu * mu) / (2.0 * sp * sp) - 0.5;
  };
  for (const auto& l : net.layers) {
    for (int u = 0; u < l.out(); ++u)
      for (int k = 0; k < l.in(); ++k) acc += term(l.mu_w(u, k), l.rho_w(u, k));
    for (int u = 0; u < l.out(); ++u) acc += term(l.mu_b[u], l.rho_b[u]);
  }
  return acc;
}

McEstimate complexity_monte_carlo(const BayesNet& net, int n, Rng& rng) {
  if (n < 2) throw std::invalid_argument("complexity_monte_carlo: needs n >= 2");
  const double sp = net.prior_sigma;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const WeightSample ws = sample_weights(net, rng);
    double v = 0.0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const auto& layer = net.layers[l];
      auto term = [&](double w, double eps, double rho) {
        const double sq = softplus(rho);
        // ln q(w|theta) - ln P(w) at the sampled point
        return std::log(sp / sq) - 0.5 * eps * eps + w * w / (2.0 * sp * sp);
      };
      for (int u = 0; u < layer.out(); ++u)
        for (int k = 0; k < layer.in(); ++k)
          v += term(ws.w[l](u, k), ws.eps_w[l](u, k), layer.rho_w(u, k));
      for (int u = 0; u < layer.out(); ++u)
        v += term(ws.b[l][u], ws.eps_b[l][u], layer.rho_b[u]);
    }
    sum += v;
    sum_sq += v * v;
  }
  McEstimate e;
  e.mean = sum / n;
  const double var = (sum_sq - sum * sum / n) / (n - 1);
  e.std_err = std::sqrt(var > 0.0 ? var / n : 0.0);
  return e;
}

double gaussian_nll(const std::vector<double>& y_hat,
                    const std::vector<double>& targets, double sigma_lik) {
  if (y_hat.size() != targets.size())
    throw std::invalid_argument("gaussian_nll: length mismatch");
  if (!(sigma_lik > 0.0)) throw std::invalid_argument("gaussian_nll: sigma_lik > 0");
  const double log_norm = kHalfLog2Pi + std::log(sigma_lik);
  const double inv2s2 = 1.0 / (2.0 * sigma_lik * sigma_lik);
  double acc = 0.0;
  for (std::size_t f = 0; f < y_hat.size(); ++f) {
    const double d = targets[f] - y_hat[f];
    acc += log_norm + d * d * inv2s2;
  }
  return acc;
}

NetGrads NetGrads::zeros_like(const BayesNet& net) {
  NetGrads g;
  for (const auto& l : net.layers) {
    g.d_mu_w.emplace_back(l.out(), l.in());
    g.d_rho_w.emplace_back(l.out(), l.in());
    g.d_mu_b.emplace_back(l.out(), 0.0);
    g.d_rho_b.emplace_back(l.out(), 0.0);
  }
  return g;
}

PassBatch::PassBatch(const BayesNet& net, const Matrix& X, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("PassBatch: needs n >= 1 passes");
  check_input(net, X);
  n_ = n;
  frames_ = X.rows;
  const int F = frames_;
  const int L = static_cast<int>(net.layers.size());

  x_t_.assign(static_cast<std::size_t>(X.cols) * F, 0.0);
  for (int k = 0; k < X.cols; ++k)
    for (int f = 0; f < F; ++f) x_t_[static_cast<std::size_t>(k) * F + f] = X(f, k);

  samples_.reserve(n);
  acts_.assign(n, std::vector<std::vector<double>>(L > 1 ? L - 1 : 0));
  outs_.assign(n, {});
  for (int i = 0; i < n; ++i) {
    samples_.push_back(sample_weights(net, rng));
    const double* cur = x_t_.data();
    std::vector<double> buf;
    for (int l = 0; l < L; ++l) {
      const Matrix& W = samples_[i].w[l];
      buf.assign(static_cast<std::size_t>(W.rows) * F, 0.0);
      linear_forward(W, samples_[i].b[l], cur, F, buf.data());
      if (l + 1 < L) {
        for (double& v : buf) v = std::tanh(v);
        acts_[i][l] = std::move(buf);
        cur = acts_[i][l].data();
        buf = {};
      } else {
        outs_[i] = std::move(buf);
      }
    }
  }
}

void PassBatch::backward(const BayesNet& net,
                         const std::vector<std::vector<double>>& d_out,
                         NetGrads& g) const {
  if (static_cast<int>(d_out.size()) != n_)
    throw std::invalid_argument("PassBatch::backward: pass count mismatch");
  const int F = frames_;
  const int L = static_cast<int>(net.layers.size());

  std::vector<double> delta, delta_in;
  for (int i = 0; i < n_; ++i) {
    if (static_cast<int>(d_out[i].size()) != F)
      throw std::invalid_argument("PassBatch::backward: frame count mismatch");
    delta = d_out[i];  // output layer has one unit
    for (int l = L - 1; l >= 0; --l) {
      const auto& layer = net.layers[l];
      const int out = layer.out(), in = layer.in();
      const double* h_in = l == 0 ? x_t_.data() : acts_[i][l - 1].data();

      for (int u = 0; u < out; ++u) {
        const double* du = delta.data() + static_cast<std::size_t>(u) * F;
        double dsum = 0.0;
        for (int f = 0; f < F; ++f) dsum += du[f];
        g.d_mu_b[l][u] += dsum;
        g.d_rho_b[l][u] +=
            dsum * samples_[i].eps_b[l][u] * sigmoid(layer.rho_b[u]);
        for (int k = 0; k < in; ++k) {
          const double* hk = h_in + static_cast<std::size_t>(k) * F;
          double dw = 0.0;
          for (int f = 0; f < F; ++f) dw += du[f] * hk[f];
          g.d_mu_w[l](u, k) += dw;
          g.d_rho_w[l](u, k) +=
              dw * samples_[i].eps_w[l](u, k) * sigmoid(layer.rho_w(u, k));
        }
      }

      if (l == 0) break;
      delta_in.assign(static_cast<std::size_t>(in) * F, 0.0);
      const Matrix& W = samples_[i].w[l];
      for (int k = 0; k < in; ++k) {
        double* dk = delta_in.data() + static_cast<std::size_t>(k) * F;
        for (int u = 0; u < out; ++u) {
          const double w = W(u, k);
          const double* du = delta.data() + static_cast<std::size_t>(u) * F;
          for (int f = 0; f < F; ++f) dk[f] += w * du[f];
        }
        // tanh' through the activation of layer l-1
        const double* hk = h_in + static_cast<std::size_t>(k) * F;
        for (int f = 0; f < F; ++f) dk[f] *= 1.0 - hk[f] * hk[f];
      }
      delta.swap(delta_in);
    }
  }
}

void add_complexity_grad_closed(const BayesNet& net, double weight, NetGrads& g) {
  const double sp2 = net.prior_sigma * net.prior_sigma;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    for (int u = 0; u < layer.out(); ++u) {
      for (int k = 0; k < layer.in(); ++k) {
        const double rho = layer.rho_w(u, k);
        const double sq = softplus(rho);
        g.d_mu_w[l](u, k) += weight * layer.mu_w(u, k) / sp2;
        g.d_rho_w[l](u, k) += weight * (sq / sp2 - 1.0 / sq) * sigmoid(rho);
      }
      const double rho = layer.rho_b[u];
      const double sq = softplus(rho);
      g.d_mu_b[l][u] += weight * layer.mu_b[u] / sp2;
      g.d_rho_b[l][u] += weight * (sq / sp2 - 1.0 / sq) * sigmoid(rho);
    }
  }
}

void add_complexity_grad_mc(const BayesNet& net, const PassBatch& batch,
                            double weight, NetGrads& g) {
  const double sp2 = net.prior_sigma * net.prior_sigma;
  const double scale = weight / batch.n_passes();
  for (int i = 0; i < batch.n_passes(); ++i) {
    const WeightSample& ws = batch.sample(i);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const auto& layer = net.layers[l];
      // Pathwise derivative at fixed eps: d/dmu [ln q - ln P] = w/sp^2,
      // d/dsigma_q = -1/sigma_q + eps * w / sp^2.
      for (int u = 0; u < layer.out(); ++u) {
        for (int k = 0; k < layer.in(); ++k) {
          const double rho = layer.rho_w(u, k);
          const double sq = softplus(rho);
          const double w = ws.w[l](u, k);
          const double eps = ws.eps_w[l](u, k);
          g.d_mu_w[l](u, k) += scale * w / sp2;
          g.d_rho_w[l](u, k) += scale * (eps * w / sp2 - 1.0 / sq) * sigmoid(rho);
        }
        const double rho = layer.rho_b[u];
        const double sq = softplus(rho);
        const double w = ws.b[l][u];
        const double eps = ws.eps_b[l][u];
        g.d_mu_b[l][u] += scale * w / sp2;
        g.d_rho_b[l][u] += scale * (eps * w / sp2 - 1.0 / sq) * sigmoid(rho);
      }
    }
  }
}

double elbo(const BayesNet& net, const Matrix& X, const std::vector<double>& targets,
            int n, double sigma_lik, ComplexityMode mode, Rng& rng) {
  if (n < 1) throw std::invalid_argument("elbo: needs n >= 1 passes");
  if (static_cast<int>(targets.size()) != X.rows)
    throw std::invalid_argument("elbo: target/frame mismatch");
  const PassBatch batch(net, X, n, rng);

  double nll = 0.0;
  for (int i = 0; i < n; ++i) nll += gaussian_nll(batch.outputs(i), targets, sigma_lik);
  nll /= n;

  double complexity = 0.0;
  if (mode == ComplexityMode::closed_form) {
    complexity = complexity_closed_form(net);
  } else {
    const double sp = net.prior_sigma;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const WeightSample& ws = batch.sample(i);
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        auto term = [&](double w, double eps, double rho) {
          const double sq = softplus(rho);
          return std::log(sp / sq) - 0.5 * eps * eps + w * w / (2.0 * sp * sp);
        };
        for (int u = 0; u < layer.out(); ++u)
          for (int k = 0; k < layer.in(); ++k)
            acc += term(ws.w[l](u, k), ws.eps_w[l](u, k), layer.rho_w(u, k));
        for (int u = 0; u < layer.out(); ++u)
          acc += term(ws.b[l][u], ws.eps_b[l][u], layer.rho_b[u]);
      }
    }
    complexity = acc / n;
  }
  return complexity + nll;
}

NetGrads elbo_grad(const BayesNet& net, const Matrix& X,
                   const std::vector<double>& targets, int n, double sigma_lik,
                   ComplexityMode mode, Rng& rng) {
  if (n < 1) throw std::invalid_argument("elbo_grad: needs n >= 1 passes");
  if (static_cast<int>(targets.size()) != X.rows)
    throw std::invalid_argument("elbo_grad: target/frame mismatch");
  if (!(sigma_lik > 0.0)) throw std::invalid_argument("elbo_grad: sigma_lik > 0");

  const PassBatch batch(net, X, n, rng);
  NetGrads g = NetGrads::zeros_like(net);

  const double inv_s2 = 1.0 / (sigma_lik * sigma_lik);
  std::vector<std::vector<double>> d_out(n, std::vector<double>(X.rows));
  for (int i = 0; i < n; ++i) {
    const std::vector<double>& y = batch.outputs(i);
    for (int f = 0; f < X.rows; ++f)
      d_out[i][f] = (y[f] - targets[f]) * inv_s2 / n;
  }
  batch.backward(net, d_out, g);

  if (mode == ComplexityMode::closed_form)
    add_complexity_grad_closed(net, 1.0, g);
  else
    add_complexity_grad_mc(net, batch, 1.0, g);
  return g;
}

}  // namespace labeldist
