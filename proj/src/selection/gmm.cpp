#include "mdpt/selection/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace mdpt::selection {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

// log N(x; mu, diag(var))
double log_gauss(const std::vector<double>& x, const std::vector<double>& mu,
                 const std::vector<double>& var) {
  double s = 0.0;
  for (size_t j = 0; j < x.size(); ++j) {
    const double d = x[j] - mu[j];
    s += d * d / var[j] + std::log(var[j]) + kLog2Pi;
  }
  return -0.5 * s;
}

std::vector<size_t> kmeanspp_init(const std::vector<std::vector<double>>& X, size_t k,
                                  std::mt19937_64& rng) {
  const size_t n = X.size();
  std::vector<size_t> centers;
  std::uniform_int_distribution<size_t> first(0, n - 1);
  centers.push_back(first(rng));
  std::vector<double> d2(n);
  while (centers.size() < k) {
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      for (size_t c : centers) best = std::min(best, sq_dist(X[i], X[c]));
      d2[i] = best;
      total += best;
    }
    size_t next;
    if (total <= 0.0) {
      next = first(rng);  // all points coincide with chosen centers
    } else {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      next = n - 1;
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (r <= acc) {
          next = i;
          break;
        }
      }
    }
    centers.push_back(next);
  }
  return centers;
}

std::vector<double> global_variance(const std::vector<std::vector<double>>& X) {
  const size_t n = X.size(), d = X[0].size();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (const auto& x : X)
    for (size_t j = 0; j < d; ++j) mean[j] += x[j];
  for (size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
  for (const auto& x : X)
    for (size_t j = 0; j < d; ++j) var[j] += (x[j] - mean[j]) * (x[j] - mean[j]);
  for (size_t j = 0; j < d; ++j) var[j] = std::max(kGmmVarianceFloor, var[j] / static_cast<double>(n));
  return var;
}

}  // namespace

GmmModel gmm_fit(const std::vector<std::vector<double>>& X, size_t k, size_t max_iters,
                 double tol, uint64_t seed) {
  const size_t n = X.size();
  if (k < 1) throw std::invalid_argument("gmm_fit: k must be >= 1");
  if (n < k) throw std::invalid_argument("gmm_fit: need n >= k points");
  const size_t d = X[0].size();
  for (const auto& row : X)
    if (row.size() != d) throw std::invalid_argument("gmm_fit: ragged input matrix");

  std::mt19937_64 rng(seed);
  GmmModel m;
  m.weights.assign(k, 1.0 / static_cast<double>(k));
  const std::vector<double> gvar = global_variance(X);
  m.variances.assign(k, gvar);
  m.means.resize(k);
  const auto centers = kmeanspp_init(X, k, rng);
  for (size_t c = 0; c < k; ++c) m.means[c] = X[centers[c]];

  std::vector<std::vector<double>> resp(n, std::vector<double>(k));
  int repairs = 0;
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (size_t iter = 0; iter < max_iters; ++iter) {
    // E-step
    double ll = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (size_t c = 0; c < k; ++c) {
        resp[i][c] = std::log(m.weights[c]) + log_gauss(X[i], m.means[c], m.variances[c]);
        mx = std::max(mx, resp[i][c]);
      }
      double sum = 0.0;
      for (size_t c = 0; c < k; ++c) sum += std::exp(resp[i][c] - mx);
      const double lse = mx + std::log(sum);
      ll += lse;
      for (size_t c = 0; c < k; ++c) resp[i][c] = std::exp(resp[i][c] - lse);
    }
    m.ll_history.push_back(ll);
    m.log_likelihood = ll;
    m.iterations = iter + 1;
    if (iter > 0 && ll - prev_ll < tol) break;
    prev_ll = ll;

    // M-step
    for (size_t c = 0; c < k; ++c) {
      double nk = 0.0;
      for (size_t i = 0; i < n; ++i) nk += resp[i][c];
      if (nk < 1e-10) {
        // Documented repair: re-seed the component at the least-claimed point.
        if (++repairs > 3)
          throw std::runtime_error("gmm_fit: component collapsed after 3 repairs");
        size_t worst = 0;
        double worst_mass = std::numeric_limits<double>::max();
        for (size_t i = 0; i < n; ++i) {
          const double best = *std::max_element(resp[i].begin(), resp[i].end());
          if (best < worst_mass) {
            worst_mass = best;
            worst = i;
          }
        }
        m.means[c] = X[worst];
        m.variances[c] = gvar;
        m.weights[c] = 1.0 / static_cast<double>(k);
        continue;
      }
      m.weights[c] = nk / static_cast<double>(n);
      for (size_t j = 0; j < d; ++j) {
        double mu = 0.0;
        for (size_t i = 0; i < n; ++i) mu += resp[i][c] * X[i][j];
        mu /= nk;
        double var = 0.0;
        for (size_t i = 0; i < n; ++i) var += resp[i][c] * (X[i][j] - mu) * (X[i][j] - mu);
        m.means[c][j] = mu;
        m.variances[c][j] = std::max(kGmmVarianceFloor, var / nk);
      }
    }
    double wsum = 0.0;
    for (double w : m.weights) wsum += w;
    for (double& w : m.weights) w /= wsum;
  }
  return m;
}

std::vector<int> gmm_assign(const GmmModel& m, const std::vector<std::vector<double>>& X) {
  std::vector<int> labels(X.size(), 0);
  for (size_t i = 0; i < X.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < m.weights.size(); ++c) {
      const double lp = std::log(m.weights[c]) + log_gauss(X[i], m.means[c], m.variances[c]);
      if (lp > best) {
        best = lp;
        labels[i] = static_cast<int>(c);
      }
    }
  }
  return labels;
}

}  // namespace mdpt::selection
