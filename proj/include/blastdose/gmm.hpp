#pragma once
// Diagonal-covariance Gaussian mixtures fit by EM with k-means++ style
// initialization, used as the building block of the exposure staircase.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "blastdose/rng.hpp"
#include "blastdose/stats.hpp"

namespace blastdose {

struct Gmm {
  int k = 0;
  std::vector<double> weights;                 // simplex
  std::vector<std::vector<double>> means;      // k x d
  std::vector<std::vector<double>> variances;  // k x d diagonal entries
  double regularization = 1e-6;
  std::vector<double> log_likelihood_path;     // one entry per EM evaluation
};

inline double gmm_log_pdf(const Gmm& g, const std::vector<double>& x) {
  static constexpr double kLog2Pi = 1.8378770664093453;
  std::vector<double> lp(std::size_t(g.k), -std::numeric_limits<double>::infinity());
  for (int c = 0; c < g.k; ++c) {
    if (!(g.weights[std::size_t(c)] > 0.0)) continue;
    double acc = std::log(g.weights[std::size_t(c)]);
    const auto& mu = g.means[std::size_t(c)];
    const auto& var = g.variances[std::size_t(c)];
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = x[j] - mu[j];
      acc += -0.5 * (kLog2Pi + std::log(var[j]) + d * d / var[j]);
    }
    lp[std::size_t(c)] = acc;
  }
  return log_sum_exp(lp);
}

// EM fit: log-likelihood is nondecreasing across iterations and the loop
// stops when the relative improvement drops below 1e-6 or after 200 steps.
// Requires at least k * (d + 2) points so every component can support a mean
// and a spread.
inline Gmm fit_gmm(const std::vector<std::vector<double>>& data, int k,
                   std::uint64_t seed, double regularization = 1e-6) {
  const std::size_t n = data.size();
  if (k < 1) throw std::invalid_argument("fit_gmm: k must be positive");
  if (n == 0 || data[0].empty())
    throw std::invalid_argument("fit_gmm: empty data");
  const std::size_t d = data[0].size();
  if (n < std::size_t(k) * (d + 2))
    throw std::invalid_argument("fit_gmm: need at least k*(d+2) points");
  for (const auto& row : data)
    if (row.size() != d) throw std::invalid_argument("fit_gmm: ragged data");

  Gmm g;
  g.k = k;
  g.regularization = regularization;

  // Global per-dimension variance: fallback spread for degenerate clusters.
  std::vector<double> gmean(d, 0.0), gvar(d, 0.0);
  for (const auto& row : data)
    for (std::size_t j = 0; j < d; ++j) gmean[j] += row[j];
  for (std::size_t j = 0; j < d; ++j) gmean[j] /= double(n);
  for (const auto& row : data)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - gmean[j];
      gvar[j] += c * c;
    }
  for (std::size_t j = 0; j < d; ++j)
    gvar[j] = std::max(gvar[j] / double(n), regularization);

  // k-means++ seeding: spread initial centers by squared-distance sampling.
  Rng rng(seed);
  std::vector<std::size_t> centers;
  centers.push_back(std::size_t(rng.uniform_int(0, std::int64_t(n) - 1)));
  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
  const auto sqdist = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = data[a][j] - data[b][j];
      s += c * c;
    }
    return s;
  };
  while (centers.size() < std::size_t(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist2[i] = std::min(dist2[i], sqdist(i, centers.back()));
      total += dist2[i];
    }
    std::size_t pick;
    if (total > 0.0) {
      const double r = rng.uniform(0.0, total);
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::size_t(rng.uniform_int(0, std::int64_t(n) - 1));
    }
    centers.push_back(pick);
  }

  // Initial parameters from the hard assignment to the nearest center.
  g.weights.assign(std::size_t(k), 0.0);
  g.means.assign(std::size_t(k), std::vector<double>(d, 0.0));
  g.variances.assign(std::size_t(k), std::vector<double>(d, 0.0));
  std::vector<int> assign(n, 0);
  std::vector<double> count(std::size_t(k), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double s = sqdist(i, centers[std::size_t(c)]);
      if (s < best) {
        best = s;
        assign[i] = c;
      }
    }
    count[std::size_t(assign[i])] += 1.0;
    for (std::size_t j = 0; j < d; ++j)
      g.means[std::size_t(assign[i])][j] += data[i][j];
  }
  for (int c = 0; c < k; ++c) {
    if (count[std::size_t(c)] > 0.0) {
      for (std::size_t j = 0; j < d; ++j)
        g.means[std::size_t(c)][j] /= count[std::size_t(c)];
    } else {
      g.means[std::size_t(c)] = data[centers[std::size_t(c)]];
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = data[i][j] - g.means[std::size_t(assign[i])][j];
      g.variances[std::size_t(assign[i])][j] += c * c;
    }
  for (int c = 0; c < k; ++c) {
    const double nk = count[std::size_t(c)];
    g.weights[std::size_t(c)] = std::max(nk, 1.0) / double(n);
    for (std::size_t j = 0; j < d; ++j)
      g.variances[std::size_t(c)][j] =
          nk > 1.0 ? std::max(g.variances[std::size_t(c)][j] / nk, regularization)
                   : gvar[j];
  }
  double wsum = 0.0;
  for (double w : g.weights) wsum += w;
  for (double& w : g.weights) w /= wsum;

  // EM loop.
  static constexpr double kLog2Pi = 1.8378770664093453;
  std::vector<std::vector<double>> resp(n, std::vector<double>(std::size_t(k)));
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter <= 200; ++iter) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> lp(std::size_t(k), 0.0);
      for (int c = 0; c < k; ++c) {
        double acc = std::log(g.weights[std::size_t(c)]);
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = data[i][j] - g.means[std::size_t(c)][j];
          acc += -0.5 * (kLog2Pi + std::log(g.variances[std::size_t(c)][j]) +
                         diff * diff / g.variances[std::size_t(c)][j]);
        }
        lp[std::size_t(c)] = acc;
      }
      const double norm = log_sum_exp(lp);
      ll += norm;
      for (int c = 0; c < k; ++c)
        resp[i][std::size_t(c)] = std::exp(lp[std::size_t(c)] - norm);
    }
    g.log_likelihood_path.push_back(ll);
    if (iter > 0 && ll - prev_ll < 1e-6 * std::max(1.0, std::abs(prev_ll))) break;
    prev_ll = ll;
    if (iter == 200) break;

    for (int c = 0; c < k; ++c) {
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) nk += resp[i][std::size_t(c)];
      if (nk < 1e-12) continue;  // empty component keeps its parameters
      g.weights[std::size_t(c)] = nk / double(n);
      auto& mu = g.means[std::size_t(c)];
      auto& var = g.variances[std::size_t(c)];
      std::fill(mu.begin(), mu.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
          mu[j] += resp[i][std::size_t(c)] * data[i][j];
      for (std::size_t j = 0; j < d; ++j) mu[j] /= nk;
      std::fill(var.begin(), var.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = data[i][j] - mu[j];
          var[j] += resp[i][std::size_t(c)] * diff * diff;
        }
      for (std::size_t j = 0; j < d; ++j)
        var[j] = std::max(var[j] / nk, regularization);
    }
    wsum = 0.0;
    for (double w : g.weights) wsum += w;
    for (double& w : g.weights) w /= wsum;
  }
  return g;
}

}  // namespace blastdose
