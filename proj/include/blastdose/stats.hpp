#pragma once
// Rank correlation, ordinary least squares trend testing, percentiles.

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace blastdose {

// Midranks: ties share the average of the ranks they would occupy (1-based).
inline std::vector<double> midranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * double(i + j) + 1.0;  // average of ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const std::vector<double>& x,
                      const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: size mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("pearson: need >= 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0))
    throw std::invalid_argument("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;  // two-sided, t approximation
};

// Spearman rank correlation: Pearson on midranks. The p-value uses the
// t(n-2) approximation; |rho| == 1 maps to p = 0.
inline SpearmanResult spearman(const std::vector<double>& x,
                               const std::vector<double>& y) {
  if (x.size() != y.size())
    throw std::invalid_argument("spearman: size mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw std::invalid_argument("spearman: need >= 3 points");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  SpearmanResult out;
  out.rho = pearson(rx, ry);  // throws on zero rank variance
  const double rho = std::clamp(out.rho, -1.0, 1.0);
  if (std::abs(rho) >= 1.0) {
    out.p_value = 0.0;
    return out;
  }
  const double df = double(n - 2);
  const double t = rho * std::sqrt(df / (1.0 - rho * rho));
  boost::math::students_t dist(df);
  out.p_value = 2.0 * boost::math::cdf(dist, -std::abs(t));
  return out;
}

// Exact two-sided permutation p-value for small samples (n < 8): the fraction
// of the n! rank permutations with |rho| >= |observed| (ties included).
inline double spearman_exact_p(const std::vector<double>& x,
                               const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size()) throw std::invalid_argument("spearman: size mismatch");
  if (n < 3 || n >= 8)
    throw std::invalid_argument("spearman_exact_p: need 3 <= n < 8");
  const auto rx = midranks(x);
  auto ry = midranks(y);
  const double observed = std::abs(pearson(rx, ry));
  std::vector<double> perm = ry;
  std::sort(perm.begin(), perm.end());
  std::size_t total = 0, extreme = 0;
  do {
    ++total;
    if (std::abs(pearson(rx, perm)) >= observed - 1e-12) ++extreme;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return double(extreme) / double(total);
}

struct TrendResult {
  double slope = 0.0;
  double intercept = 0.0;
  double p_value = 1.0;  // two-sided t-test on the slope
};

// OLS line fit with a two-sided t-test on the slope. Requires >= 3 points and
// non-constant predictor.
inline TrendResult linear_trend(const std::vector<double>& t,
                                const std::vector<double>& y) {
  if (t.size() != y.size()) throw std::invalid_argument("trend: size mismatch");
  const std::size_t n = t.size();
  if (n < 3) throw std::invalid_argument("trend: need >= 3 points");
  double mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mt += t[i];
    my += y[i];
  }
  mt /= double(n);
  my /= double(n);
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    stt += (t[i] - mt) * (t[i] - mt);
    sty += (t[i] - mt) * (y[i] - my);
  }
  if (!(stt > 0.0)) throw std::invalid_argument("trend: constant predictor");
  TrendResult out;
  out.slope = sty / stt;
  out.intercept = my - out.slope * mt;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (out.intercept + out.slope * t[i]);
    sse += r * r;
  }
  const double df = double(n - 2);
  const double se2 = sse / df / stt;
  if (se2 <= 0.0) {
    out.p_value = out.slope == 0.0 ? 1.0 : 0.0;
    return out;
  }
  const double tstat = out.slope / std::sqrt(se2);
  boost::math::students_t dist(df);
  out.p_value = 2.0 * boost::math::cdf(dist, -std::abs(tstat));
  return out;
}

// Linear-interpolation percentile (q in [0, 100]) over a copy of the data.
inline double percentile_linear(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("percentile: empty");
  if (!(q >= 0.0 && q <= 100.0))
    throw std::invalid_argument("percentile: q out of range");
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * double(v.size() - 1);
  const std::size_t lo = std::size_t(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = pos - double(lo);
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

inline double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace blastdose
