#include "apfddpg/stats.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace apfddpg::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty sample");
  double total = 0.0;
  for (double x : xs) total += x;
  return total / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("sample_variance: need at least two values");
  const double m = mean(xs);
  double total = 0.0;
  for (double x : xs) total += (x - m) * (x - m);
  return total / static_cast<double>(xs.size() - 1);
}

double student_t_cdf(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const boost::math::students_t dist(df);
  return boost::math::cdf(dist, t);
}

namespace {

TTestResult finish(double diff, double se, double df) {
  TTestResult result;
  result.df = df;
  if (se == 0.0) {
    if (diff == 0.0) {
      result.t = 0.0;
      result.p_two_sided = 1.0;
    } else {
      result.t = diff > 0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
      result.p_two_sided = 0.0;
    }
    return result;
  }
  result.t = diff / se;
  result.p_two_sided = 2.0 * student_t_cdf(-std::abs(result.t), df);
  return result;
}

}  // namespace

TTestResult students_t_test(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size(), m = b.size();
  if (n < 2 || m < 2) throw std::invalid_argument("t-test: need at least two values per sample");
  const double va = sample_variance(a), vb = sample_variance(b);
  const double df = static_cast<double>(n + m - 2);
  const double pooled =
      ((static_cast<double>(n) - 1.0) * va + (static_cast<double>(m) - 1.0) * vb) / df;
  const double se = std::sqrt(pooled * (1.0 / static_cast<double>(n) + 1.0 / static_cast<double>(m)));
  return finish(mean(a) - mean(b), se, df);
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size(), m = b.size();
  if (n < 2 || m < 2) throw std::invalid_argument("t-test: need at least two values per sample");
  const double va = sample_variance(a) / static_cast<double>(n);
  const double vb = sample_variance(b) / static_cast<double>(m);
  const double total = va + vb;
  if (total == 0.0) return finish(mean(a) - mean(b), 0.0, static_cast<double>(n + m - 2));
  const double df = total * total / (va * va / (static_cast<double>(n) - 1.0) +
                                     vb * vb / (static_cast<double>(m) - 1.0));
  return finish(mean(a) - mean(b), std::sqrt(total), df);
}

std::vector<double> moving_average(const std::vector<double>& series, int window) {
  if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t begin = i + 1 >= static_cast<std::size_t>(window)
                                  ? i + 1 - static_cast<std::size_t>(window)
                                  : 0;
    double total = 0.0;
    for (std::size_t k = begin; k <= i; ++k) total += series[k];
    out[i] = total / static_cast<double>(i - begin + 1);
  }
  return out;
}

}  // namespace apfddpg::stats
