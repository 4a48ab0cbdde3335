#pragma once

#include <span>
#include <vector>

namespace apfddpg::stats {

double mean(std::span<const double> xs);

/// Unbiased sample variance (n-1 denominator). Needs at least two values.
double sample_variance(std::span<const double> xs);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
};

/// Pooled-variance Student's t-test of mean(a) - mean(b). Degenerate inputs
/// (zero pooled variance) give t=0, p=1 when the means agree and t=+-inf,
/// p=0 otherwise.
TTestResult students_t_test(std::span<const double> a, std::span<const double> b);

/// Welch's t-test with Satterthwaite degrees of freedom.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

/// P(T <= t) for Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);

/// Trailing moving average: element i is the mean of the last `window`
/// elements ending at i (fewer at the start of the series).
std::vector<double> moving_average(const std::vector<double>& series, int window);

}  // namespace apfddpg::stats
