#pragma once

#include <span>

namespace layermix {

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

// Welch's unequal-variance two-sample t-test with Welch-Satterthwaite degrees
// of freedom. Both samples need at least two values (ConfigError otherwise).
// Zero variance in both samples gives p = 1 for equal means and p = 0 else.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> xs);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_stddev(std::span<const double> xs);

}  // namespace layermix
