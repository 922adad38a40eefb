#include "layermix/stats.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "layermix/errors.hpp"

namespace layermix {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

namespace {

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

double sample_stddev(std::span<const double> xs) { return std::sqrt(sample_variance(xs)); }

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw ConfigError("welch t-test needs at least two values per sample");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean(a);
  const double mb = mean(b);
  const double qa = sample_variance(a) / na;
  const double qb = sample_variance(b) / nb;
  const double se2 = qa + qb;

  WelchResult r;
  if (se2 == 0.0) {
    if (ma == mb) return {0.0, na + nb - 2.0, 1.0};
    r.t = ma > mb ? std::numeric_limits<double>::infinity()
                  : -std::numeric_limits<double>::infinity();
    r.df = na + nb - 2.0;
    r.p = 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
  if (r.p > 1.0) r.p = 1.0;
  return r;
}

}  // namespace layermix
