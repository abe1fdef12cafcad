#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "pgee/error.hpp"
#include "pgee/varest.hpp"

namespace pgee {

double student_t_cdf(double x, double dof) {
  return boost::math::cdf(boost::math::students_t(dof), x);
}

double student_t_quantile(double prob, double dof) {
  return boost::math::quantile(boost::math::students_t(dof), prob);
}

WaldResult wald_test(double beta_s, double se_s, std::size_t N, std::size_t p, double null_value) {
  if (!(se_s > 0.0) || !std::isfinite(se_s)) {
    throw Error(ErrorCode::ZeroSE, "standard error " + std::to_string(se_s) + " is not positive");
  }
  if (N <= p) {
    throw Error(ErrorCode::TooFewClusters, "Wald test needs N > p");
  }
  WaldResult w;
  w.estimate = beta_s;
  w.se = se_s;
  w.dof = static_cast<int>(N - p);
  w.t = (beta_s - null_value) / se_s;
  const boost::math::students_t dist(static_cast<double>(w.dof));
  // Upper tail via the complement keeps precision for large |t|.
  w.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(w.t))));
  const double crit = boost::math::quantile(boost::math::complement(dist, 0.025));
  w.ci_low = beta_s - crit * se_s;
  w.ci_high = beta_s + crit * se_s;
  return w;
}

}  // namespace pgee
