#include "panelqlm/chi2.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace panelqlm {

namespace {

// Series expansion of P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16)
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x), valid for x >= a + 1 (modified Lentz).
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
  if (a <= 0.0) throw std::invalid_argument("gamma_p: shape must be positive");
  if (x < 0.0) throw std::invalid_argument("gamma_p: x must be nonnegative");
  if (x == 0.0) return 0.0;
  return (x < a + 1.0) ? gamma_p_series(a, x) : 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
  if (a <= 0.0) throw std::invalid_argument("gamma_q: shape must be positive");
  if (x < 0.0) throw std::invalid_argument("gamma_q: x must be nonnegative");
  if (x == 0.0) return 1.0;
  return (x < a + 1.0) ? 1.0 - gamma_p_series(a, x) : gamma_q_cf(a, x);
}

double chi2_sf(double x, double df) { return gamma_q(df / 2.0, x / 2.0); }

double chi2_cdf(double x, double df) { return gamma_p(df / 2.0, x / 2.0); }

double chi2_quantile(double df, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("chi2_quantile: p must be in (0,1)");
  // Bisection bracket, then Newton refinement on the CDF.
  double lo = 0.0, hi = df + 10.0;
  while (chi2_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(mid, df) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-13 * (1.0 + hi)) break;
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 8; ++i) {
    const double f = chi2_cdf(x, df) - p;
    const double pdf = std::exp((df / 2.0 - 1.0) * std::log(x) - x / 2.0 -
                                (df / 2.0) * std::log(2.0) - std::lgamma(df / 2.0));
    if (pdf <= 0.0) break;
    const double step = f / pdf;
    x -= step;
    if (x <= 0.0) x = 0.5 * (x + step);  // undo into the positive half
    if (std::fabs(step) < 1e-14 * (1.0 + x)) break;
  }
  return x;
}

double noncentral_chi2_sf(double x, double df, double delta) {
  if (x < 0.0) throw std::invalid_argument("noncentral_chi2_sf: x must be nonnegative");
  if (df < 1.0) throw std::invalid_argument("noncentral_chi2_sf: df must be >= 1");
  if (delta < 0.0) throw std::invalid_argument("noncentral_chi2_sf: delta must be nonnegative");
  if (x == 0.0) return 1.0;
  if (delta == 0.0) return chi2_sf(x, df);

  const double half = delta / 2.0;
  const long mode = std::max(0L, static_cast<long>(half));
  const double log_half = std::log(half);

  auto log_pois = [&](long j) { return -half + j * log_half - std::lgamma(j + 1.0); };

  double total = 0.0;
  // Walk down from the mode.
  for (long j = mode; j >= 0; --j) {
    const double w = std::exp(log_pois(j));
    total += w * chi2_sf(x, df + 2.0 * j);
    if (w < 1e-17 && j < mode) break;
  }
  // Walk up from the mode.
  for (long j = mode + 1; j < mode + 10000; ++j) {
    const double w = std::exp(log_pois(j));
    total += w * chi2_sf(x, df + 2.0 * j);
    if (w < 1e-17) break;
  }
  return std::min(1.0, total);
}

}  // namespace panelqlm
