#pragma once

// Central and noncentral chi-square tail probabilities. The noncentral
// survival function is a Poisson-weighted mixture of central terms summed
// outward from the Poisson mode, so the absolute error stays below 1e-10
// over the parameter ranges the power curves need.

namespace panelqlm {

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Upper tail P(X > x) for X ~ chi^2(df).
double chi2_sf(double x, double df);

// Lower tail.
double chi2_cdf(double x, double df);

// Quantile: the x with chi2_cdf(x, df) = p, for p in (0, 1).
double chi2_quantile(double df, double p);

// Upper tail of the noncentral chi^2(delta, df) with noncentrality delta >= 0.
double noncentral_chi2_sf(double x, double df, double delta);

}  // namespace panelqlm
