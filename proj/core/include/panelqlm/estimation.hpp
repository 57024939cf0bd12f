#pragma once

#include <optional>
#include <string>
#include <vector>

#include "panelqlm/likelihood.hpp"

// Quasi-ML fitting. The variance constraints follow the two-stage scheme:
// first sigma^2 > 0 and sv2 >= 0; if the sv2 bound binds, the feasible set is
// relaxed to (T-1)*sv2 + sigma^2 > 0 (positive definiteness of the residual
// covariance) and the higher-likelihood solution wins. Under tsh the
// rho-restricted fit is available in closed form through the factorization of
// the likelihood into a differenced part and a weighted-mean part;
// everything else goes through a multistart quasi-Newton with a Nelder-Mead
// fallback. The profile over rho is scanned on a grid before local
// refinement because the likelihood can be bimodal near the unit root.

namespace panelqlm {

// Affine restriction A * theta_n = a on the n coordinates.
struct Restriction {
  MatrixXd a_mat;
  VectorXd a_vec;
};

struct FitOptions {
  int max_iterations = 300;
  double gradient_tol = 1e-8;
  double step_tol = 1e-10;
  double sigma_floor = 1e-12;            // lower guard on variance estimates
  std::vector<double> rho_starts = {0.0, 0.5, 0.9, 0.99};
  int profile_scan_points = 41;          // coarse scan of the rho profile
  double rho_lower = -0.995;
};

struct FitResult {
  VectorXd theta;                        // structural coordinates
  VectorXd theta_n;                      // n coordinates; empty when rho <= 0
  double loglik = 0.0;
  bool converged = false;
  int n_starts_used = 0;
  std::vector<std::string> active_bounds;
  double gradient_norm = 0.0;            // free-direction score norm at the fit
};

// Restricted fit with rho pinned (the workhorse of the test statistics).
FitResult fit_restricted_rho(const Likelihood& lik, double rho, const FitOptions& opts = {});

// Unrestricted fit.
FitResult fit_unrestricted(const Likelihood& lik, const FitOptions& opts = {});

// General entry point; a missing restriction means unrestricted, a
// restriction of the form r_n = a dispatches to the rho-restricted path,
// anything else is solved on the affine subspace of the n coordinates.
FitResult fit(const PanelData& data, Model model, VarianceMode mode,
              const std::optional<Restriction>& restriction = std::nullopt,
              const FitOptions& opts = {});
FitResult fit(const Likelihood& lik, const std::optional<Restriction>& restriction = std::nullopt,
              const FitOptions& opts = {});

// Method-of-moments starting values at fixed rho (variances and, for RE, the
// initial-observation loading).
VectorXd moment_start(const Likelihood& lik, double rho);

}  // namespace panelqlm
