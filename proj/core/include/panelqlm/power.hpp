#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

// Local asymptotic power machinery for the unit-root hypothesis sequence
// rho = 1 - e / N^{1/4}: noncentrality parameters, their three independent
// derivations (score-sandwich limit, moment quadratic form, largest
// generalized eigenvalue), and noncentral chi-square power curves at the 5%
// level. All noncentralities scale as e^4 times an exact rational with
// denominator dividing 72.

namespace panelqlm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct PowerCurvePoint {
  double e = 0.0;
  double delta = 0.0;
  int df = 1;
  double power = 0.0;
};

struct PowerCurve {
  int t_len = 0;
  std::string variant;  // qlm_c_tsh | gmm_ar | map
  std::vector<PowerCurvePoint> points;
};

// e^4 (2T-3) T (T-1) (T-2) / 72, the homoskedasticity-imposed noncentrality.
double delta_qlm_tsh(int t_len, double e);

// Closed-form limit ingredients of the scaled score expansion: the drift
// vector and the scaled expected-Hessian / centered-OPG limits, all exact.
struct SingularDriftIngredients {
  Eigen::Vector3d c3;
  Eigen::Matrix3d sh;  // scaled expected-Hessian limit
  Eigen::Matrix3d sj;  // scaled centered-OPG limit
};
SingularDriftIngredients singular_drift_ingredients(int t_len);
Eigen::Matrix3d singular_scaling(double phi, double sigma_sq);  // diag(1/phi, 1, sigma^2)

// delta from the ingredient sandwich (first derivation).
double delta_from_drift_ingredients(int t_len);

// delta from the moment quadratic form c1' W^{-1} c1 at dimension T-1
// (second derivation).
double delta_gmm_quadratic_form(int t_len, double e);

// delta as the largest root of |2 lambda W - c1 c1'| = 0 (third derivation),
// solved by Cholesky whitening of W.
double delta_map_eigenvalue(int t_len, double e);

// Noncentrality of the centered FE statistic without imposing equal
// variances, assembled from the closed-form drift vector and the numeric
// limits of the scaled expected Hessian and score covariance at the singular
// point with scale sigma_sq. e = 1 normalization.
double delta_sandwich_general(int t_len, double theta_star_sigma_sq);

// Power curves at the 5% level.
PowerCurve qlm_c_power_curve(int t_len, const VectorXd& e_grid);
PowerCurve gmm_ar_power_curve(int t_len, const VectorXd& e_grid);
PowerCurve map_power_curve(int t_len, const VectorXd& e_grid);

// One verification row: an identity re-checked at runtime.
struct VerificationCheck {
  std::string name;
  bool pass = false;
  double worst_error = 0.0;
};

// Re-runs every closed-form identity (structured-matrix identities, trace
// identities, the three-way delta agreement, the ingredient displays) over
// the given T range.
std::vector<VerificationCheck> verify_constants(int t_lo, int t_hi);

}  // namespace panelqlm
