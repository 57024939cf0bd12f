#pragma once

#include <Eigen/Dense>

#include <optional>

#include "panelqlm/dgp.hpp"

// Gaussian quasi-log-likelihoods for the panel AR(1) model conditional on the
// first observation, in two flavors:
//
//   FE: residual u_i = ytil_i - rho * ytil_{i,-1},            ytil = y - y_1*ones
//   RE: residual u_i = y_i - rho * y_{i,-1} - pi~ * y_1*ones
//
// with covariance Phi = sv2 * ones*ones' + Psi(zeta), where Psi is sigma^2*I
// under time-series homoskedasticity (the "tsh" mode) or diag(zeta) with one
// free variance per period in the "th" mode.
//
// Parameter vectors are flat with layout (rho, sv2, zeta..., [pi~]). A second
// coordinate system, the "n" coordinates (r_n, sv_n, zeta_n..., [pi_n]), is
// related by
//
//   rho = r_n,  sv2 = r_n * z_{2,n} * (sv_n + 1 - r_n),
//   zeta = r_n * zeta_n,  pi~ = pi_n + (1 - r_n),
//
// and is the system in which the score has a zero rho-component at the
// singular point (rho = 1 with equal variances). Totals are carried
// internally: loglik/score/observed_hessian sum over individuals, opg_n is
// the per-observation average.

namespace panelqlm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Model { fe, re };
enum class VarianceMode { tsh, th };

struct ThetaFE {
  double rho = 0.0;
  double sigma_v_tilde_sq = 0.0;
  VectorXd zeta;  // length 1 (tsh) or T-1 (th)
};

struct ThetaRE {
  double rho = 0.0;
  double pi_tilde = 0.0;
  double sigma_v_tilde_sq = 0.0;
  VectorXd zeta;
};

struct ThetaN {
  double rho_n = 0.0;
  double sigma_v_n_sq = 0.0;
  VectorXd zeta_n;
  std::optional<double> pi_n;  // present for RE
};

// Flat-vector layout shared by structural and n coordinates.
struct ParamLayout {
  Model model = Model::fe;
  VarianceMode mode = VarianceMode::tsh;
  int t_len = 0;

  int nz() const { return mode == VarianceMode::tsh ? 1 : t_len - 1; }
  int dim() const { return 2 + nz() + (model == Model::re ? 1 : 0); }
  int rho_index() const { return 0; }
  int sv_index() const { return 1; }
  int zeta_index() const { return 2; }
  int pi_index() const { return 2 + nz(); }  // RE only
};

VectorXd pack(const ThetaFE& t);
VectorXd pack(const ThetaRE& t);
VectorXd pack(const ThetaN& t, Model model);
ThetaFE unpack_fe(const VectorXd& theta, const ParamLayout& layout);
ThetaRE unpack_re(const VectorXd& theta, const ParamLayout& layout);
ThetaN unpack_n(const VectorXd& theta_n, const ParamLayout& layout);

// theta(theta_n) and its inverse; both require r_n respectively rho > 0.
VectorXd theta_from_n(const VectorXd& theta_n, const ParamLayout& layout);
VectorXd theta_to_n(const VectorXd& theta, const ParamLayout& layout);
MatrixXd map_jacobian(const VectorXd& theta_n, const ParamLayout& layout);
// d^2 theta_k / d theta_n d theta_n'
MatrixXd map_second_derivative(const VectorXd& theta_n, const ParamLayout& layout, int k);

struct LikelihoodEval {
  double value = 0.0;                // total log-likelihood
  MatrixXd per_individual_scores;    // N x dim, n coordinates
  MatrixXd observed_hessian;         // dim x dim total, n coordinates
  MatrixXd expected_hessian;         // dim x dim per-observation average
  MatrixXd opg;                      // average uncentered outer product
  MatrixXd opg_centered;             // average centered outer product
};

class Likelihood {
 public:
  Likelihood(const PanelData& data, Model model, VarianceMode mode);

  const ParamLayout& layout() const { return layout_; }
  int n() const { return n_; }
  int t_len() const { return layout_.t_len; }
  double y1_square_mean() const { return y1_sq_mean_; }

  // Structural coordinates. loglik returns -inf when Phi is not positive
  // definite; the derivative evaluators throw std::domain_error there.
  double loglik(const VectorXd& theta) const;
  VectorXd score(const VectorXd& theta) const;
  MatrixXd per_individual_scores(const VectorXd& theta) const;
  MatrixXd observed_hessian(const VectorXd& theta) const;

  // n coordinates (through the reparametrization map).
  double loglik_n(const VectorXd& theta_n) const;
  VectorXd score_n(const VectorXd& theta_n) const;
  MatrixXd per_individual_scores_n(const VectorXd& theta_n) const;
  MatrixXd observed_hessian_n(const VectorXd& theta_n) const;
  // Per-individual d^2 l_{n,i} / d r_n^2.
  VectorXd per_individual_rr_n(const VectorXd& theta_n) const;

  // Average outer product of per-individual n-scores, optionally centered.
  MatrixXd opg_n(const VectorXd& theta_n, bool centered) const;

  // Everything at once, including the expected Hessian.
  LikelihoodEval evaluate_n(const VectorXd& theta_n) const;

  // Data blocks used by the estimators.
  const MatrixXd& residual_basis_ytil() const { return ytil_; }
  const MatrixXd& residual_basis_ytil_lag() const { return ytil_lag_; }
  const VectorXd& first_observations() const { return y1_; }

  // Residual matrix (N x (T-1)) at a structural parameter.
  MatrixXd residuals(const VectorXd& theta) const;

 private:
  struct Workspace;
  Workspace make_workspace(const VectorXd& theta) const;

  ParamLayout layout_;
  int n_ = 0;
  MatrixXd y_;         // N x (T-1), observations 2..T
  MatrixXd ylag_;      // N x (T-1), observations 1..T-1
  MatrixXd ytil_;      // y - y1
  MatrixXd ytil_lag_;  // ylag - y1
  VectorXd y1_;
  double y1_sq_mean_ = 0.0;
};

// The two pieces of the FE likelihood split into the differenced component
// and the weighted-mean component, together with the mean-part variance
// sigma_u^2 = 1/(ones' Psi^{-1} ones) + sv2 and the score of the total in
// sigma_u^2. The sum diff_part + mean_part equals loglik() on the FE model.
struct FeFactorizedParts {
  double diff_part = 0.0;
  double mean_part = 0.0;
  double sigma_u_sq = 0.0;
  double dl_dsigma_u_sq = 0.0;
};
FeFactorizedParts fe_factorized_loglik(const PanelData& data, const VectorXd& theta,
                                       VarianceMode mode);

}  // namespace panelqlm
