#pragma once

#include "panelqlm/likelihood.hpp"

// Deterministic expectations of the reparametrized log-likelihood. Because
// l_{n,i} is quadratic in the data for fixed parameters, its expectation under
// any model parameter has a closed form in the model-implied second moments:
//
//   E[u u'] = Phi(truth),  ytil_{-1} = P(rho_truth) u  (FE),
//
// and for RE additionally the empirical second moment of the first
// observations. All expected derivatives used by the test statistics are
// derivatives of this surrogate in the evaluation parameter: the Hessian and
// the score mean/covariance analytically, the third- and fourth-order blocks
// by Richardson-extrapolated central differences.

namespace panelqlm {

class ExpectedLikelihood {
 public:
  // y1_sq_mean is only consulted for RE models.
  ExpectedLikelihood(Model model, VarianceMode mode, int t_len, double y1_sq_mean = 0.0);

  const ParamLayout& layout() const { return layout_; }

  // Per-observation E_{truth}[l_{n,i}(eval)] in n coordinates.
  double value_n(const VectorXd& theta_eval_n, const VectorXd& theta_truth_n) const;
  // Same surrogate in structural coordinates.
  double value(const VectorXd& theta_eval, const VectorXd& theta_truth) const;

  // Expected per-observation Hessian at eval = truth = theta (self-expectation),
  // analytic, in structural or n coordinates.
  MatrixXd hessian(const VectorXd& theta) const;
  MatrixXd hessian_n(const VectorXd& theta_n) const;

  // Same second derivative in the evaluation parameter but with the data
  // measure pinned at theta_truth_n (the object whose scaled limits appear in
  // the local power expansions). FE only.
  MatrixXd hessian_eval_n(const VectorXd& theta_eval_n, const VectorXd& theta_truth_n) const;

  // Mean vector and covariance matrix of the per-individual n-score under
  // data generated at theta_truth_n, evaluated at theta_eval_n. FE only.
  VectorXd score_mean_n(const VectorXd& theta_eval_n, const VectorXd& theta_truth_n) const;
  MatrixXd score_cov_n(const VectorXd& theta_eval_n, const VectorXd& theta_truth_n) const;

 private:
  struct Moments;  // model-implied data moments under a truth parameter
  Moments make_moments(const VectorXd& theta_truth) const;
  void score_quadratic_forms(const VectorXd& theta_eval, const VectorXd& theta_truth,
                             std::vector<MatrixXd>& a, VectorXd& c) const;

  ParamLayout layout_;
  double y1_sq_mean_ = 0.0;
};

struct SingularPointDerivatives {
  VectorXd s1;      // N-vector, (1/2) d^2 l_{n,i} / d r_n^2
  MatrixXd s2;      // N x (dim-1), d l_{n,i} / d d_n
  MatrixXd htilde;  // dim x dim per-observation average of the scaled blocks
};

// Expected per-observation Hessian bound to a data set (supplies the first
// observation moments for RE).
MatrixXd expected_hessian_n(const Likelihood& lik, const VectorXd& theta_n);
MatrixXd expected_hessian(const Likelihood& lik, const VectorXd& theta);

// S_i blocks and the scaled higher-order expected-derivative matrix at
// theta_n, with blocks (2/4!) E d^4/dr^4, (1/2!) E d^3/dr^2 dd, E d^2/dd dd'.
SingularPointDerivatives singular_derivatives(const Likelihood& lik, const VectorXd& theta_n);

}  // namespace panelqlm
