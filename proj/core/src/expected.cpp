#include "panelqlm/expected.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "panelqlm/matrixkit.hpp"

namespace panelqlm {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

MatrixXd build_phi(const VectorXd& theta, const ParamLayout& layout) {
  const int m = layout.t_len - 1;
  MatrixXd phi = MatrixXd::Constant(m, m, theta(1));
  if (layout.mode == VarianceMode::tsh)
    phi.diagonal().array() += theta(2);
  else
    phi.diagonal() += theta.segment(2, m);
  return phi;
}

std::vector<MatrixXd> phi_derivatives(const ParamLayout& layout) {
  const int m = layout.t_len - 1;
  std::vector<MatrixXd> d;
  d.push_back(MatrixXd::Ones(m, m));
  if (layout.mode == VarianceMode::tsh) {
    d.push_back(MatrixXd::Identity(m, m));
  } else {
    for (int j = 0; j < m; ++j) {
      MatrixXd e = MatrixXd::Zero(m, m);
      e(j, j) = 1.0;
      d.push_back(e);
    }
  }
  return d;
}

}  // namespace

struct ExpectedLikelihood::Moments {
  MatrixXd phi_t;    // E[u u']
  MatrixXd lag;      // P(rho_truth)
  double rho_t = 0.0;
  double pi_n_t = 0.0;  // reparametrized pi of the truth (0 for FE)
};

ExpectedLikelihood::ExpectedLikelihood(Model model, VarianceMode mode, int t_len,
                                       double y1_sq_mean)
    : layout_{model, mode, t_len}, y1_sq_mean_(y1_sq_mean) {
  if (t_len < 3) throw std::invalid_argument("ExpectedLikelihood: need T >= 3");
}

ExpectedLikelihood::Moments ExpectedLikelihood::make_moments(const VectorXd& theta_truth) const {
  Moments m;
  m.rho_t = theta_truth(0);
  m.phi_t = build_phi(theta_truth, layout_);
  m.lag = lag_filter(layout_.t_len, m.rho_t);
  if (layout_.model == Model::re)
    m.pi_n_t = theta_truth(layout_.pi_index()) - (1.0 - m.rho_t);
  return m;
}

double ExpectedLikelihood::value(const VectorXd& theta_eval, const VectorXd& theta_truth) const {
  if (theta_eval.size() != layout_.dim() || theta_truth.size() != layout_.dim())
    throw std::invalid_argument("ExpectedLikelihood: parameter dimension mismatch");
  const int mdim = layout_.t_len - 1;
  const Moments mo = make_moments(theta_truth);

  const MatrixXd phi_e = build_phi(theta_eval, layout_);
  Eigen::LLT<MatrixXd> llt(phi_e);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("ExpectedLikelihood: evaluation covariance not positive definite");
  const MatrixXd l = llt.matrixL();
  const double logdet = 2.0 * l.diagonal().array().log().sum();

  const MatrixXd m_filter =
      MatrixXd::Identity(mdim, mdim) + (mo.rho_t - theta_eval(0)) * mo.lag;
  const MatrixXd cov_resid = m_filter * mo.phi_t * m_filter.transpose();
  double quad = llt.solve(cov_resid).trace();

  if (layout_.model == Model::re) {
    const double pi_n_e = theta_eval(layout_.pi_index()) - (1.0 - theta_eval(0));
    const VectorXd ones = VectorXd::Ones(mdim);
    const VectorXd b = (mo.rho_t - theta_eval(0)) * mo.pi_n_t * (mo.lag * ones) +
                       (mo.pi_n_t - pi_n_e) * ones;
    quad += y1_sq_mean_ * b.dot(llt.solve(b));
  }
  return -0.5 * (mdim * kLogTwoPi + logdet + quad);
}

double ExpectedLikelihood::value_n(const VectorXd& theta_eval_n,
                                   const VectorXd& theta_truth_n) const {
  return value(theta_from_n(theta_eval_n, layout_), theta_from_n(theta_truth_n, layout_));
}

MatrixXd ExpectedLikelihood::hessian(const VectorXd& theta) const {
  if (theta.size() != layout_.dim())
    throw std::invalid_argument("ExpectedLikelihood: parameter dimension mismatch");
  const int mdim = layout_.t_len - 1;
  const int nv = 1 + layout_.nz();
  const int dim = layout_.dim();
  const Moments mo = make_moments(theta);

  const MatrixXd phi = mo.phi_t;
  Eigen::LLT<MatrixXd> llt(phi);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("ExpectedLikelihood: covariance not positive definite");
  const MatrixXd phi_inv = llt.solve(MatrixXd::Identity(mdim, mdim));
  const std::vector<MatrixXd> dphi = phi_derivatives(layout_);

  // Data moments at self-expectation. For FE, x_rho = P u; for RE,
  // x_rho = y1 * a + P u with a = ones + pi_n * P ones.
  const MatrixXd& p = mo.lag;
  const MatrixXd exx_stoch = p * phi * p.transpose();  // stochastic part of E[x x']
  const MatrixXd exu = p * phi;                        // E[x u']
  const VectorXd ones = VectorXd::Ones(mdim);
  VectorXd a = VectorXd::Zero(mdim);
  if (layout_.model == Model::re) a = ones + mo.pi_n_t * (p * ones);

  MatrixXd h = MatrixXd::Zero(dim, dim);
  h(0, 0) = -(phi_inv * exx_stoch).trace();
  if (layout_.model == Model::re) h(0, 0) -= y1_sq_mean_ * a.dot(phi_inv * a);
  for (int k = 0; k < nv; ++k) {
    const MatrixXd b_k = phi_inv * dphi[k] * phi_inv;
    h(0, 1 + k) = h(1 + k, 0) = -(b_k * exu.transpose()).trace();
    for (int l2 = k; l2 < nv; ++l2) {
      const double val = -0.5 * (phi_inv * dphi[l2] * phi_inv * dphi[k]).trace();
      h(1 + k, 1 + l2) = val;
      h(1 + l2, 1 + k) = val;
    }
  }
  if (layout_.model == Model::re) {
    const int pi = layout_.pi_index();
    h(pi, pi) = -y1_sq_mean_ * ones.dot(phi_inv * ones);
    h(0, pi) = h(pi, 0) = -y1_sq_mean_ * ones.dot(phi_inv * a);
    // E[x_pi u'] = 0, so the pi / variance blocks vanish.
  }
  return h;
}

MatrixXd ExpectedLikelihood::hessian_n(const VectorXd& theta_n) const {
  // At self-expectation the expected structural score is zero, so the chain
  // rule has no curvature term.
  const MatrixXd jac = map_jacobian(theta_n, layout_);
  return jac.transpose() * hessian(theta_from_n(theta_n, layout_)) * jac;
}

void ExpectedLikelihood::score_quadratic_forms(const VectorXd& theta_eval,
                                               const VectorXd& theta_truth,
                                               std::vector<MatrixXd>& a_out,
                                               VectorXd& c_out) const {
  if (layout_.model != Model::fe)
    throw std::invalid_argument("ExpectedLikelihood: score moments implemented for FE only");
  const int mdim = layout_.t_len - 1;
  const int nv = 1 + layout_.nz();
  const Moments mo = make_moments(theta_truth);

  const MatrixXd phi_e = build_phi(theta_eval, layout_);
  Eigen::LLT<MatrixXd> llt(phi_e);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("ExpectedLikelihood: evaluation covariance not positive definite");
  const MatrixXd phi_e_inv = llt.solve(MatrixXd::Identity(mdim, mdim));
  const std::vector<MatrixXd> dphi = phi_derivatives(layout_);

  const MatrixXd m_filter =
      MatrixXd::Identity(mdim, mdim) + (mo.rho_t - theta_eval(0)) * mo.lag;

  // Structural score components as s_k = c_k + (1/2) u' A_k u with u the
  // truth-side residual: s_rho = (Mu)' Phi^{-1} (Pu), s_v = -tr/2 + quad.
  a_out.assign(1 + nv, MatrixXd());
  c_out = VectorXd::Zero(1 + nv);
  {
    const MatrixXd b = m_filter.transpose() * phi_e_inv * mo.lag;
    a_out[0] = b + b.transpose();
    c_out(0) = 0.0;
  }
  for (int k = 0; k < nv; ++k) {
    const MatrixXd b_k = phi_e_inv * dphi[k] * phi_e_inv;
    a_out[1 + k] = m_filter.transpose() * b_k * m_filter;
    c_out(1 + k) = -0.5 * (phi_e_inv * dphi[k]).trace();
  }
}

MatrixXd ExpectedLikelihood::hessian_eval_n(const VectorXd& theta_eval_n,
                                            const VectorXd& theta_truth_n) const {
  if (layout_.model != Model::fe)
    throw std::invalid_argument("ExpectedLikelihood: eval-Hessian implemented for FE only");
  const VectorXd theta_e = theta_from_n(theta_eval_n, layout_);
  const VectorXd theta_t = theta_from_n(theta_truth_n, layout_);
  const int mdim = layout_.t_len - 1;
  const int nv = 1 + layout_.nz();
  const int dim = layout_.dim();
  const Moments mo = make_moments(theta_t);

  const MatrixXd phi_e = build_phi(theta_e, layout_);
  Eigen::LLT<MatrixXd> llt(phi_e);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("ExpectedLikelihood: evaluation covariance not positive definite");
  const MatrixXd phi_e_inv = llt.solve(MatrixXd::Identity(mdim, mdim));
  const std::vector<MatrixXd> dphi = phi_derivatives(layout_);
  const MatrixXd m_filter =
      MatrixXd::Identity(mdim, mdim) + (mo.rho_t - theta_e(0)) * mo.lag;
  const MatrixXd& p = mo.lag;
  const MatrixXd& sigma = mo.phi_t;

  MatrixXd h = MatrixXd::Zero(dim, dim);
  h(0, 0) = -(phi_e_inv * p * sigma * p.transpose()).trace();
  for (int k = 0; k < nv; ++k) {
    const MatrixXd b_k = phi_e_inv * dphi[k] * phi_e_inv;
    const double v = -(m_filter.transpose() * b_k * p * sigma).trace();
    h(0, 1 + k) = v;
    h(1 + k, 0) = v;
    for (int l2 = k; l2 < nv; ++l2) {
      const double val =
          0.5 * (phi_e_inv * dphi[l2] * phi_e_inv * dphi[k]).trace() -
          (m_filter.transpose() * b_k * dphi[l2] * phi_e_inv * m_filter * sigma).trace();
      h(1 + k, 1 + l2) = val;
      h(1 + l2, 1 + k) = val;
    }
  }

  // Chain rule with the non-vanishing expected structural score.
  std::vector<MatrixXd> a;
  VectorXd c;
  score_quadratic_forms(theta_e, theta_t, a, c);
  VectorXd mean_struct(dim);
  for (int k = 0; k < dim; ++k) mean_struct(k) = c(k) + 0.5 * (a[k] * sigma).trace();
  const MatrixXd jac = map_jacobian(theta_eval_n, layout_);
  MatrixXd hn = jac.transpose() * h * jac;
  for (int k = 0; k < dim; ++k)
    if (mean_struct(k) != 0.0)
      hn += mean_struct(k) * map_second_derivative(theta_eval_n, layout_, k);
  return hn;
}

VectorXd ExpectedLikelihood::score_mean_n(const VectorXd& theta_eval_n,
                                          const VectorXd& theta_truth_n) const {
  const VectorXd theta_e = theta_from_n(theta_eval_n, layout_);
  const VectorXd theta_t = theta_from_n(theta_truth_n, layout_);
  std::vector<MatrixXd> a;
  VectorXd c;
  score_quadratic_forms(theta_e, theta_t, a, c);
  const MatrixXd sigma = build_phi(theta_t, layout_);
  const int dim = layout_.dim();
  VectorXd mean_struct(dim);
  for (int k = 0; k < dim; ++k) mean_struct(k) = c(k) + 0.5 * (a[k] * sigma).trace();
  return map_jacobian(theta_eval_n, layout_).transpose() * mean_struct;
}

MatrixXd ExpectedLikelihood::score_cov_n(const VectorXd& theta_eval_n,
                                         const VectorXd& theta_truth_n) const {
  const VectorXd theta_e = theta_from_n(theta_eval_n, layout_);
  const VectorXd theta_t = theta_from_n(theta_truth_n, layout_);
  std::vector<MatrixXd> a;
  VectorXd c;
  score_quadratic_forms(theta_e, theta_t, a, c);
  const MatrixXd sigma = build_phi(theta_t, layout_);
  const int dim = layout_.dim();
  const MatrixXd jac = map_jacobian(theta_eval_n, layout_);

  // n-coordinate quadratic forms are linear combinations of the structural ones.
  std::vector<MatrixXd> an(dim);
  for (int j = 0; j < dim; ++j) {
    an[j] = MatrixXd::Zero(sigma.rows(), sigma.cols());
    for (int k = 0; k < dim; ++k)
      if (jac(k, j) != 0.0) an[j] += jac(k, j) * a[k];
  }
  MatrixXd cov(dim, dim);
  for (int j = 0; j < dim; ++j) {
    const MatrixXd ajs = an[j] * sigma;
    for (int k = j; k < dim; ++k) {
      const double v = 0.5 * (ajs * (an[k] * sigma)).trace();
      cov(j, k) = v;
      cov(k, j) = v;
    }
  }
  return cov;
}

LikelihoodEval Likelihood::evaluate_n(const VectorXd& theta_n) const {
  LikelihoodEval out;
  out.value = loglik_n(theta_n);
  out.per_individual_scores = per_individual_scores_n(theta_n);
  out.observed_hessian = observed_hessian_n(theta_n);
  out.expected_hessian = expected_hessian_n(*this, theta_n);
  out.opg = opg_n(theta_n, false);
  out.opg_centered = opg_n(theta_n, true);
  return out;
}

MatrixXd expected_hessian_n(const Likelihood& lik, const VectorXd& theta_n) {
  ExpectedLikelihood ex(lik.layout().model, lik.layout().mode, lik.layout().t_len,
                        lik.y1_square_mean());
  return ex.hessian_n(theta_n);
}

MatrixXd expected_hessian(const Likelihood& lik, const VectorXd& theta) {
  ExpectedLikelihood ex(lik.layout().model, lik.layout().mode, lik.layout().t_len,
                        lik.y1_square_mean());
  return ex.hessian(theta);
}

namespace {

// Fourth derivative in the first coordinate by a 5-point stencil with one
// Richardson level.
double fd_fourth(const std::function<double(const VectorXd&)>& f, const VectorXd& x, int k,
                 double h) {
  auto stencil = [&](double step) {
    VectorXd p = x;
    auto at = [&](double d) {
      p(k) = x(k) + d;
      return f(p);
    };
    const double v = (at(-2 * step) - 4.0 * at(-step) + 6.0 * at(0.0) - 4.0 * at(step) +
                      at(2 * step)) /
                     (step * step * step * step);
    p(k) = x(k);
    return v;
  };
  const double d1 = stencil(h);
  const double d2 = stencil(h / 2.0);
  return (16.0 * d2 - d1) / 15.0;
}

// Mixed third derivative d^3 f / dx_k^2 dx_l, Richardson once.
double fd_third_mixed(const std::function<double(const VectorXd&)>& f, const VectorXd& x, int k,
                      int l, double hk, double hl) {
  auto stencil = [&](double sk, double sl) {
    VectorXd p = x;
    auto at = ([&](double dk, double dl) {
      p(k) = x(k) + dk;
      p(l) = x(l) + dl;
      return f(p);
    });
    const double plus = at(sk, sl) - 2.0 * at(0.0, sl) + at(-sk, sl);
    const double minus = at(sk, -sl) - 2.0 * at(0.0, -sl) + at(-sk, -sl);
    return (plus - minus) / (2.0 * sk * sk * sl);
  };
  const double d1 = stencil(hk, hl);
  const double d2 = stencil(hk / 2.0, hl / 2.0);
  return (4.0 * d2 - d1) / 3.0;
}

}  // namespace

SingularPointDerivatives singular_derivatives(const Likelihood& lik, const VectorXd& theta_n) {
  const ParamLayout& layout = lik.layout();
  const int dim = layout.dim();
  SingularPointDerivatives out;
  out.s1 = 0.5 * lik.per_individual_rr_n(theta_n);
  const MatrixXd scores = lik.per_individual_scores_n(theta_n);
  out.s2 = scores.rightCols(dim - 1);

  ExpectedLikelihood ex(layout.model, layout.mode, layout.t_len, lik.y1_square_mean());
  const auto g = [&](const VectorXd& eval_n) { return ex.value_n(eval_n, theta_n); };

  out.htilde = MatrixXd::Zero(dim, dim);
  // d_n block straight from the analytic expected Hessian.
  out.htilde.bottomRightCorner(dim - 1, dim - 1) =
      ex.hessian_n(theta_n).bottomRightCorner(dim - 1, dim - 1);

  const double hr = 0.05;
  out.htilde(0, 0) = (2.0 / 24.0) * fd_fourth(g, theta_n, 0, hr);
  for (int k = 1; k < dim; ++k) {
    const double hk = 0.05 * std::max(std::abs(theta_n(k)), 1.0);
    const double v = 0.5 * fd_third_mixed(g, theta_n, 0, k, hr, hk);
    out.htilde(0, k) = v;
    out.htilde(k, 0) = v;
  }
  return out;
}

}  // namespace panelqlm
