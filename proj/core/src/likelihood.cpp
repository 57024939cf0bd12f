#include "panelqlm/likelihood.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace panelqlm {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

VectorXd pack(const ThetaFE& t) {
  VectorXd out(2 + t.zeta.size());
  out(0) = t.rho;
  out(1) = t.sigma_v_tilde_sq;
  out.segment(2, t.zeta.size()) = t.zeta;
  return out;
}

VectorXd pack(const ThetaRE& t) {
  VectorXd out(3 + t.zeta.size());
  out(0) = t.rho;
  out(1) = t.sigma_v_tilde_sq;
  out.segment(2, t.zeta.size()) = t.zeta;
  out(2 + t.zeta.size()) = t.pi_tilde;
  return out;
}

VectorXd pack(const ThetaN& t, Model model) {
  const bool re = model == Model::re;
  VectorXd out(2 + t.zeta_n.size() + (re ? 1 : 0));
  out(0) = t.rho_n;
  out(1) = t.sigma_v_n_sq;
  out.segment(2, t.zeta_n.size()) = t.zeta_n;
  if (re) {
    require(t.pi_n.has_value(), "pack: RE ThetaN needs pi_n");
    out(2 + t.zeta_n.size()) = *t.pi_n;
  }
  return out;
}

ThetaFE unpack_fe(const VectorXd& theta, const ParamLayout& layout) {
  require(layout.model == Model::fe && theta.size() == layout.dim(), "unpack_fe: layout mismatch");
  return {theta(0), theta(1), theta.segment(2, layout.nz())};
}

ThetaRE unpack_re(const VectorXd& theta, const ParamLayout& layout) {
  require(layout.model == Model::re && theta.size() == layout.dim(), "unpack_re: layout mismatch");
  return {theta(0), theta(layout.pi_index()), theta(1), theta.segment(2, layout.nz())};
}

ThetaN unpack_n(const VectorXd& theta_n, const ParamLayout& layout) {
  require(theta_n.size() == layout.dim(), "unpack_n: layout mismatch");
  ThetaN out;
  out.rho_n = theta_n(0);
  out.sigma_v_n_sq = theta_n(1);
  out.zeta_n = theta_n.segment(2, layout.nz());
  if (layout.model == Model::re) out.pi_n = theta_n(layout.pi_index());
  return out;
}

VectorXd theta_from_n(const VectorXd& theta_n, const ParamLayout& layout) {
  require(theta_n.size() == layout.dim(), "theta_from_n: dimension mismatch");
  const double r = theta_n(0);
  require(r > 0.0, "theta_from_n: r_n must be positive");
  const double sv_n = theta_n(1);
  const double z2 = theta_n(2);
  VectorXd theta(layout.dim());
  theta(0) = r;
  theta(1) = r * z2 * (sv_n + 1.0 - r);
  theta.segment(2, layout.nz()) = r * theta_n.segment(2, layout.nz());
  if (layout.model == Model::re) theta(layout.pi_index()) = theta_n(layout.pi_index()) + 1.0 - r;
  return theta;
}

VectorXd theta_to_n(const VectorXd& theta, const ParamLayout& layout) {
  require(theta.size() == layout.dim(), "theta_to_n: dimension mismatch");
  const double rho = theta(0);
  require(rho > 0.0, "theta_to_n: rho must be positive");
  const double zeta2 = theta(2);
  require(zeta2 != 0.0, "theta_to_n: zeta_2 must be nonzero");
  VectorXd tn(layout.dim());
  tn(0) = rho;
  tn(1) = theta(1) / zeta2 - (1.0 - rho);
  tn.segment(2, layout.nz()) = theta.segment(2, layout.nz()) / rho;
  if (layout.model == Model::re) tn(layout.pi_index()) = theta(layout.pi_index()) - (1.0 - rho);
  return tn;
}

MatrixXd map_jacobian(const VectorXd& theta_n, const ParamLayout& layout) {
  const int dim = layout.dim();
  require(theta_n.size() == dim, "map_jacobian: dimension mismatch");
  const double r = theta_n(0);
  const double sv_n = theta_n(1);
  const double z2 = theta_n(2);
  MatrixXd jac = MatrixXd::Zero(dim, dim);
  jac(0, 0) = 1.0;
  jac(1, 0) = z2 * (sv_n + 1.0 - 2.0 * r);
  jac(1, 1) = r * z2;
  jac(1, 2) = r * (sv_n + 1.0 - r);
  for (int j = 0; j < layout.nz(); ++j) {
    jac(2 + j, 0) = theta_n(2 + j);
    jac(2 + j, 2 + j) += r;
  }
  if (layout.model == Model::re) {
    jac(layout.pi_index(), 0) = -1.0;
    jac(layout.pi_index(), layout.pi_index()) = 1.0;
  }
  return jac;
}

MatrixXd map_second_derivative(const VectorXd& theta_n, const ParamLayout& layout, int k) {
  const int dim = layout.dim();
  require(theta_n.size() == dim && k >= 0 && k < dim, "map_second_derivative: bad arguments");
  const double r = theta_n(0);
  const double sv_n = theta_n(1);
  const double z2 = theta_n(2);
  MatrixXd d2 = MatrixXd::Zero(dim, dim);
  if (k == 1) {
    d2(0, 0) = -2.0 * z2;
    d2(0, 1) = d2(1, 0) = z2;
    d2(0, 2) += sv_n + 1.0 - 2.0 * r;
    d2(2, 0) += sv_n + 1.0 - 2.0 * r;
    d2(1, 2) = d2(2, 1) = r;
  } else if (k >= 2 && k < 2 + layout.nz()) {
    d2(0, k) = d2(k, 0) = 1.0;
  }
  return d2;
}

// ---------------------------------------------------------------------------

struct Likelihood::Workspace {
  bool pd = false;
  MatrixXd phi_inv;
  double logdet_phi = 0.0;
  // Per variance parameter k: B_k = Phi^{-1} dPhi_k Phi^{-1} and the trace
  // tr(Phi^{-1} dPhi_k); dPhi_k is ones*ones' for sv2, e_j e_j' or I for zeta.
  std::vector<MatrixXd> b;       // nv entries
  std::vector<double> tr_pinv_dphi;
  // tr(Phi^{-1} dPhi_l Phi^{-1} dPhi_k) for the variance-variance block.
  MatrixXd tr_bb;
};

Likelihood::Likelihood(const PanelData& data, Model model, VarianceMode mode) {
  require(data.t_len() >= 3, "Likelihood: need T >= 3");
  require(data.n() >= 1, "Likelihood: empty panel");
  layout_ = ParamLayout{model, mode, data.t_len()};
  n_ = data.n();
  const int m = data.t_len() - 1;
  y_ = data.y.rightCols(m);
  ylag_ = data.y.leftCols(m);
  y1_ = data.y.col(0);
  ytil_ = y_.colwise() - y1_;
  ytil_lag_ = ylag_.colwise() - y1_;
  y1_sq_mean_ = y1_.squaredNorm() / n_;
}

Likelihood::Workspace Likelihood::make_workspace(const VectorXd& theta) const {
  require(theta.size() == layout_.dim(), "Likelihood: parameter dimension mismatch");
  const int m = layout_.t_len - 1;
  const double sv2 = theta(1);

  MatrixXd phi = MatrixXd::Constant(m, m, sv2);
  if (layout_.mode == VarianceMode::tsh) {
    phi.diagonal().array() += theta(2);
  } else {
    phi.diagonal() += theta.segment(2, m);
  }

  Workspace ws;
  Eigen::LLT<MatrixXd> llt(phi);
  if (llt.info() != Eigen::Success) {
    ws.pd = false;
    return ws;
  }
  ws.pd = true;
  const MatrixXd l = llt.matrixL();
  ws.logdet_phi = 2.0 * l.diagonal().array().log().sum();
  ws.phi_inv = llt.solve(MatrixXd::Identity(m, m));

  const int nv = 1 + layout_.nz();
  ws.b.resize(nv);
  ws.tr_pinv_dphi.resize(nv);
  // k = 0 is sv2 with dPhi = ones*ones'; k >= 1 are the zeta entries.
  const VectorXd pinv_ones = ws.phi_inv.rowwise().sum();
  ws.b[0] = pinv_ones * pinv_ones.transpose();
  ws.tr_pinv_dphi[0] = pinv_ones.sum();
  if (layout_.mode == VarianceMode::tsh) {
    ws.b[1] = ws.phi_inv * ws.phi_inv;
    ws.tr_pinv_dphi[1] = ws.phi_inv.trace();
  } else {
    for (int j = 0; j < m; ++j) {
      ws.b[1 + j] = ws.phi_inv.col(j) * ws.phi_inv.row(j);
      ws.tr_pinv_dphi[1 + j] = ws.phi_inv(j, j);
    }
  }
  ws.tr_bb.resize(nv, nv);
  for (int k = 0; k < nv; ++k)
    for (int l2 = k; l2 < nv; ++l2) {
      // tr(B_k dPhi_l): dPhi_l is ones*ones' (l=0), I, or e_j e_j'.
      double tr = 0.0;
      if (l2 == 0)
        tr = ws.b[k].sum();
      else if (layout_.mode == VarianceMode::tsh)
        tr = ws.b[k].trace();
      else
        tr = ws.b[k](l2 - 1, l2 - 1);
      ws.tr_bb(k, l2) = tr;
      ws.tr_bb(l2, k) = tr;
    }
  return ws;
}

MatrixXd Likelihood::residuals(const VectorXd& theta) const {
  const double rho = theta(0);
  if (layout_.model == Model::fe) return ytil_ - rho * ytil_lag_;
  const double pi = theta(layout_.pi_index());
  return (y_ - rho * ylag_).colwise() - pi * y1_.array().matrix();
}

double Likelihood::loglik(const VectorXd& theta) const {
  const Workspace ws = make_workspace(theta);
  if (!ws.pd) return -std::numeric_limits<double>::infinity();
  const MatrixXd u = residuals(theta);
  const int m = layout_.t_len - 1;
  const double quad = (u * ws.phi_inv).cwiseProduct(u).sum();
  return -0.5 * n_ * (m * kLogTwoPi + ws.logdet_phi) - 0.5 * quad;
}

MatrixXd Likelihood::per_individual_scores(const VectorXd& theta) const {
  const Workspace ws = make_workspace(theta);
  if (!ws.pd) throw std::domain_error("Likelihood: covariance not positive definite");
  const MatrixXd u = residuals(theta);
  const MatrixXd upinv = u * ws.phi_inv;  // N x m
  const int dim = layout_.dim();
  const int nv = 1 + layout_.nz();
  MatrixXd s(n_, dim);

  // d u / d rho = -x_rho: FE uses ytil_lag, RE uses ylag.
  const MatrixXd& x_rho = (layout_.model == Model::fe) ? ytil_lag_ : ylag_;
  s.col(0) = (upinv.cwiseProduct(x_rho)).rowwise().sum();
  for (int k = 0; k < nv; ++k) {
    const MatrixXd ub = u * ws.b[k];
    VectorXd col = 0.5 * (ub.cwiseProduct(u)).rowwise().sum();
    col.array() -= 0.5 * ws.tr_pinv_dphi[k];
    s.col(1 + k) = col;
  }
  if (layout_.model == Model::re) {
    // x_pi = y1 * ones, so the score is y1 * (row sums of u Phi^{-1}).
    s.col(layout_.pi_index()) = upinv.rowwise().sum().cwiseProduct(y1_);
  }
  return s;
}

VectorXd Likelihood::score(const VectorXd& theta) const {
  return per_individual_scores(theta).colwise().sum();
}

MatrixXd Likelihood::observed_hessian(const VectorXd& theta) const {
  const Workspace ws = make_workspace(theta);
  if (!ws.pd) throw std::domain_error("Likelihood: covariance not positive definite");
  const MatrixXd u = residuals(theta);
  const int dim = layout_.dim();
  const int nv = 1 + layout_.nz();
  const MatrixXd& x_rho = (layout_.model == Model::fe) ? ytil_lag_ : ylag_;

  MatrixXd h = MatrixXd::Zero(dim, dim);
  const MatrixXd upinv = u * ws.phi_inv;
  h(0, 0) = -(x_rho * ws.phi_inv).cwiseProduct(x_rho).sum();
  for (int k = 0; k < nv; ++k) {
    const MatrixXd ub = u * ws.b[k];
    h(0, 1 + k) = h(1 + k, 0) = -ub.cwiseProduct(x_rho).sum();
    for (int l2 = k; l2 < nv; ++l2) {
      // -1/2 u'(B_l dPhi_k Phi^{-1} + Phi^{-1} dPhi_k B_l)u summed over i,
      // computed as -(u B_l) dPhi_k (Phi^{-1} u) with the symmetrization
      // implicit in the trace form; dPhi_k contraction handled per mode.
      const MatrixXd ubl = u * ws.b[l2];
      double cross = 0.0;
      if (k == 0) {
        cross = (ubl.rowwise().sum().cwiseProduct(upinv.rowwise().sum())).sum();
      } else if (layout_.mode == VarianceMode::tsh) {
        cross = ubl.cwiseProduct(upinv).sum();
      } else {
        cross = (ubl.col(k - 1).cwiseProduct(upinv.col(k - 1))).sum();
      }
      const double val = 0.5 * n_ * ws.tr_bb(k, l2) - cross;
      h(1 + k, 1 + l2) = val;
      h(1 + l2, 1 + k) = val;
    }
  }
  if (layout_.model == Model::re) {
    const int pi = layout_.pi_index();
    const VectorXd pinv_ones = ws.phi_inv.rowwise().sum();
    h(pi, pi) = -y1_sq_mean_ * n_ * pinv_ones.sum();
    h(0, pi) = h(pi, 0) = -((x_rho * pinv_ones).cwiseProduct(y1_)).sum();
    for (int k = 0; k < nv; ++k) {
      const VectorXd b_ones = ws.b[k].rowwise().sum();
      const double val = -((u * b_ones).cwiseProduct(y1_)).sum();
      h(1 + k, pi) = h(pi, 1 + k) = val;
    }
  }
  return h;
}

double Likelihood::loglik_n(const VectorXd& theta_n) const {
  return loglik(theta_from_n(theta_n, layout_));
}

MatrixXd Likelihood::per_individual_scores_n(const VectorXd& theta_n) const {
  const MatrixXd jac = map_jacobian(theta_n, layout_);
  return per_individual_scores(theta_from_n(theta_n, layout_)) * jac;
}

VectorXd Likelihood::score_n(const VectorXd& theta_n) const {
  return per_individual_scores_n(theta_n).colwise().sum();
}

MatrixXd Likelihood::observed_hessian_n(const VectorXd& theta_n) const {
  const VectorXd theta = theta_from_n(theta_n, layout_);
  const MatrixXd jac = map_jacobian(theta_n, layout_);
  const VectorXd g = score(theta);
  MatrixXd h = jac.transpose() * observed_hessian(theta) * jac;
  for (int k = 0; k < layout_.dim(); ++k) {
    if (g(k) != 0.0) h += g(k) * map_second_derivative(theta_n, layout_, k);
  }
  return h;
}

VectorXd Likelihood::per_individual_rr_n(const VectorXd& theta_n) const {
  // d^2 l_{n,i}/d r_n^2 = j_r' H_i j_r + g_i' (d^2 theta / d r_n^2), where
  // only the sv2 and zeta components of the map have curvature in r_n.
  const VectorXd theta = theta_from_n(theta_n, layout_);
  const Workspace ws = make_workspace(theta);
  if (!ws.pd) throw std::domain_error("Likelihood: covariance not positive definite");
  const MatrixXd jac = map_jacobian(theta_n, layout_);
  const VectorXd jr = jac.col(0);
  const MatrixXd u = residuals(theta);
  const MatrixXd& x_rho = (layout_.model == Model::fe) ? ytil_lag_ : ylag_;
  const int nv = 1 + layout_.nz();
  const int dim = layout_.dim();

  VectorXd d2map(dim);
  for (int k = 0; k < dim; ++k) d2map(k) = map_second_derivative(theta_n, layout_, k)(0, 0);
  const MatrixXd g = per_individual_scores(theta);

  VectorXd out = g * d2map;

  // Quadratic form jr' H_i jr assembled from the same pieces as the Hessian,
  // individual by individual.
  const MatrixXd upinv = u * ws.phi_inv;
  const MatrixXd xpinv = x_rho * ws.phi_inv;
  out.array() += jr(0) * jr(0) * (-(xpinv.cwiseProduct(x_rho)).rowwise().sum().array());
  for (int k = 0; k < nv; ++k) {
    const MatrixXd ub = u * ws.b[k];
    out.array() += 2.0 * jr(0) * jr(1 + k) * (-(ub.cwiseProduct(x_rho)).rowwise().sum().array());
    for (int l2 = 0; l2 < nv; ++l2) {
      const MatrixXd ubl = u * ws.b[l2];
      Eigen::ArrayXd cross(n_);
      if (k == 0)
        cross = ubl.rowwise().sum().array() * upinv.rowwise().sum().array();
      else if (layout_.mode == VarianceMode::tsh)
        cross = (ubl.cwiseProduct(upinv)).rowwise().sum().array();
      else
        cross = ubl.col(k - 1).array() * upinv.col(k - 1).array();
      out.array() += jr(1 + k) * jr(1 + l2) * (0.5 * ws.tr_bb(k, l2) - cross);
    }
  }
  if (layout_.model == Model::re) {
    const int pi = layout_.pi_index();
    const VectorXd pinv_ones = ws.phi_inv.rowwise().sum();
    out.array() -= jr(pi) * jr(pi) * pinv_ones.sum() * y1_.array().square();
    out.array() += 2.0 * jr(0) * jr(pi) * (-(x_rho * pinv_ones).array() * y1_.array());
    for (int k = 0; k < nv; ++k) {
      const VectorXd b_ones = ws.b[k].rowwise().sum();
      out.array() += 2.0 * jr(1 + k) * jr(pi) * (-(u * b_ones).array() * y1_.array());
    }
  }
  return out;
}

MatrixXd Likelihood::opg_n(const VectorXd& theta_n, bool centered) const {
  const MatrixXd s = per_individual_scores_n(theta_n);
  if (!centered) return s.transpose() * s / n_;
  const Eigen::RowVectorXd mean = s.colwise().mean();
  const MatrixXd sc = s.rowwise() - mean;
  return sc.transpose() * sc / n_;
}

FeFactorizedParts fe_factorized_loglik(const PanelData& data, const VectorXd& theta,
                                       VarianceMode mode) {
  const int t_len = data.t_len();
  require(t_len >= 3, "fe_factorized_loglik: need T >= 3");
  const int m = t_len - 1;
  const int n = data.n();
  const ParamLayout layout{Model::fe, mode, t_len};
  require(theta.size() == layout.dim(), "fe_factorized_loglik: parameter dimension mismatch");

  const double rho = theta(0);
  const double sv2 = theta(1);
  VectorXd psi_diag;
  if (mode == VarianceMode::tsh)
    psi_diag = VectorXd::Constant(m, theta(2));
  else
    psi_diag = theta.segment(2, m);
  require((psi_diag.array() > 0.0).all(), "fe_factorized_loglik: Psi must be positive definite");

  // First-difference matrix D and the Psi-weighted mean functional d.
  MatrixXd d_mat = MatrixXd::Zero(m - 1, m);
  for (int k = 0; k < m - 1; ++k) {
    d_mat(k, k) = -1.0;
    d_mat(k, k + 1) = 1.0;
  }
  const VectorXd psi_inv_ones = psi_diag.cwiseInverse();
  const double denom = psi_inv_ones.sum();
  const VectorXd d_vec = psi_inv_ones / denom;
  const double sigma_u_sq = 1.0 / denom + sv2;
  require(sigma_u_sq > 0.0, "fe_factorized_loglik: sigma_u^2 must be positive");

  const MatrixXd dpsid = d_mat * psi_diag.asDiagonal() * d_mat.transpose();
  Eigen::LLT<MatrixXd> llt(dpsid);
  require(llt.info() == Eigen::Success, "fe_factorized_loglik: D Psi D' not positive definite");
  const MatrixXd l = llt.matrixL();
  const double logdet = 2.0 * l.diagonal().array().log().sum();

  const MatrixXd ytil = data.y.rightCols(m).colwise() - data.y.col(0);
  const MatrixXd ytil_lag = data.y.leftCols(m).colwise() - data.y.col(0);
  const MatrixXd w = ytil - rho * ytil_lag;

  FeFactorizedParts out;
  out.sigma_u_sq = sigma_u_sq;
  const MatrixXd dw = w * d_mat.transpose();
  const MatrixXd solved = llt.solve(dw.transpose());
  const double quad_diff = dw.cwiseProduct(solved.transpose()).sum();
  out.diff_part = -0.5 * n * ((m - 1) * kLogTwoPi + logdet) - 0.5 * quad_diff;

  const VectorXd dwm = w * d_vec;
  out.mean_part = -0.5 * n * (kLogTwoPi + std::log(sigma_u_sq)) -
                  0.5 * dwm.squaredNorm() / sigma_u_sq;
  out.dl_dsigma_u_sq =
      -0.5 * n / sigma_u_sq + 0.5 * dwm.squaredNorm() / (sigma_u_sq * sigma_u_sq);
  return out;
}

}  // namespace panelqlm
