#include "panelqlm/power.hpp"

#include <cmath>
#include <stdexcept>

#include "panelqlm/chi2.hpp"
#include "panelqlm/expected.hpp"
#include "panelqlm/matrixkit.hpp"

namespace panelqlm {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// W = 2 P D_u^+ (G (x) G) (D_u^+)' P' and c1 = P vech(diag(1, e^2, ..., e^2))
// at matrix dimension n = T - 1.
void moment_limit_pieces(int t_len, double e, MatrixXd* w, VectorXd* c1) {
  const int n = t_len - 1;
  const MatrixXd g = tridiag(n, 1.0, 2.0, -1.0);
  const DuplicationPair du = duplication(n);
  const SelectorP sel = selector_p(n);
  *w = 2.0 * sel.sel * du.dup_pinv * kron(g, g) * du.dup_pinv.transpose() *
       sel.sel.transpose();
  VectorXd diag = VectorXd::Constant(n, e * e);
  diag(0) = 1.0;
  *c1 = sel.sel * vech(MatrixXd(diag.asDiagonal()));
}

double sandwich_delta(const VectorXd& c, const MatrixXd& h, const MatrixXd& j) {
  // c' H^{-1} A' (A H^{-1} J H^{-1} A')^{-1} A H^{-1} c with A = e_1'.
  const VectorXd hc = h.fullPivLu().solve(c);
  const MatrixXd hj = h.fullPivLu().solve(j);
  const MatrixXd hjh = h.fullPivLu().solve(hj.transpose()).transpose();
  return hc(0) * hc(0) / hjh(0, 0);
}

}  // namespace

double delta_qlm_tsh(int t_len, double e) {
  require(t_len >= 4, "delta_qlm_tsh: T must be >= 4");
  require(e > 0.0, "delta_qlm_tsh: e must be positive");
  const double t = t_len;
  return e * e * e * e * (2.0 * t - 3.0) * t * (t - 1.0) * (t - 2.0) / 72.0;
}

SingularDriftIngredients singular_drift_ingredients(int t_len) {
  require(t_len >= 3, "singular_drift_ingredients: T must be >= 3");
  const double t = t_len;
  SingularDriftIngredients out;
  out.c3 << t * (t - 1.0) * (t * t - t + 1.0) / 6.0,
      t * (2.0 * t - 1.0) * (t - 1.0) / 12.0, t * (t - 1.0) / 4.0;

  const double off_rv = t * (2.0 * t * t - 3.0 * t + 1.0) / 6.0;
  const double off_rs = t * (t - 1.0) / 2.0;
  const double vv = (t - 1.0) * (t - 1.0) / 2.0;
  const double vs = (t - 1.0) / 2.0;
  out.sh << t * (t - 1.0) * (t * t - t + 1.0) / 2.0, off_rv, off_rs,
      off_rv, vv, vs,
      off_rs, vs, vs;
  out.sj = out.sh;
  out.sj(0, 0) = t * (t - 1.0) * (t * t - t + 1.0) / 3.0;
  return out;
}

Eigen::Matrix3d singular_scaling(double phi, double sigma_sq) {
  require(phi > 0.0, "singular_scaling: phi must be positive");
  Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
  s(0, 0) = 1.0 / phi;
  s(1, 1) = 1.0;
  s(2, 2) = sigma_sq;
  return s;
}

double delta_from_drift_ingredients(int t_len) {
  require(t_len >= 4, "delta_from_drift_ingredients: T must be >= 4");
  const SingularDriftIngredients in = singular_drift_ingredients(t_len);
  return sandwich_delta(in.c3, in.sh, in.sj);
}

double delta_gmm_quadratic_form(int t_len, double e) {
  require(t_len >= 4, "delta_gmm_quadratic_form: T must be >= 4");
  MatrixXd w;
  VectorXd c1;
  moment_limit_pieces(t_len, e, &w, &c1);
  return c1.dot(w.ldlt().solve(c1));
}

double delta_map_eigenvalue(int t_len, double e) {
  require(t_len >= 4, "delta_map_eigenvalue: T must be >= 4");
  MatrixXd w;
  VectorXd c1;
  moment_limit_pieces(t_len, e, &w, &c1);
  // Whiten: with W = 2 L L', the roots of |2 lambda W/2... | reduce to the
  // eigenvalues of L^{-1} c1 c1' L^{-T} where L is the Cholesky factor of W.
  const Eigen::LLT<MatrixXd> llt(w);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("delta_map_eigenvalue: weight matrix not positive definite");
  const VectorXd z = llt.matrixL().solve(c1);
  const MatrixXd b = z * z.transpose();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(b);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("delta_map_eigenvalue: eigensolver failed");
  return es.eigenvalues().maxCoeff();
}

double delta_sandwich_general(int t_len, double theta_star_sigma_sq) {
  require(t_len >= 4, "delta_sandwich_general: T must be >= 4");
  require(theta_star_sigma_sq > 0.0, "delta_sandwich_general: scale must be positive");
  const double t = t_len;
  const double s2 = theta_star_sigma_sq;
  const int dim = t_len + 1;  // (r_n, sv_n, zeta_n ...) without equal variances

  // Drift vector: limits of sqrt(N) times the scaled expected score at the
  // local sequence, e = 1. The variance-direction components follow from the
  // exact unit-root identity ones*ones' = I + P + P', which cancels the
  // first-order term and leaves (1/2) phi^2 (P P' + ones ones') on the
  // diagonal, i.e. k/2 for the k-th period; the pattern is verified against
  // a Monte Carlo of the per-individual scores in the test suite.
  VectorXd c(dim);
  c(0) = t * (t - 1.0) * (t * t - t + 1.0) / 6.0;
  c(1) = t * (2.0 * t - 1.0) * (t - 1.0) / 12.0;
  for (int j = 1; j <= t_len - 1; ++j) c(1 + j) = 0.5 * j / s2;

  // Scaled limits of the expected Hessian (self-expectation at the local
  // parameter) and of the per-individual score covariance under the
  // singular-point truth, extrapolated phi -> 0.
  const ExpectedLikelihood ex(Model::fe, VarianceMode::th, t_len);
  VectorXd theta_star_n(dim);
  theta_star_n(0) = 1.0;
  theta_star_n(1) = 0.0;
  theta_star_n.segment(2, t_len - 1).setConstant(s2);

  auto scaled_pair = [&](double phi, MatrixXd* sh, MatrixXd* sj) {
    VectorXd tn = theta_star_n;
    tn(0) = 1.0 - phi;
    VectorXd scale = VectorXd::Ones(dim);
    scale(0) = 1.0 / phi;
    const MatrixXd h = ex.hessian_n(tn);
    const MatrixXd j = ex.score_cov_n(tn, theta_star_n);
    *sh = scale.asDiagonal() * h * scale.asDiagonal();
    *sj = scale.asDiagonal() * j * scale.asDiagonal();
  };
  MatrixXd sh1, sj1, sh2, sj2, sh3, sj3;
  scaled_pair(0.02, &sh1, &sj1);
  scaled_pair(0.01, &sh2, &sj2);
  scaled_pair(0.005, &sh3, &sj3);
  // Two Richardson levels in phi.
  const MatrixXd sh = (8.0 * sh3 - 6.0 * sh2 + sh1) / 3.0;
  const MatrixXd sj = (8.0 * sj3 - 6.0 * sj2 + sj1) / 3.0;
  return sandwich_delta(c, sh, sj);
}

namespace {

PowerCurve power_curve(int t_len, const VectorXd& e_grid, int df, const char* variant) {
  PowerCurve out;
  out.t_len = t_len;
  out.variant = variant;
  const double crit = chi2_quantile(df, 0.95);
  for (Eigen::Index k = 0; k < e_grid.size(); ++k) {
    PowerCurvePoint pt;
    pt.e = e_grid(k);
    pt.delta = delta_qlm_tsh(t_len, pt.e);
    pt.df = df;
    pt.power = noncentral_chi2_sf(crit, df, pt.delta);
    out.points.push_back(pt);
  }
  return out;
}

}  // namespace

PowerCurve qlm_c_power_curve(int t_len, const VectorXd& e_grid) {
  return power_curve(t_len, e_grid, 1, "qlm_c_tsh");
}

PowerCurve gmm_ar_power_curve(int t_len, const VectorXd& e_grid) {
  require(t_len >= 4, "gmm_ar_power_curve: T must be >= 4");
  const int p = t_len * (t_len - 1) / 2 - 2;
  return power_curve(t_len, e_grid, p, "gmm_ar");
}

PowerCurve map_power_curve(int t_len, const VectorXd& e_grid) {
  PowerCurve out = power_curve(t_len, e_grid, 1, "map");
  // Confirm the eigenvalue route reproduces each noncentrality.
  for (auto& pt : out.points) {
    const double lam = delta_map_eigenvalue(t_len, pt.e);
    if (std::abs(lam - pt.delta) > 1e-8 * std::max(1.0, pt.delta))
      throw std::runtime_error("map_power_curve: eigenvalue route disagrees");
  }
  return out;
}

std::vector<VerificationCheck> verify_constants(int t_lo, int t_hi) {
  require(t_lo >= 2 && t_hi >= t_lo, "verify_constants: bad T range");
  std::vector<VerificationCheck> checks;
  auto add = [&](const std::string& name, bool pass, double err) {
    checks.push_back({name, pass, err});
  };

  for (int t = t_lo; t <= t_hi; ++t) {
    add("tridiagonal-inverse T=" + std::to_string(t), identities::check_gt_inverse(t), 0.0);
    add("gh-identity T=" + std::to_string(t), identities::check_gh_identity(t), 0.0);
    add("ga-identity T=" + std::to_string(t), identities::check_ga_identity(t), 0.0);
    add("duplication-inverse T=" + std::to_string(t), identities::check_proposition_m_inverse(t),
        0.0);
  }
  for (int t = std::max(2, t_lo); t <= std::min(10, t_hi); ++t) {
    add("selector-image T=" + std::to_string(t), identities::check_pbar_image(t), 0.0);
    add("kron-quadratic-form T=" + std::to_string(t), identities::check_quadratic_form(t), 0.0);
    const double want = (2.0 * t - 1.0) * (t + 1.0) * t * (t - 1.0) / 72.0;
    const double got = identities::selector_quadratic_form(t);
    add("selector-quadratic-form T=" + std::to_string(t), std::abs(got - want) < 1e-9 * want,
        std::abs(got - want));
  }
  for (int t = std::max(3, t_lo); t <= t_hi; ++t) {
    const TraceIdentities tr = trace_identities(t);
    const double td = t;
    const double want[8] = {
        (td - 2.0) * td / 6.0,
        -(td - 2.0) / 2.0,
        (td - 2.0) * (td - 1.0) * (2.0 * td - 3.0) / 6.0,
        (td - 2.0) * (td - 1.0) / 2.0,
        (td - 2.0) * (td - 1.0) / 2.0,
        (td - 2.0) * (td - 1.0) * (td * td - 3.0 * td + 3.0) / 6.0,
        -(td - 2.0) * (td - 6.0) / 12.0,
        -(td - 2.0) * td * (td + 1.0) / 24.0,
    };
    const double got[8] = {tr.tr_ptqp, tr.tr_qp,     tr.ones_ptp, tr.ones_p,
                           tr.tr_ptp,  tr.tr_ptpptp, tr.tr_qpqp,  tr.tr_ptpqp};
    double worst = 0.0;
    for (int k = 0; k < 8; ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
    add("trace-identities T=" + std::to_string(t), worst < 1e-12 * (1.0 + td * td * td), worst);
  }
  for (int t = std::max(4, t_lo); t <= std::min(10, t_hi); ++t) {
    const double want = delta_qlm_tsh(t, 1.0);
    const double d1 = delta_from_drift_ingredients(t);
    const double d2 = delta_gmm_quadratic_form(t, 1.0);
    const double d3 = delta_map_eigenvalue(t, 1.0);
    const double worst =
        std::max({std::abs(d1 - want), std::abs(d2 - want), std::abs(d3 - want)});
    add("delta-three-way T=" + std::to_string(t), worst < 1e-10 * std::max(1.0, want), worst);
  }
  return checks;
}

}  // namespace panelqlm
