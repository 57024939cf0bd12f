#include "panelqlm/inference.hpp"

#include <cmath>
#include <stdexcept>

#include "panelqlm/chi2.hpp"
#include "panelqlm/matrixkit.hpp"

namespace panelqlm {

namespace {

MatrixXd adjugate(const MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  MatrixXd adj(n, n);
  MatrixXd minor(n - 1, n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      int rr = 0;
      for (int r = 0; r < n; ++r) {
        if (r == i) continue;
        int cc = 0;
        for (int c = 0; c < n; ++c) {
          if (c == j) continue;
          minor(rr, cc++) = m(r, c);
        }
        ++rr;
      }
      const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      adj(j, i) = sign * minor.determinant();
    }
  return adj;
}

MatrixXd average_opg(const MatrixXd& per_individual, bool centered) {
  const int n = static_cast<int>(per_individual.rows());
  if (!centered) return per_individual.transpose() * per_individual / n;
  const Eigen::RowVectorXd mean = per_individual.colwise().mean();
  const MatrixXd sc = per_individual.rowwise() - mean;
  return sc.transpose() * sc / n;
}

TestResult finish(TestVariant variant, double statistic, int df, FitResult fit) {
  TestResult out;
  out.variant = variant;
  out.statistic = statistic;
  out.df = df;
  out.p_value = chi2_sf(statistic, df);
  out.restricted_fit = std::move(fit);
  return out;
}

bool pins_rho_at(const MatrixXd& a_mat, const VectorXd& a_vec, double value) {
  // Detects whether A theta_n = a forces r_n = value: e_1 must lie in the
  // row space and the corresponding combination must equal value.
  const int dim = static_cast<int>(a_mat.cols());
  VectorXd e1 = VectorXd::Zero(dim);
  e1(0) = 1.0;
  const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(a_mat.transpose());
  const VectorXd w = cod.solve(e1);
  if ((a_mat.transpose() * w - e1).lpNorm<Eigen::Infinity>() > 1e-10) return false;
  return std::abs(w.dot(a_vec) - value) < 1e-12;
}

std::optional<double> implied_rho(const MatrixXd& a_mat, const VectorXd& a_vec) {
  const int dim = static_cast<int>(a_mat.cols());
  VectorXd e1 = VectorXd::Zero(dim);
  e1(0) = 1.0;
  const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(a_mat.transpose());
  const VectorXd w = cod.solve(e1);
  if ((a_mat.transpose() * w - e1).lpNorm<Eigen::Infinity>() > 1e-10) return std::nullopt;
  return w.dot(a_vec);
}

}  // namespace

const char* to_string(TestVariant v) {
  switch (v) {
    case TestVariant::qlm: return "qlm";
    case TestVariant::qlm1: return "qlm1";
    case TestVariant::qlm_c: return "qlm_c";
    case TestVariant::gmm_ar: return "gmm_ar";
  }
  return "?";
}

double sandwich_statistic(const VectorXd& score_total, const MatrixXd& h_avg,
                          const MatrixXd& j_avg, const MatrixXd& a_mat, int n,
                          bool use_adjugate) {
  const MatrixXd hin = use_adjugate ? adjugate(h_avg) : h_avg.inverse();
  const VectorXd hs = hin * score_total;
  const VectorXd ahs = a_mat * hs;
  const MatrixXd mid = a_mat * hin * j_avg * hin.transpose() * a_mat.transpose();
  const Eigen::LDLT<MatrixXd> ldlt(mid);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("sandwich_statistic: singular middle matrix");
  return ahs.dot(ldlt.solve(ahs)) / n;
}

TestResult qlm_test_rho(const PanelData& data, Model model, double a, const TestOptions& opts) {
  if (!(a > -1.0 && a < 1.0)) {
    if (a == 1.0)
      throw UnitRootHypothesisError(
          "qlm_test: the rho-score degenerates at rho = 1; use qlm1_test");
    throw std::invalid_argument("qlm_test: hypothesized rho must be in (-1, 1)");
  }
  const Likelihood lik(data, model, opts.mode);
  FitResult fr = fit_restricted_rho(lik, a, opts.fit);
  if (!fr.converged) throw std::runtime_error("qlm_test: restricted fit failed");

  const VectorXd score_total = lik.score(fr.theta);
  const MatrixXd h = expected_hessian(lik, fr.theta);
  const MatrixXd j = average_opg(lik.per_individual_scores(fr.theta), opts.centered_opg);
  MatrixXd a_mat = MatrixXd::Zero(1, lik.layout().dim());
  a_mat(0, 0) = 1.0;
  const double stat = sandwich_statistic(score_total, h, j, a_mat, lik.n());
  return finish(opts.centered_opg ? TestVariant::qlm_c : TestVariant::qlm, stat, 1,
                std::move(fr));
}

TestResult qlm_test(const PanelData& data, Model model, const MatrixXd& a_mat,
                    const VectorXd& a_vec, const TestOptions& opts) {
  const Likelihood lik(data, model, opts.mode);
  const int dim = lik.layout().dim();
  if (a_mat.cols() != dim || a_vec.size() != a_mat.rows())
    throw std::invalid_argument("qlm_test: restriction dimensions do not match the model");
  if (pins_rho_at(a_mat, a_vec, 1.0))
    throw UnitRootHypothesisError(
        "qlm_test: the hypothesis pins rho = 1; use qlm1_test");

  // Scalar rho restriction goes through the structural-coordinate path.
  if (a_mat.rows() == 1 && std::abs(a_mat(0, 0)) > 0.0 &&
      a_mat.row(0).tail(dim - 1).lpNorm<Eigen::Infinity>() == 0.0)
    return qlm_test_rho(data, model, a_vec(0) / a_mat(0, 0), opts);

  Restriction restr{a_mat, a_vec};
  FitResult fr = fit(lik, restr, opts.fit);
  if (!fr.converged && !std::isfinite(fr.loglik))
    throw std::runtime_error("qlm_test: restricted fit failed");

  const VectorXd score_total = lik.score_n(fr.theta_n);
  const MatrixXd h = expected_hessian_n(lik, fr.theta_n);
  const MatrixXd j = average_opg(lik.per_individual_scores_n(fr.theta_n), opts.centered_opg);
  const double stat = sandwich_statistic(score_total, h, j, a_mat, lik.n());
  return finish(TestVariant::qlm, stat, static_cast<int>(a_mat.rows()), std::move(fr));
}

TestResult qlm1_test(const PanelData& data, Model model, const MatrixXd& a_mat,
                     const VectorXd& a_vec, const TestOptions& opts) {
  const Likelihood lik(data, model, opts.mode);
  const int dim = lik.layout().dim();
  if (a_mat.cols() != dim || a_vec.size() != a_mat.rows())
    throw std::invalid_argument("qlm1_test: restriction dimensions do not match the model");
  const auto rho0 = implied_rho(a_mat, a_vec);
  if (!rho0 || std::abs(*rho0 - 1.0) > 1e-12)
    throw std::invalid_argument("qlm1_test: the hypothesis must pin rho = 1");

  FitResult fr;
  if (a_mat.rows() == 1) {
    fr = fit_restricted_rho(lik, 1.0, opts.fit);
  } else {
    Restriction restr{a_mat, a_vec};
    fr = fit(lik, restr, opts.fit);
  }
  if (!fr.converged && !std::isfinite(fr.loglik))
    throw std::runtime_error("qlm1_test: restricted fit failed");
  if (fr.theta_n.size() == 0)
    throw std::runtime_error("qlm1_test: restricted estimate has no n-coordinates");

  const SingularPointDerivatives sd = singular_derivatives(lik, fr.theta_n);
  MatrixXd s_all(lik.n(), dim);
  s_all.col(0) = sd.s1;
  s_all.rightCols(dim - 1) = sd.s2;
  const VectorXd s_total = s_all.colwise().sum();
  const MatrixXd j = average_opg(s_all, opts.centered_opg);
  const double stat = sandwich_statistic(s_total, sd.htilde, j, a_mat, lik.n());
  return finish(TestVariant::qlm1, stat, static_cast<int>(a_mat.rows()), std::move(fr));
}

TestResult qlm1_test_rho(const PanelData& data, Model model, const TestOptions& opts) {
  const ParamLayout layout{model, opts.mode, data.t_len()};
  MatrixXd a_mat = MatrixXd::Zero(1, layout.dim());
  a_mat(0, 0) = 1.0;
  VectorXd a_vec(1);
  a_vec(0) = 1.0;
  return qlm1_test(data, model, a_mat, a_vec, opts);
}

TestResult qlm_c_test(const PanelData& data, double a, TestOptions opts) {
  opts.centered_opg = true;
  TestResult out = qlm_test_rho(data, Model::fe, a, opts);
  out.variant = TestVariant::qlm_c;
  return out;
}

TestResult gmm_ar_test(const PanelData& data, double rho, bool centered_weight) {
  const int t_len = data.t_len();
  if (t_len < 4) throw std::invalid_argument("gmm_ar_test: need T >= 4");
  const int n = data.n();
  const int m = t_len - 1;
  const int p = m * (m + 1) / 2 - 2;
  if (n <= p) throw std::invalid_argument("gmm_ar_test: need N > p moment conditions");

  const MatrixXd dy =
      data.y.rightCols(m) - data.y.leftCols(m);  // first differences, N x (T-1)
  const MatrixXd dr = band_filter(t_len, rho);
  const SelectorP sel = selector_p(m);

  MatrixXd moments(n, p);
  for (int i = 0; i < n; ++i) {
    const VectorXd fd = dr * dy.row(i).transpose();
    moments.row(i) = (sel.sel * vech(fd * fd.transpose())).transpose();
  }
  const VectorXd mbar = moments.colwise().mean();
  MatrixXd vmm;
  if (centered_weight) {
    const MatrixXd mc = moments.rowwise() - mbar.transpose();
    vmm = mc.transpose() * mc / n;
  } else {
    vmm = moments.transpose() * moments / n;
  }
  const Eigen::LDLT<MatrixXd> ldlt(vmm);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("gmm_ar_test: singular moment covariance");
  const double stat = n * mbar.dot(ldlt.solve(mbar));

  TestResult out;
  out.variant = TestVariant::gmm_ar;
  out.statistic = stat;
  out.df = p;
  out.p_value = chi2_sf(stat, p);
  return out;
}

ConfidenceSet confidence_set(const PanelData& data, Model model, double level,
                             const VectorXd& grid, const TestOptions& opts) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("confidence_set: level must be in (0, 1)");
  ConfidenceSet cs;
  cs.level = level;
  cs.grid = grid;
  cs.accepted.assign(grid.size(), false);
  cs.failed.assign(grid.size(), false);
  const double alpha = 1.0 - level;

  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const double a = grid(k);
    if (!(a > -1.0 && a <= 1.0)) {
      cs.failed[k] = true;
      continue;
    }
    try {
      const TestResult tr = (a == 1.0) ? qlm1_test_rho(data, model, opts)
                                       : qlm_test_rho(data, model, a, opts);
      cs.accepted[k] = tr.p_value >= alpha;
    } catch (const std::exception&) {
      cs.failed[k] = true;
    }
  }
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    if (!cs.accepted[k]) continue;
    const Eigen::Index start = k;
    while (k + 1 < grid.size() && cs.accepted[k + 1]) ++k;
    cs.intervals.emplace_back(grid(start), grid(k));
  }
  return cs;
}

VectorXd default_rho_grid() {
  VectorXd grid(401);
  for (int k = 0; k < 401; ++k) grid(k) = -0.99 + (1.0 - (-0.99)) * k / 400.0;
  grid(400) = 1.0;
  return grid;
}

}  // namespace panelqlm
