#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "panelqlm/chi2.hpp"
#include "panelqlm/dgp.hpp"
#include "panelqlm/inference.hpp"
#include "panelqlm/matrixkit.hpp"
#include "support/stats.hpp"

using namespace panelqlm;

namespace {

PanelData make_panel(int n, int t_len, double rho, unsigned seed, int replication = 0,
                     InitDesign design = InitDesign::s_normal) {
  DgpConfig cfg;
  cfg.n = n;
  cfg.t_len = t_len;
  cfg.rho = rho;
  cfg.seed = seed;
  cfg.replication = replication;
  cfg.init_design = design;
  if (design == InitDesign::s_chisq) cfg.error_dist = ErrorDist::chisq1_standardized;
  if (rho == 1.0) cfg.init_design = InitDesign::ns_normal;
  return generate(cfg);
}

}  // namespace

TEST_CASE("null rejection rate is close to the nominal level") {
  // True null at rho = 0.5, T = 4, N = 250.
  int reject = 0;
  const int reps = 2000;
  for (int rep = 0; rep < reps; ++rep) {
    const PanelData panel = demean_time_effects(make_panel(250, 4, 0.5, 101, rep));
    const TestResult tr = qlm_test_rho(panel, Model::re, 0.5);
    if (tr.p_value < 0.05) ++reject;
  }
  const double rate = static_cast<double>(reject) / reps;
  CHECK(rate > 0.041);
  CHECK(rate < 0.059);
}

TEST_CASE("restriction at the unrestricted optimum gives a null statistic") {
  const PanelData panel = make_panel(200, 4, 0.6, 5);
  const Likelihood lik(panel, Model::fe, VarianceMode::tsh);
  const FitResult fr = fit_unrestricted(lik);
  REQUIRE(fr.theta_n.size() == 3);
  const Eigen::MatrixXd a_mat = Eigen::MatrixXd::Identity(3, 3);
  const TestResult tr = qlm_test(panel, Model::fe, a_mat, fr.theta_n);
  CHECK(tr.df == 3);
  CHECK(tr.statistic < 1e-8);
}

TEST_CASE("statistic is unchanged when the inverse is replaced by the adjugate") {
  const PanelData panel = make_panel(300, 4, 0.8, 77);
  const Likelihood lik(panel, Model::fe, VarianceMode::tsh);
  const FitResult fr = fit_restricted_rho(lik, 0.8);
  const VectorXd s = lik.score(fr.theta);
  const Eigen::MatrixXd h = expected_hessian(lik, fr.theta);
  const Eigen::MatrixXd pm = lik.per_individual_scores(fr.theta);
  const Eigen::MatrixXd j = pm.transpose() * pm / panel.n();
  Eigen::MatrixXd a_mat = Eigen::MatrixXd::Zero(1, 3);
  a_mat(0, 0) = 1.0;
  const double plain = sandwich_statistic(s, h, j, a_mat, panel.n(), false);
  const double adj = sandwich_statistic(s, h, j, a_mat, panel.n(), true);
  CHECK(adj == doctest::Approx(plain).epsilon(1e-8));

  // adj(H)/det(H) reproduces the inverse as a matrix identity.
  const int d = 3;
  Eigen::MatrixXd adjm(d, d);
  for (int i = 0; i < d; ++i)
    for (int c = 0; c < d; ++c) {
      Eigen::MatrixXd minor(d - 1, d - 1);
      int rr = 0;
      for (int r = 0; r < d; ++r) {
        if (r == i) continue;
        int cc = 0;
        for (int k = 0; k < d; ++k) {
          if (k == c) continue;
          minor(rr, cc++) = h(r, k);
        }
        ++rr;
      }
      adjm(c, i) = (((i + c) % 2) ? -1.0 : 1.0) * minor.determinant();
    }
  const Eigen::MatrixXd hinv = h.inverse();
  CHECK((adjm / h.determinant() - hinv).lpNorm<Eigen::Infinity>() <
        1e-8 * hinv.lpNorm<Eigen::Infinity>());
}

TEST_CASE("scalar structural path equals the reparametrized-coordinate path") {
  for (double a : {0.5, 0.9}) {
    const PanelData panel = make_panel(150, 4, a, 313);
    const TestOptions opts;
    const TestResult structural = qlm_test_rho(panel, Model::fe, a, opts);

    const Likelihood lik(panel, Model::fe, VarianceMode::tsh);
    const FitResult fr = fit_restricted_rho(lik, a);
    ExpectedLikelihood ex(Model::fe, VarianceMode::tsh, 4, lik.y1_square_mean());
    Eigen::MatrixXd a_mat = Eigen::MatrixXd::Zero(1, 3);
    a_mat(0, 0) = 1.0;
    const double ncoord = sandwich_statistic(lik.score_n(fr.theta_n),
                                             ex.hessian_n(fr.theta_n),
                                             lik.opg_n(fr.theta_n, false), a_mat, panel.n());
    CHECK(structural.statistic == doctest::Approx(ncoord).epsilon(1e-8));
  }
}

TEST_CASE("unit-root hypothesis is rejected by the interior statistic") {
  const PanelData panel = make_panel(100, 4, 0.9, 11);
  CHECK_THROWS_AS(qlm_test_rho(panel, Model::fe, 1.0, {}), UnitRootHypothesisError);
  Eigen::MatrixXd a_mat = Eigen::MatrixXd::Zero(1, 3);
  a_mat(0, 0) = 1.0;
  CHECK_THROWS_AS(qlm_test(panel, Model::fe, a_mat, VectorXd::Constant(1, 1.0), {}),
                  UnitRootHypothesisError);
  CHECK_THROWS_AS(qlm1_test(panel, Model::fe, a_mat, VectorXd::Constant(1, 0.9), {}),
                  std::invalid_argument);
}

TEST_CASE("unit-root test calibration") {
  int reject = 0;
  const int reps = 1200;
  for (int rep = 0; rep < reps; ++rep) {
    const PanelData panel = demean_time_effects(make_panel(500, 4, 1.0, 202, rep));
    const TestResult tr = qlm1_test_rho(panel, Model::fe);
    CHECK(tr.df == 1);
    if (tr.p_value < 0.05) ++reject;
  }
  const double rate = static_cast<double>(reject) / reps;
  CHECK(rate > 0.03);
  CHECK(rate < 0.075);
}

TEST_CASE("interior statistic hands off to the unit-root statistic") {
  // The agreement is asymptotic: the interior statistic's a -> 1 path levels
  // off at the fitted distance from the singular point, which shrinks with N.
  const PanelData panel = make_panel(100000, 4, 1.0, 4321);
  const double at_one = qlm1_test_rho(panel, Model::fe).statistic;
  double prev_gap = 1e300;
  for (double a : {0.95, 0.99, 0.999}) {
    const double stat = qlm_test_rho(panel, Model::fe, a).statistic;
    const double gap = std::abs(stat - at_one);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
  CHECK(prev_gap < 0.1 * std::max(1.0, at_one));
}

TEST_CASE("statistics are invariant to relabeling and rescaling") {
  const PanelData panel = make_panel(120, 4, 0.7, 88);
  const double base = qlm_test_rho(panel, Model::fe, 0.7).statistic;

  PanelData shuffled = panel;
  std::mt19937 gen(1);
  std::vector<int> perm(panel.n());
  for (int i = 0; i < panel.n(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), gen);
  for (int i = 0; i < panel.n(); ++i) shuffled.y.row(i) = panel.y.row(perm[i]);
  CHECK(qlm_test_rho(shuffled, Model::fe, 0.7).statistic ==
        doctest::Approx(base).epsilon(1e-10));

  PanelData scaled = panel;
  scaled.y *= 3.0;
  CHECK(qlm_test_rho(scaled, Model::fe, 0.7).statistic ==
        doctest::Approx(base).epsilon(1e-8));
}

TEST_CASE("centered and uncentered weights differ by the mean outer product") {
  const PanelData panel = make_panel(150, 4, 0.6, 21);
  const Likelihood lik(panel, Model::fe, VarianceMode::tsh);
  const FitResult fr = fit_restricted_rho(lik, 0.6);
  const Eigen::MatrixXd ju = lik.opg_n(fr.theta_n, false);
  const Eigen::MatrixXd jc = lik.opg_n(fr.theta_n, true);
  const VectorXd mean = lik.score_n(fr.theta_n) / panel.n();
  CHECK((ju - jc - mean * mean.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);
  // Free coordinates satisfy the first-order conditions, so only the rho
  // component of the mean score distinguishes the two weights.
  CHECK(std::abs(mean(1)) < 1e-10);
  CHECK(std::abs(mean(2)) < 1e-10);
}

TEST_CASE("moment test dimensions and validity at the unit root") {
  CHECK(gmm_ar_test(make_panel(200, 4, 0.5, 31), 0.5).df == 4);
  CHECK(gmm_ar_test(make_panel(200, 9, 0.5, 32), 0.5).df == 34);
  CHECK_THROWS_AS(gmm_ar_test(make_panel(100, 3, 0.5, 33), 0.5), std::invalid_argument);
  CHECK_THROWS_AS(gmm_ar_test(make_panel(30, 9, 0.5, 34), 0.5), std::invalid_argument);

  // Moment validity: each scaled component is within 4 standard errors of 0.
  const PanelData panel = make_panel(100000, 4, 1.0, 35);
  const int m = 3, p = 4, n = panel.n();
  const Eigen::MatrixXd dy = panel.y.rightCols(m) - panel.y.leftCols(m);
  const Eigen::MatrixXd dr = band_filter(4, 1.0);
  const SelectorP sel = selector_p(m);
  Eigen::MatrixXd moments(n, p);
  for (int i = 0; i < n; ++i) {
    const VectorXd fd = dr * dy.row(i).transpose();
    moments.row(i) = (sel.sel * vech(fd * fd.transpose())).transpose();
  }
  const Eigen::RowVectorXd mbar = moments.colwise().mean();
  for (int k = 0; k < p; ++k) {
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += std::pow(moments(i, k) - mbar(k), 2);
    var /= n;
    CHECK(std::abs(mbar(k)) < 4.0 * std::sqrt(var / n));
  }
}

TEST_CASE("moment statistic is centrally calibrated at the truth") {
  const int reps = 300;
  double acc = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    const PanelData panel = make_panel(2000, 4, 0.5, 606, rep);
    acc += gmm_ar_test(panel, 0.5).statistic;
  }
  const double mean = acc / reps;
  const double p = 4.0;
  CHECK(std::abs(mean - p) < 3.0 * std::sqrt(2.0 * p / reps));
}

TEST_CASE("confidence sets cover the truth") {
  int covered = 0;
  const int reps = 500;
  VectorXd point_grid(1);
  point_grid << 0.5;
  for (int rep = 0; rep < reps; ++rep) {
    const PanelData panel = demean_time_effects(make_panel(250, 4, 0.5, 700, rep));
    const ConfidenceSet cs = confidence_set(panel, Model::re, 0.95, point_grid);
    REQUIRE(!cs.failed[0]);
    if (cs.accepted[0]) ++covered;
  }
  CHECK(static_cast<double>(covered) / reps >= 0.91);
}

TEST_CASE("confidence set structure on one panel") {
  const PanelData panel = demean_time_effects(make_panel(500, 4, 0.5, 909));
  VectorXd grid(141);
  for (int k = 0; k < 141; ++k) grid(k) = -0.2 + 0.01 * k;
  grid(140) = 1.0 - 1e-12;  // stay interior on this grid
  const ConfidenceSet cs = confidence_set(panel, Model::re, 0.95, grid);
  REQUIRE(!cs.intervals.empty());
  // The truth is covered and the set is the union of the accepted runs.
  int idx_half = 70;  // grid point 0.5
  CHECK(cs.accepted[idx_half]);
  std::size_t total = 0;
  for (std::size_t k = 0; k < cs.accepted.size(); ++k) total += cs.accepted[k];
  std::size_t in_intervals = 0;
  for (const auto& iv : cs.intervals)
    for (int k = 0; k < 141; ++k)
      if (grid(k) >= iv.first && grid(k) <= iv.second) ++in_intervals;
  CHECK(total == in_intervals);

  // Default grid includes the unit root exactly.
  const VectorXd dg = default_rho_grid();
  CHECK(dg(dg.size() - 1) == 1.0);
  CHECK(dg.size() == 401);
}

TEST_CASE("degenerate data collapse the confidence set") {
  // Near-noiseless panel: essentially all variation enters through the
  // initial conditions, so every grid point away from the truth is rejected
  // overwhelmingly. (With eps exactly zero the score direction is pure
  // rounding noise; a 1e-6 scale keeps the statistic well defined.)
  DgpConfig cfg;
  cfg.n = 60;
  cfg.t_len = 4;
  cfg.rho = 0.52;
  cfg.seed = 12;
  cfg.eps_scale = 1e-6;
  const PanelData panel = generate(cfg);
  VectorXd grid(41);
  for (int k = 0; k < 41; ++k) grid(k) = 0.4 + 0.005 * k;
  const ConfidenceSet cs = confidence_set(panel, Model::fe, 0.95, grid);
  double width = 0.0;
  for (const auto& iv : cs.intervals) width += iv.second - iv.first;
  CHECK(width <= 3 * 0.005 + 1e-12);
  // The true value is accepted.
  CHECK(cs.accepted[24]);  // grid point 0.52
}

TEST_CASE("p-values follow the chi-square tail") {
  const PanelData panel = make_panel(300, 4, 0.8, 2);
  const TestResult tr = qlm_test_rho(panel, Model::re, 0.8);
  CHECK(tr.p_value == doctest::Approx(chi2_sf(tr.statistic, tr.df)).epsilon(1e-14));
  CHECK(tr.statistic >= 0.0);
  CHECK(tr.restricted_fit.converged);
}
