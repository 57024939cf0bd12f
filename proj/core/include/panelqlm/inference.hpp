#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "panelqlm/estimation.hpp"
#include "panelqlm/expected.hpp"

// Identification-robust score tests. The interior statistic standardizes the
// restricted score by the expected Hessian in a sandwich with the outer
// product of the per-individual scores; at the unit root, where the
// rho-direction score degenerates, the score block is replaced by the
// half-second-derivatives S_{i,1} and the Hessian by the scaled higher-order
// expected-derivative blocks. Confidence sets invert these tests over a rho
// grid.
//
// For a scalar hypothesis rho = a the statistic is assembled in structural
// coordinates; this equals the reparametrized-coordinate value exactly
// (the expected Hessian transforms without curvature terms under
// self-expectation) and stays defined on the whole grid, including a <= 0
// where the reparametrization is singular.

namespace panelqlm {

enum class TestVariant { qlm, qlm1, qlm_c, gmm_ar };

const char* to_string(TestVariant v);

// Raised when a unit-root hypothesis reaches the interior statistic.
struct UnitRootHypothesisError : std::invalid_argument {
  explicit UnitRootHypothesisError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct TestOptions {
  bool centered_opg = false;          // centered OPG in the sandwich
  VarianceMode mode = VarianceMode::tsh;
  FitOptions fit;
};

struct TestResult {
  TestVariant variant = TestVariant::qlm;
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  std::optional<double> noncentrality_hint;
  FitResult restricted_fit;
};

// Core sandwich quadratic form
//   N^{-1} s' H^{-1} A' (A H^{-1} J H^{-1} A')^{-1} A H^{-1} s
// with s the total score-like vector and H, J per-observation averages.
// With use_adjugate the inverse of H is replaced by its adjugate throughout;
// the value is unchanged up to conditioning.
double sandwich_statistic(const VectorXd& score_total, const MatrixXd& h_avg,
                          const MatrixXd& j_avg, const MatrixXd& a_mat, int n,
                          bool use_adjugate = false);

// Interior test of H0: rho = a with |a| < 1.
TestResult qlm_test_rho(const PanelData& data, Model model, double a,
                        const TestOptions& opts = {});
// General H0: A theta_n = a (must restrict rho away from 1).
TestResult qlm_test(const PanelData& data, Model model, const MatrixXd& a_mat,
                    const VectorXd& a_vec, const TestOptions& opts = {});

// Unit-root test of H0: rho = 1 (optionally with further restrictions).
TestResult qlm1_test_rho(const PanelData& data, Model model, const TestOptions& opts = {});
TestResult qlm1_test(const PanelData& data, Model model, const MatrixXd& a_mat,
                     const VectorXd& a_vec, const TestOptions& opts = {});

// FE scalar test with the centered OPG.
TestResult qlm_c_test(const PanelData& data, double a, TestOptions opts = {});

// Moment-based test of H0: rho = a from the second moments of the
// differenced data, with an Eicker-White weight. Requires T >= 4 and N > p.
TestResult gmm_ar_test(const PanelData& data, double rho, bool centered_weight = true);

struct ConfidenceSet {
  double level = 0.95;
  VectorXd grid;
  std::vector<bool> accepted;
  std::vector<bool> failed;                      // per-point evaluation failures
  std::vector<std::pair<double, double>> intervals;  // maximal accepted runs
};

ConfidenceSet confidence_set(const PanelData& data, Model model, double level,
                             const VectorXd& grid, const TestOptions& opts = {});

VectorXd default_rho_grid();  // 401 points on [-0.99, 1] including 1 exactly

}  // namespace panelqlm
