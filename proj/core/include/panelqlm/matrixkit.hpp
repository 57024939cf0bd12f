#pragma once

#include <Eigen/Dense>

#include "panelqlm/rational.hpp"

// Constructors and identities for the structured matrices that appear all
// over the panel AR(1) likelihood algebra: differencing and within-projection
// matrices, symmetric tridiagonal families, lag filters, duplication and
// selector matrices, and the vec/vech conventions tying them together.
//
// vech stacks the lower triangle column by column; unvech/duplication use the
// same convention throughout. Everything here is a pure function of its
// arguments.

namespace panelqlm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

using RationalMatrix = Eigen::Matrix<Rational, Eigen::Dynamic, Eigen::Dynamic>;
using RationalVector = Eigen::Matrix<Rational, Eigen::Dynamic, 1>;

// Symmetric tridiagonal matrix with corner entry a, remaining diagonal b and
// off-diagonals c. n must be >= 1; n == 1 gives the 1x1 matrix [a].
MatrixXd tridiag(int n, double a, double b, double c);
RationalMatrix tridiag_rational(int n, const Rational& a, const Rational& b, const Rational& c);

// Closed-form inverse of tridiag(T, 1, 2, -1): entry (i, j) = T + 1 - max(i, j)
// (1-based indices). Requires T >= 2.
MatrixXd gt_inverse(int t_len);
RationalMatrix gt_inverse_rational(int t_len);

// (T-2) x (T-1) first-difference matrix: row k has -1 at k and +1 at k+1.
MatrixXd first_difference(int t_len);

// (T-1) x (T-1) within projection Q = I - ones*ones'/(T-1).
MatrixXd within_projection(int t_len);

// (T-1) x (T-1) lower-triangular lag filter with entry (i, j) = rho^(i-j-1)
// for i > j and zero otherwise.
MatrixXd lag_filter(int t_len, double rho);

// (T-1) x (T-1) band matrix with unit diagonal and -r on the first subdiagonal.
MatrixXd band_filter(int t_len, double r);

// The bundle of panel matrices used by the test statistics at a given T.
struct StructuredPanelMatrices {
  int t_len = 0;       // number of time periods T (>= 3)
  MatrixXd diff;       // D, (T-2) x (T-1)
  MatrixXd within;     // Q = I - ones*ones'/(T-1) = D'(DD')^{-1} D
  MatrixXd lag;        // P_rho
  MatrixXd band;       // D_r
  VectorXd ones;       // length T-1

  static StructuredPanelMatrices make(int t_len, double rho, double r);
};

// vec / vech / unvech with column-major lower-triangle stacking.
VectorXd vec(const MatrixXd& a);
VectorXd vech(const MatrixXd& a);
MatrixXd unvech(const VectorXd& v);

// Duplication matrix D_u of order n with its Moore-Penrose inverse
// (D_u' D_u)^{-1} D_u': D_u * vech(A) = vec(A) for symmetric A.
struct DuplicationPair {
  int n = 0;
  MatrixXd dup;       // n^2 x n(n+1)/2
  MatrixXd dup_pinv;  // n(n+1)/2 x n^2
};
DuplicationPair duplication(int n);
RationalMatrix duplication_rational(int n);
RationalMatrix duplication_pinv_rational(int n);

// Selector P_T = (0 g I_p) with p = T(T+1)/2 - 2 and g the tail of
// vech(tridiag(T,1,2,-1)) = (1, -1, g')'.
struct SelectorP {
  int t_len = 0;
  MatrixXd sel;  // p x T(T+1)/2
  VectorXd g;    // length p
};
SelectorP selector_p(int t_len);

// Traces and bilinear forms of the unit-root lag filter P = lag_filter(T, 1)
// against Q, evaluated from the materialized matrices. Requires T >= 3.
struct TraceIdentities {
  double tr_ptqp = 0;    // tr(P'QP)
  double tr_qp = 0;      // tr(QP)
  double ones_ptp = 0;   // ones'P'P ones
  double ones_p = 0;     // ones'P ones
  double tr_ptp = 0;     // tr(P'P)
  double tr_ptpptp = 0;  // tr(P'PP'P)
  double tr_qpqp = 0;    // tr(QPQP)
  double tr_ptpqp = 0;   // tr(P'PQP)
};
TraceIdentities trace_identities(int t_len);

namespace identities {

// Building blocks of the closed-form noncentrality algebra. These are exposed
// so the verification report can re-run every identity at arbitrary T.

RationalMatrix a_matrix(int t_len);                  // tridiag(T, -(T-1)/2, -(T-2)/3, (T+1)/6)
RationalMatrix f_matrix(int t_len);                  // (T, T-1, ..., 1)' * e_1'
RationalMatrix m_matrix(int t_len);                  // 2 D_u^+ (G x G) (D_u^+)'
RationalMatrix m_inverse(int t_len);                 // (1/2) D_u' (G^{-1} x G^{-1}) D_u
RationalMatrix pbar(int t_len);                      // [Z M^{-1} ; P] stacked square matrix

bool check_gt_inverse(int t_len);                    // G_T * gt_inverse = I, exact
bool check_proposition_m_inverse(int t_len);         // M * m_inverse = I, exact
bool check_gh_identity(int t_len);                   // G^{-1} H = F - I, exact
bool check_ga_identity(int t_len);                   // -6 G^{-1} A = 2(T+1)F - 6G^{-1} + (T+1)I
bool check_pbar_image(int t_len);                    // Pbar vech(A) = vech(I) - e_1, exact
bool check_quadratic_form(int t_len);                // vec(A)'(G^{-1} x G^{-1})vec(A) = (2T-1)(T+1)T(T-1)/36
double selector_quadratic_form(int t_len);           // w' (P M P')^{-1} w with (1,0,w')' = vech(I)

}  // namespace identities

}  // namespace panelqlm
