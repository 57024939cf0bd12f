#include "panelqlm/matrixkit.hpp"

#include <cmath>
#include <stdexcept>

namespace panelqlm {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Kronecker product for rational matrices; Eigen's kroneckerProduct lives in
// unsupported/, and we only need the dense small-size case.
RationalMatrix kron(const RationalMatrix& a, const RationalMatrix& b) {
  RationalMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index k = 0; k < b.rows(); ++k)
        for (Eigen::Index l = 0; l < b.cols(); ++l)
          out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

RationalVector vech_rational(const RationalMatrix& a) {
  const Eigen::Index n = a.rows();
  RationalVector v(n * (n + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) v(k++) = a(i, j);
  return v;
}

RationalVector vec_rational(const RationalMatrix& a) {
  RationalVector v(a.rows() * a.cols());
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) v(k++) = a(i, j);
  return v;
}

RationalMatrix identity_rational(Eigen::Index n) {
  RationalMatrix out = RationalMatrix::Constant(n, n, Rational(0));
  for (Eigen::Index i = 0; i < n; ++i) out(i, i) = Rational(1);
  return out;
}

bool exact_equal(const RationalMatrix& a, const RationalMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != b(i, j)) return false;
  return true;
}

}  // namespace

MatrixXd tridiag(int n, double a, double b, double c) {
  require(n >= 1, "tridiag: dimension must be positive");
  MatrixXd out = MatrixXd::Zero(n, n);
  out(0, 0) = a;
  for (int i = 1; i < n; ++i) out(i, i) = b;
  for (int i = 0; i + 1 < n; ++i) {
    out(i, i + 1) = c;
    out(i + 1, i) = c;
  }
  return out;
}

RationalMatrix tridiag_rational(int n, const Rational& a, const Rational& b, const Rational& c) {
  require(n >= 1, "tridiag: dimension must be positive");
  RationalMatrix out = RationalMatrix::Constant(n, n, Rational(0));
  out(0, 0) = a;
  for (int i = 1; i < n; ++i) out(i, i) = b;
  for (int i = 0; i + 1 < n; ++i) {
    out(i, i + 1) = c;
    out(i + 1, i) = c;
  }
  return out;
}

MatrixXd gt_inverse(int t_len) {
  require(t_len >= 2, "gt_inverse: T must be >= 2");
  MatrixXd out(t_len, t_len);
  for (int i = 0; i < t_len; ++i)
    for (int j = 0; j < t_len; ++j) out(i, j) = t_len - std::max(i, j);
  return out;
}

RationalMatrix gt_inverse_rational(int t_len) {
  require(t_len >= 2, "gt_inverse: T must be >= 2");
  RationalMatrix out(t_len, t_len);
  for (int i = 0; i < t_len; ++i)
    for (int j = 0; j < t_len; ++j) out(i, j) = Rational(t_len - std::max(i, j));
  return out;
}

MatrixXd first_difference(int t_len) {
  require(t_len >= 3, "first_difference: T must be >= 3");
  MatrixXd d = MatrixXd::Zero(t_len - 2, t_len - 1);
  for (int k = 0; k < t_len - 2; ++k) {
    d(k, k) = -1.0;
    d(k, k + 1) = 1.0;
  }
  return d;
}

MatrixXd within_projection(int t_len) {
  require(t_len >= 3, "within_projection: T must be >= 3");
  const int m = t_len - 1;
  return MatrixXd::Identity(m, m) - MatrixXd::Constant(m, m, 1.0 / m);
}

MatrixXd lag_filter(int t_len, double rho) {
  require(t_len >= 2, "lag_filter: T must be >= 2");
  const int m = t_len - 1;
  MatrixXd p = MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < i; ++j) p(i, j) = std::pow(rho, i - j - 1);
  return p;
}

MatrixXd band_filter(int t_len, double r) {
  require(t_len >= 2, "band_filter: T must be >= 2");
  const int m = t_len - 1;
  MatrixXd d = MatrixXd::Identity(m, m);
  for (int i = 0; i + 1 < m; ++i) d(i + 1, i) = -r;
  return d;
}

StructuredPanelMatrices StructuredPanelMatrices::make(int t_len, double rho, double r) {
  require(t_len >= 3, "StructuredPanelMatrices: T must be >= 3");
  StructuredPanelMatrices s;
  s.t_len = t_len;
  s.diff = first_difference(t_len);
  s.within = within_projection(t_len);
  s.lag = lag_filter(t_len, rho);
  s.band = band_filter(t_len, r);
  s.ones = VectorXd::Ones(t_len - 1);
  return s;
}

VectorXd vec(const MatrixXd& a) {
  VectorXd v(a.size());
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) v(k++) = a(i, j);
  return v;
}

VectorXd vech(const MatrixXd& a) {
  require(a.rows() == a.cols(), "vech: matrix must be square");
  const Eigen::Index n = a.rows();
  VectorXd v(n * (n + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) v(k++) = a(i, j);
  return v;
}

MatrixXd unvech(const VectorXd& v) {
  // Solve m(m+1)/2 = len for m and reject non-triangular lengths.
  const auto len = v.size();
  const auto m = static_cast<Eigen::Index>(std::llround((std::sqrt(8.0 * len + 1.0) - 1.0) / 2.0));
  require(m * (m + 1) / 2 == len, "unvech: length is not a triangular number");
  MatrixXd a(m, m);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = j; i < m; ++i) {
      a(i, j) = v(k);
      a(j, i) = v(k);
      ++k;
    }
  return a;
}

DuplicationPair duplication(int n) {
  require(n >= 1, "duplication: order must be positive");
  const int half = n * (n + 1) / 2;
  DuplicationPair out;
  out.n = n;
  out.dup = MatrixXd::Zero(n * n, half);
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) {
      out.dup(j * n + i, k) = 1.0;
      out.dup(i * n + j, k) = 1.0;
      ++k;
    }
  out.dup_pinv = (out.dup.transpose() * out.dup).ldlt().solve(out.dup.transpose());
  return out;
}

RationalMatrix duplication_rational(int n) {
  require(n >= 1, "duplication: order must be positive");
  const int half = n * (n + 1) / 2;
  RationalMatrix dup = RationalMatrix::Constant(n * n, half, Rational(0));
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) {
      dup(j * n + i, k) = Rational(1);
      dup(i * n + j, k) = Rational(1);
      ++k;
    }
  return dup;
}

RationalMatrix duplication_pinv_rational(int n) {
  // (D'D) is diagonal: 1 on diagonal positions, 2 on off-diagonal positions.
  const RationalMatrix dup = duplication_rational(n);
  RationalMatrix pinv = dup.transpose();
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) {
      if (i != j)
        for (Eigen::Index c = 0; c < pinv.cols(); ++c) pinv(k, c) = pinv(k, c) * Rational(1, 2);
      ++k;
    }
  return pinv;
}

SelectorP selector_p(int t_len) {
  require(t_len >= 2, "selector_p: T must be >= 2");
  const int half = t_len * (t_len + 1) / 2;
  const int p = half - 2;
  const VectorXd vg = vech(tridiag(t_len, 1.0, 2.0, -1.0));
  SelectorP out;
  out.t_len = t_len;
  out.g = vg.segment(2, p);
  out.sel = MatrixXd::Zero(p, half);
  out.sel.col(1) = out.g;
  out.sel.block(0, 2, p, p) = MatrixXd::Identity(p, p);
  return out;
}

TraceIdentities trace_identities(int t_len) {
  require(t_len >= 3, "trace_identities: T must be >= 3");
  const MatrixXd p = lag_filter(t_len, 1.0);
  const MatrixXd q = within_projection(t_len);
  const VectorXd ones = VectorXd::Ones(t_len - 1);
  const MatrixXd ptp = p.transpose() * p;
  TraceIdentities out;
  out.tr_ptqp = (p.transpose() * q * p).trace();
  out.tr_qp = (q * p).trace();
  out.ones_ptp = ones.dot(ptp * ones);
  out.ones_p = ones.dot(p * ones);
  out.tr_ptp = ptp.trace();
  out.tr_ptpptp = (ptp * ptp).trace();
  out.tr_qpqp = (q * p * q * p).trace();
  out.tr_ptpqp = (ptp * q * p).trace();
  return out;
}

namespace identities {

RationalMatrix a_matrix(int t_len) {
  return tridiag_rational(t_len, Rational(-(t_len - 1), 2), Rational(-(t_len - 2), 3),
                          Rational(t_len + 1, 6));
}

RationalMatrix f_matrix(int t_len) {
  RationalMatrix f = RationalMatrix::Constant(t_len, t_len, Rational(0));
  for (int i = 0; i < t_len; ++i) f(i, 0) = Rational(t_len - i);
  return f;
}

RationalMatrix m_matrix(int t_len) {
  const RationalMatrix g = tridiag_rational(t_len, Rational(1), Rational(2), Rational(-1));
  const RationalMatrix dp = duplication_pinv_rational(t_len);
  return Rational(2) * (dp * kron(g, g) * dp.transpose());
}

RationalMatrix m_inverse(int t_len) {
  const RationalMatrix gi = gt_inverse_rational(t_len);
  const RationalMatrix du = duplication_rational(t_len);
  return Rational(1, 2) * (du.transpose() * kron(gi, gi) * du);
}

RationalMatrix pbar(int t_len) {
  const int half = t_len * (t_len + 1) / 2;
  const int p = half - 2;
  const RationalMatrix g = tridiag_rational(t_len, Rational(1), Rational(2), Rational(-1));
  const RationalVector vg = vech_rational(g);

  RationalMatrix z = RationalMatrix::Constant(2, half, Rational(0));
  z(0, 0) = Rational(1);
  z(1, 1) = Rational(1);
  for (int k = 0; k < p; ++k) z(1, 2 + k) = -vg(2 + k);

  RationalMatrix top = z * m_inverse(t_len);

  RationalMatrix out = RationalMatrix::Constant(half, half, Rational(0));
  out.topRows(2) = top;
  for (int k = 0; k < p; ++k) {
    out(2 + k, 1) = vg(2 + k);
    out(2 + k, 2 + k) = Rational(1);
  }
  return out;
}

bool check_gt_inverse(int t_len) {
  const RationalMatrix g = tridiag_rational(t_len, Rational(1), Rational(2), Rational(-1));
  return exact_equal(g * gt_inverse_rational(t_len), identity_rational(t_len));
}

bool check_proposition_m_inverse(int t_len) {
  return exact_equal(m_matrix(t_len) * m_inverse(t_len),
                     identity_rational(t_len * (t_len + 1) / 2));
}

bool check_gh_identity(int t_len) {
  const RationalMatrix gi = gt_inverse_rational(t_len);
  const RationalMatrix h = tridiag_rational(t_len, Rational(0), Rational(-2), Rational(1));
  RationalMatrix rhs = f_matrix(t_len) - identity_rational(t_len);
  return exact_equal(gi * h, rhs);
}

bool check_ga_identity(int t_len) {
  const RationalMatrix gi = gt_inverse_rational(t_len);
  const RationalMatrix lhs = Rational(-6) * (gi * a_matrix(t_len));
  const RationalMatrix rhs = Rational(2 * (t_len + 1)) * f_matrix(t_len) - Rational(6) * gi +
                             Rational(t_len + 1) * identity_rational(t_len);
  return exact_equal(lhs, rhs);
}

bool check_pbar_image(int t_len) {
  const RationalVector img = pbar(t_len) * vech_rational(a_matrix(t_len));
  const RationalVector target = vech_rational(identity_rational(t_len));
  for (Eigen::Index k = 0; k < img.size(); ++k) {
    const Rational want = (k == 0) ? target(k) - Rational(1) : target(k);
    if (img(k) != want) return false;
  }
  return true;
}

bool check_quadratic_form(int t_len) {
  const RationalMatrix gi = gt_inverse_rational(t_len);
  const RationalVector va = vec_rational(a_matrix(t_len));
  Rational acc(0);
  // va' (gi x gi) va = sum_{ij,kl} gi(i,k) gi(j,l) A(i,j) A(k,l) done blockwise.
  const RationalVector tmp = kron(gi, gi) * va;
  for (Eigen::Index k = 0; k < va.size(); ++k) acc += va(k) * tmp(k);
  const std::int64_t t = t_len;
  return acc == Rational((2 * t - 1) * (t + 1) * t * (t - 1), 36);
}

double selector_quadratic_form(int t_len) {
  const int half = t_len * (t_len + 1) / 2;
  const int p = half - 2;
  const SelectorP sp = selector_p(t_len);

  RationalMatrix mr = m_matrix(t_len);
  MatrixXd m(half, half);
  for (int i = 0; i < half; ++i)
    for (int j = 0; j < half; ++j) m(i, j) = mr(i, j).to_double();

  const MatrixXd r = sp.sel * m * sp.sel.transpose();
  VectorXd w = vech(MatrixXd::Identity(t_len, t_len)).segment(2, p);
  return w.dot(r.partialPivLu().solve(w));
}

}  // namespace identities

}  // namespace panelqlm
