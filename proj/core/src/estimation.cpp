#include "panelqlm/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace panelqlm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Objective = std::function<double(const VectorXd&)>;
using Gradient = std::function<VectorXd(const VectorXd&)>;

struct LocalOpt {
  VectorXd x;
  double f = kNegInf;
  bool converged = false;
  double gnorm = 0.0;
};

// BFGS ascent with Armijo backtracking; infeasible points evaluate to -inf
// and simply shrink the step.
LocalOpt bfgs_maximize(const Objective& f, const Gradient& grad, const VectorXd& x0,
                       int max_iter, double gtol, double steptol) {
  LocalOpt out;
  out.x = x0;
  out.f = f(x0);
  if (!std::isfinite(out.f)) return out;

  const int d = static_cast<int>(x0.size());
  MatrixXd hinv = MatrixXd::Identity(d, d);
  VectorXd g = grad(out.x);
  if (!g.allFinite()) return out;

  for (int it = 0; it < max_iter; ++it) {
    const double scale = std::max(1.0, std::abs(out.f));
    if (g.lpNorm<Eigen::Infinity>() < gtol * scale) {
      out.converged = true;
      break;
    }
    VectorXd dir = hinv * g;
    if (dir.dot(g) <= 0.0) {
      hinv = MatrixXd::Identity(d, d);
      dir = g;
    }
    double step = 1.0;
    double fnew = kNegInf;
    VectorXd xnew;
    const double slope = dir.dot(g);
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      xnew = out.x + step * dir;
      fnew = f(xnew);
      if (std::isfinite(fnew) && fnew >= out.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    VectorXd gnew = grad(xnew);
    if (!gnew.allFinite()) {
      out.x = xnew;
      out.f = fnew;
      break;
    }
    const VectorXd s = xnew - out.x;
    const VectorXd yv = gnew - g;
    const double sy = -s.dot(yv);  // ascent: curvature along the step
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      // Standard inverse update written for the minimization of -f.
      const VectorXd ymin = -yv;
      const double rho_bfgs = 1.0 / s.dot(ymin);
      const MatrixXd left = MatrixXd::Identity(d, d) - rho_bfgs * s * ymin.transpose();
      hinv = left * hinv * left.transpose() + rho_bfgs * s * s.transpose();
    }
    const bool small_step = s.lpNorm<Eigen::Infinity>() < steptol * (1.0 + out.x.norm());
    out.x = xnew;
    out.f = fnew;
    g = gnew;
    if (small_step) {
      out.converged = g.lpNorm<Eigen::Infinity>() < 1e2 * gtol * std::max(1.0, std::abs(out.f));
      break;
    }
  }
  out.gnorm = g.allFinite() ? g.lpNorm<Eigen::Infinity>() : std::numeric_limits<double>::quiet_NaN();
  return out;
}

// Nelder-Mead fallback for starts where the gradient is unusable.
LocalOpt nelder_mead_maximize(const Objective& f, const VectorXd& x0, int max_iter,
                              double ftol) {
  const int d = static_cast<int>(x0.size());
  std::vector<VectorXd> pts(d + 1, x0);
  std::vector<double> vals(d + 1);
  for (int j = 0; j < d; ++j)
    pts[j + 1](j) += (x0(j) != 0.0) ? 0.1 * std::abs(x0(j)) : 0.1;
  for (int j = 0; j <= d; ++j) vals[j] = f(pts[j]);

  auto order = [&]() {
    std::vector<int> idx(d + 1);
    for (int j = 0; j <= d; ++j) idx[j] = j;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return vals[a] > vals[b]; });
    std::vector<VectorXd> p2(d + 1);
    std::vector<double> v2(d + 1);
    for (int j = 0; j <= d; ++j) {
      p2[j] = pts[idx[j]];
      v2[j] = vals[idx[j]];
    }
    pts = p2;
    vals = v2;
  };

  for (int it = 0; it < max_iter; ++it) {
    order();
    if (std::isfinite(vals[0]) && std::isfinite(vals[d]) &&
        std::abs(vals[0] - vals[d]) < ftol * (1.0 + std::abs(vals[0])))
      break;
    VectorXd centroid = VectorXd::Zero(d);
    for (int j = 0; j < d; ++j) centroid += pts[j];
    centroid /= d;
    const VectorXd refl = centroid + (centroid - pts[d]);
    const double frefl = f(refl);
    if (frefl > vals[0]) {
      const VectorXd expd = centroid + 2.0 * (centroid - pts[d]);
      const double fexp = f(expd);
      if (fexp > frefl) {
        pts[d] = expd;
        vals[d] = fexp;
      } else {
        pts[d] = refl;
        vals[d] = frefl;
      }
    } else if (frefl > vals[d - 1]) {
      pts[d] = refl;
      vals[d] = frefl;
    } else {
      const VectorXd contr = centroid + 0.5 * (pts[d] - centroid);
      const double fcontr = f(contr);
      if (fcontr > vals[d]) {
        pts[d] = contr;
        vals[d] = fcontr;
      } else {
        for (int j = 1; j <= d; ++j) {
          pts[j] = pts[0] + 0.5 * (pts[j] - pts[0]);
          vals[j] = f(pts[j]);
        }
      }
    }
  }
  order();
  LocalOpt out;
  out.x = pts[0];
  out.f = vals[0];
  out.converged = std::isfinite(vals[0]);
  return out;
}

double golden_maximize(const std::function<double(double)>& f, double lo, double hi,
                       double tol, double* xbest) {
  const double invphi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  *xbest = (fc > fd) ? c : d;
  return std::max(fc, fd);
}

void attach_ncoords(FitResult& fr, const ParamLayout& layout) {
  if (fr.theta.size() == layout.dim() && fr.theta(0) > 0.0)
    fr.theta_n = theta_to_n(fr.theta, layout);
}

double free_gradient_norm(const Likelihood& lik, const VectorXd& theta, int fixed_index) {
  VectorXd g = lik.score(theta);
  g(fixed_index) = 0.0;
  return g.lpNorm<Eigen::Infinity>();
}

// Closed-form rho-restricted fit under tsh via the split into the
// differenced part (pins sigma^2) and the weighted-mean part (pins
// sigma_u^2 = sigma^2/(T-1) + sv2 and, for RE, the y_1 loading).
FitResult restricted_rho_tsh(const Likelihood& lik, double rho, const FitOptions& opts) {
  const ParamLayout& layout = lik.layout();
  const int m = layout.t_len - 1;
  const int n = lik.n();
  const MatrixXd w = lik.residual_basis_ytil() - rho * lik.residual_basis_ytil_lag();

  const VectorXd row_means = w.rowwise().mean();
  const double ssq = w.squaredNorm();
  const double between = m * row_means.squaredNorm();
  double sigma_diff = (ssq - between) / (n * (m - 1));  // within-variation variance

  double pi_n = 0.0;
  VectorXd mean_resid = row_means;
  if (layout.model == Model::re) {
    const VectorXd& y1 = lik.first_observations();
    const double y1sq = y1.squaredNorm();
    if (y1sq > 0.0) pi_n = row_means.dot(y1) / y1sq;
    mean_resid = row_means - pi_n * y1;
  }
  double sigma_u = mean_resid.squaredNorm() / n;

  FitResult fr;
  if (sigma_diff < opts.sigma_floor) {
    sigma_diff = opts.sigma_floor;
    fr.active_bounds.push_back("sigma-floor");
  }
  if (sigma_u < opts.sigma_floor) {
    sigma_u = opts.sigma_floor;
    fr.active_bounds.push_back("sigma-u-floor");
  }
  const double sv2 = sigma_u - sigma_diff / m;
  if (sv2 < 0.0) fr.active_bounds.push_back("fallback-region");

  VectorXd theta(layout.dim());
  theta(0) = rho;
  theta(1) = sv2;
  theta(2) = sigma_diff;
  if (layout.model == Model::re) theta(layout.pi_index()) = pi_n + (1.0 - rho);

  fr.theta = theta;
  fr.loglik = lik.loglik(theta);
  fr.converged = std::isfinite(fr.loglik);
  fr.n_starts_used = 1;
  fr.gradient_norm = fr.converged ? free_gradient_norm(lik, theta, 0) : 0.0;
  attach_ncoords(fr, layout);
  return fr;
}

// Numeric rho-restricted fit for the th mode: optimize (sv2, log zeta, [pi])
// with the positive-definiteness barrier inside loglik.
FitResult restricted_rho_th(const Likelihood& lik, double rho, const FitOptions& opts) {
  const ParamLayout& layout = lik.layout();
  const int nz = layout.nz();
  const bool re = layout.model == Model::re;
  const int dfree = 1 + nz + (re ? 1 : 0);

  auto unpack = [&](const VectorXd& x) {
    VectorXd theta(layout.dim());
    theta(0) = rho;
    theta(1) = x(0);
    theta.segment(2, nz) = x.segment(1, nz).array().exp();
    if (re) theta(layout.pi_index()) = x(1 + nz);
    return theta;
  };
  const Objective f = [&](const VectorXd& x) { return lik.loglik(unpack(x)); };
  const Gradient grad = [&](const VectorXd& x) {
    const VectorXd theta = unpack(x);
    const VectorXd g = lik.score(theta);
    VectorXd gx(dfree);
    gx(0) = g(1);
    gx.segment(1, nz) = g.segment(2, nz).cwiseProduct(theta.segment(2, nz));
    if (re) gx(1 + nz) = g(layout.pi_index());
    return gx;
  };

  // Moment start from the tsh closed form, plus a clamped-sv2 variant.
  const VectorXd mom = moment_start(lik, rho);
  std::vector<VectorXd> starts;
  {
    VectorXd x0(dfree);
    x0(0) = std::max(mom(1), 0.0);
    x0.segment(1, nz).setConstant(std::log(std::max(mom(2), opts.sigma_floor)));
    if (re) x0(1 + nz) = mom(layout.pi_index());
    starts.push_back(x0);
    VectorXd x1 = x0;
    x1(0) = 0.0;
    starts.push_back(x1);
  }

  LocalOpt best;
  int used = 0;
  for (const auto& x0 : starts) {
    ++used;
    LocalOpt cand = bfgs_maximize(f, grad, x0, opts.max_iterations, opts.gradient_tol,
                                  opts.step_tol);
    if (!cand.converged) {
      LocalOpt nm = nelder_mead_maximize(f, cand.x.size() ? cand.x : x0, 400, 1e-12);
      if (nm.f > cand.f) cand = nm;
    }
    if (cand.f > best.f) best = cand;
  }

  FitResult fr;
  fr.n_starts_used = used;
  if (!std::isfinite(best.f)) {
    fr.converged = false;
    fr.loglik = best.f;
    return fr;
  }
  fr.theta = unpack(best.x);
  fr.loglik = best.f;
  fr.converged = best.converged;
  if (fr.theta(1) < 0.0) fr.active_bounds.push_back("fallback-region");
  fr.gradient_norm = free_gradient_norm(lik, fr.theta, 0);
  attach_ncoords(fr, layout);
  return fr;
}

}  // namespace

VectorXd moment_start(const Likelihood& lik, double rho) {
  const ParamLayout& layout = lik.layout();
  const int m = layout.t_len - 1;
  const int n = lik.n();
  const MatrixXd w = lik.residual_basis_ytil() - rho * lik.residual_basis_ytil_lag();
  const VectorXd row_means = w.rowwise().mean();
  const double sigma_diff =
      std::max((w.squaredNorm() - m * row_means.squaredNorm()) / (n * (m - 1)), 1e-12);
  double pi_n = 0.0;
  VectorXd mean_resid = row_means;
  if (layout.model == Model::re) {
    const double y1sq = lik.first_observations().squaredNorm();
    if (y1sq > 0.0) pi_n = row_means.dot(lik.first_observations()) / y1sq;
    mean_resid = row_means - pi_n * lik.first_observations();
  }
  const double sigma_u = std::max(mean_resid.squaredNorm() / n, 1e-12);
  VectorXd theta(layout.dim());
  theta(0) = rho;
  theta(1) = sigma_u - sigma_diff / m;
  theta.segment(2, layout.nz()).setConstant(sigma_diff);
  if (layout.model == Model::re) theta(layout.pi_index()) = pi_n + (1.0 - rho);
  return theta;
}

FitResult fit_restricted_rho(const Likelihood& lik, double rho, const FitOptions& opts) {
  return (lik.layout().mode == VarianceMode::tsh) ? restricted_rho_tsh(lik, rho, opts)
                                                  : restricted_rho_th(lik, rho, opts);
}

FitResult fit_unrestricted(const Likelihood& lik, const FitOptions& opts) {
  const double lo = opts.rho_lower;
  const double hi = 1.0;
  const int npts = std::max(opts.profile_scan_points, 5);

  auto profile = [&](double rho) { return fit_restricted_rho(lik, rho, opts).loglik; };

  // Coarse scan, then golden-section refinement around every local maximum.
  // The scan grid is augmented with the canonical starts so a narrow
  // near-unit-root mode is never missed.
  std::vector<double> grid;
  for (int k = 0; k < npts; ++k) grid.push_back(lo + (hi - lo) * k / (npts - 1));
  for (double s : opts.rho_starts)
    if (s > lo && s < hi) grid.push_back(s);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<double> vals(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) vals[k] = profile(grid[k]);

  double best_rho = grid[0];
  double best_val = vals[0];
  int refinements = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const bool is_local_max = (k == 0 || vals[k] >= vals[k - 1]) &&
                              (k + 1 == grid.size() || vals[k] >= vals[k + 1]);
    if (!is_local_max || !std::isfinite(vals[k])) continue;
    const double a = (k == 0) ? grid[0] : grid[k - 1];
    const double b = (k + 1 == grid.size()) ? grid.back() : grid[k + 1];
    double x = grid[k];
    double v = vals[k];
    if (b > a) v = golden_maximize(profile, a, b, 1e-10, &x);
    ++refinements;
    if (v > best_val) {
      best_val = v;
      best_rho = x;
    }
  }
  // The unit root is a boundary candidate of its own.
  if (profile(1.0) > best_val) best_rho = 1.0;

  FitResult fr = fit_restricted_rho(lik, best_rho, opts);
  fr.n_starts_used = refinements;
  fr.gradient_norm = fr.converged ? lik.score(fr.theta).lpNorm<Eigen::Infinity>() : 0.0;
  // The profile optimum is interior in rho; treat boundary rho = 1 separately.
  if (best_rho == 1.0) fr.active_bounds.push_back("rho=1");
  return fr;
}

FitResult fit(const Likelihood& lik, const std::optional<Restriction>& restriction,
              const FitOptions& opts) {
  const ParamLayout& layout = lik.layout();
  if (!restriction) return fit_unrestricted(lik, opts);

  const MatrixXd& a_mat = restriction->a_mat;
  const VectorXd& a_vec = restriction->a_vec;
  const int dim = layout.dim();
  const int j = static_cast<int>(a_mat.rows());
  if (a_mat.cols() != dim || a_vec.size() != j)
    throw std::invalid_argument("fit: restriction dimensions do not match the model");
  if (j < 1 || a_mat.fullPivLu().rank() < j)
    throw std::invalid_argument("fit: restriction matrix must have full row rank");

  // Scalar restriction on rho alone dispatches to the closed-form path.
  if (j == 1 && std::abs(a_mat(0, 0)) > 0.0 &&
      a_mat.row(0).tail(dim - 1).lpNorm<Eigen::Infinity>() == 0.0) {
    return fit_restricted_rho(lik, a_vec(0) / a_mat(0, 0), opts);
  }

  // General affine restriction on the n coordinates: theta_n = p + Z psi.
  const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(a_mat);
  const VectorXd particular = cod.solve(a_vec);
  Eigen::HouseholderQR<MatrixXd> qr(a_mat.transpose());
  const MatrixXd q_full = qr.householderQ();
  const MatrixXd z = q_full.rightCols(dim - j);

  const Objective f = [&](const VectorXd& psi) {
    const VectorXd tn = particular + z * psi;
    if (tn(0) <= 0.0) return kNegInf;
    return lik.loglik_n(tn);
  };
  const Gradient grad = [&](const VectorXd& psi) {
    return (z.transpose() * lik.score_n(particular + z * psi)).eval();
  };

  FitResult fr;
  if (dim == j) {
    fr.theta_n = particular;
    fr.theta = theta_from_n(particular, layout);
    fr.loglik = lik.loglik_n(particular);
    fr.converged = std::isfinite(fr.loglik);
    fr.n_starts_used = 1;
    fr.gradient_norm = 0.0;
    return fr;
  }

  std::vector<VectorXd> starts;
  for (double rho : {0.5, 0.9, 0.99, 1.0}) {
    try {
      const VectorXd tn = theta_to_n(moment_start(lik, rho), layout);
      starts.push_back(z.transpose() * (tn - particular));
    } catch (const std::exception&) {
    }
  }
  if (starts.empty()) starts.push_back(VectorXd::Zero(dim - j));

  LocalOpt best;
  int used = 0;
  for (const auto& psi0 : starts) {
    ++used;
    LocalOpt cand =
        bfgs_maximize(f, grad, psi0, opts.max_iterations, opts.gradient_tol, opts.step_tol);
    if (!cand.converged && std::isfinite(cand.f)) {
      LocalOpt nm = nelder_mead_maximize(f, cand.x, 400, 1e-12);
      if (nm.f > cand.f) cand = nm;
    }
    if (cand.f > best.f) best = cand;
  }
  if (!std::isfinite(best.f)) throw std::runtime_error("fit: all restricted starts failed");

  fr.theta_n = particular + z * best.x;
  fr.theta = theta_from_n(fr.theta_n, layout);
  fr.loglik = best.f;
  fr.converged = best.converged;
  fr.n_starts_used = used;
  fr.gradient_norm = best.gnorm;
  if (fr.theta(1) < 0.0) fr.active_bounds.push_back("fallback-region");
  return fr;
}

FitResult fit(const PanelData& data, Model model, VarianceMode mode,
              const std::optional<Restriction>& restriction, const FitOptions& opts) {
  const Likelihood lik(data, model, mode);
  return fit(lik, restriction, opts);
}

}  // namespace panelqlm
