// Command line front end: simulation, estimation, robust score tests,
// confidence sets, moment tests, power curves, identity verification, and
// Monte Carlo tables. Every randomized subcommand requires an explicit
// --seed. Exit codes: 0 success, 2 argument/validation error, 1 runtime
// failure.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "panelqlm/chi2.hpp"
#include "panelqlm/dgp.hpp"
#include "panelqlm/estimation.hpp"
#include "panelqlm/harness.hpp"
#include "panelqlm/inference.hpp"
#include "panelqlm/panel_io.hpp"
#include "panelqlm/power.hpp"

namespace {

using namespace panelqlm;

std::ostream& open_out(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot open output file: " + path);
  return file;
}

Model parse_model(const std::string& s) {
  if (s == "re") return Model::re;
  if (s == "fe") return Model::fe;
  throw std::invalid_argument("--model must be re or fe");
}

VarianceMode parse_mode(const std::string& s) {
  if (s == "tsh") return VarianceMode::tsh;
  if (s == "th") return VarianceMode::th;
  throw std::invalid_argument("--variance-mode must be tsh or th");
}

// Numeric CSV without header: rows of comma-separated values.
Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open matrix file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::string cur;
    for (char c : line + ",") {
      if (c == ',') {
        row.push_back(std::stod(cur));
        cur.clear();
      } else if (c != '\r') {
        cur.push_back(c);
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument("ragged rows in matrix file: " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("empty matrix file: " + path);
  Eigen::MatrixXd out(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) out(i, j) = rows[i][j];
  return out;
}

VectorXd parse_grid(const std::string& s) {
  // lo:hi:n
  const auto c1 = s.find(':');
  const auto c2 = s.find(':', c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos)
    throw std::invalid_argument("--grid expects lo:hi:n");
  const double lo = std::stod(s.substr(0, c1));
  const double hi = std::stod(s.substr(c1 + 1, c2 - c1 - 1));
  const int n = std::stoi(s.substr(c2 + 1));
  if (n < 1 || hi < lo) throw std::invalid_argument("--grid expects lo <= hi and n >= 1");
  VectorXd grid(n);
  for (int k = 0; k < n; ++k)
    grid(k) = (n == 1) ? lo : lo + (hi - lo) * k / (n - 1.0);
  return grid;
}

void write_fit(std::ostream& os, const FitResult& fr, Model model, VarianceMode mode) {
  os << "parameter,value\n";
  os << "rho," << fr.theta(0) << '\n';
  os << "sigma_v_tilde_sq," << fr.theta(1) << '\n';
  const int nz = static_cast<int>(fr.theta.size()) - 2 - (model == Model::re ? 1 : 0);
  for (int j = 0; j < nz; ++j)
    os << (mode == VarianceMode::tsh ? "sigma_sq" : "zeta_" + std::to_string(j + 2)) << ','
       << fr.theta(2 + j) << '\n';
  if (model == Model::re) os << "pi_tilde," << fr.theta(fr.theta.size() - 1) << '\n';
  os << "loglik," << fr.loglik << '\n';
  os << "converged," << (fr.converged ? 1 : 0) << '\n';
  os << "n_starts_used," << fr.n_starts_used << '\n';
  os << "gradient_norm," << fr.gradient_norm << '\n';
  std::string bounds;
  for (const auto& b : fr.active_bounds) bounds += (bounds.empty() ? "" : ";") + b;
  os << "active_bounds," << bounds << '\n';
}

void write_test_row(std::ostream& os, const TestResult& tr, double a, bool header) {
  if (header) os << "variant,a,statistic,df,p_value,converged\n";
  os << to_string(tr.variant) << ',' << a << ',' << tr.statistic << ',' << tr.df << ','
     << tr.p_value << ',' << (tr.restricted_fit.converged ? 1 : 0) << '\n';
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Quasi-ML estimation and identification-robust score inference "
               "for the panel AR(1) model"};
  app.require_subcommand(1);

  // --- simulate ---
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic panel and write it as CSV");
  int sim_n = 100, sim_t = 4;
  double sim_rho = 0.5, sim_smu = 1.0;
  std::string sim_err = "normal", sim_init = "s_normal", sim_out;
  bool sim_wide = false, sim_demean = false;
  std::uint64_t sim_seed = 0;
  sim->add_option("--n", sim_n, "Number of individuals")->required();
  sim->add_option("--t", sim_t, "Number of time periods")->required();
  sim->add_option("--rho", sim_rho, "Autoregressive parameter")->required();
  sim->add_option("--sigma-mu-sq", sim_smu, "Variance of the individual effects");
  sim->add_option("--error-dist", sim_err, "normal | chisq1_standardized");
  sim->add_option("--init-design", sim_init, "s_normal | s_chisq | ns_normal");
  sim->add_flag("--remove-time-effects", sim_demean, "Subtract cross-sectional averages");
  sim->add_option("--seed", sim_seed, "RNG seed")->required();
  sim->add_flag("--wide", sim_wide, "Write the dense N x T matrix instead of long format");
  sim->add_option("--out", sim_out, "Output file (default stdout)");

  // --- estimate ---
  auto* est = app.add_subcommand("estimate", "Fit the quasi-ML model");
  std::string est_data, est_model = "re", est_mode = "tsh", est_out;
  bool est_wide = false;
  std::optional<double> est_h0;
  FitOptions est_opts;
  std::vector<double> est_starts;
  est->add_option("--data", est_data, "Panel CSV (long id,t,y format)")->required();
  est->add_flag("--wide", est_wide, "Input is a dense matrix CSV");
  est->add_option("--model", est_model, "re | fe");
  est->add_option("--variance-mode", est_mode, "tsh | th");
  est->add_option("--h0-rho", est_h0, "Fix rho at this value (restricted fit)");
  est->add_option("--max-iterations", est_opts.max_iterations, "Optimizer iteration cap");
  est->add_option("--gradient-tol", est_opts.gradient_tol, "Convergence tolerance");
  est->add_option("--rho-starts", est_starts, "Override the multistart rho grid");
  est->add_option("--out", est_out, "Output file (default stdout)");

  // --- test ---
  auto* tst = app.add_subcommand("test", "Robust score test of H0: rho = a");
  std::string tst_data, tst_model = "re", tst_mode = "tsh", tst_out;
  bool tst_wide = false, tst_centered = false;
  double tst_a = 0.0;
  tst->add_option("--data", tst_data, "Panel CSV")->required();
  tst->add_flag("--wide", tst_wide, "Input is a dense matrix CSV");
  tst->add_option("--model", tst_model, "re | fe");
  tst->add_option("--variance-mode", tst_mode, "tsh | th");
  std::vector<std::string> tst_restriction;
  tst->add_option("--h0-rho", tst_a, "Hypothesized rho (1.0 selects the unit-root statistic)");
  tst->add_option("--restriction", tst_restriction,
                  "General hypothesis A theta_n = a: matrix CSV and vector CSV")
      ->expected(2);
  tst->add_flag("--centered-opg", tst_centered, "Center the outer-product weight");
  tst->add_option("--out", tst_out, "Output file (default stdout)");

  // --- confset ---
  auto* cs = app.add_subcommand("confset", "Confidence set for rho by test inversion");
  std::string cs_data, cs_model = "re", cs_mode = "tsh", cs_grid, cs_out;
  bool cs_wide = false, cs_centered = false;
  double cs_level = 0.95;
  cs->add_option("--data", cs_data, "Panel CSV")->required();
  cs->add_flag("--wide", cs_wide, "Input is a dense matrix CSV");
  cs->add_option("--model", cs_model, "re | fe");
  cs->add_option("--variance-mode", cs_mode, "tsh | th");
  cs->add_option("--level", cs_level, "Confidence level in (0,1)");
  cs->add_option("--grid", cs_grid, "rho grid as lo:hi:n (default -0.99:1:401)");
  cs->add_flag("--centered-opg", cs_centered, "Center the outer-product weight");
  cs->add_option("--out", cs_out, "Output file (default stdout)");

  // --- gmm-ar ---
  auto* ar = app.add_subcommand("gmm-ar", "Moment-based test of H0: rho = a");
  std::string ar_data, ar_out;
  bool ar_wide = false, ar_uncentered = false;
  double ar_a = 0.0;
  ar->add_option("--data", ar_data, "Panel CSV")->required();
  ar->add_flag("--wide", ar_wide, "Input is a dense matrix CSV");
  ar->add_option("--h0-rho", ar_a, "Hypothesized rho")->required();
  ar->add_flag("--uncentered-weight", ar_uncentered, "Use the uncentered moment covariance");
  ar->add_option("--out", ar_out, "Output file (default stdout)");

  // --- power ---
  auto* pw = app.add_subcommand("power", "Local asymptotic power curves");
  int pw_t = 4;
  std::string pw_variant = "qlm_c_tsh", pw_grid = "0.25:2:8", pw_out;
  pw->add_option("--t", pw_t, "Time periods (>= 4)")->required();
  pw->add_option("--variant", pw_variant, "qlm_c_tsh | gmm_ar | map");
  pw->add_option("--e-grid", pw_grid, "Local alternative scale grid as lo:hi:n");
  pw->add_option("--out", pw_out, "Output file (default stdout)");

  // --- verify ---
  auto* vf = app.add_subcommand("verify", "Re-run the closed-form identity checks");
  int vf_lo = 2, vf_hi = 12;
  vf->add_option("--t-min", vf_lo, "Smallest T");
  vf->add_option("--t-max", vf_hi, "Largest T");

  // --- mc ---
  auto* mc = app.add_subcommand("mc", "Monte Carlo size/power tables from a config file");
  std::string mc_spec, mc_out;
  int mc_jobs = 0;
  std::optional<std::uint64_t> mc_seed;
  std::string mc_layout = "paper";
  mc->add_option("--spec", mc_spec, "Experiment config file (key = value schema)")->required();
  mc->add_option("--seed", mc_seed, "Master seed (overrides the config)");
  mc->add_option("--jobs", mc_jobs, "Worker threads");
  mc->add_option("--layout", mc_layout, "paper | long");
  mc->add_option("--out", mc_out, "Output file prefix (writes .csv and .manifest.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      DgpConfig cfg;
      cfg.n = sim_n;
      cfg.t_len = sim_t;
      cfg.rho = sim_rho;
      cfg.sigma_mu_sq = sim_smu;
      cfg.seed = sim_seed;
      cfg.remove_time_effects = sim_demean;
      if (sim_err == "normal")
        cfg.error_dist = ErrorDist::normal;
      else if (sim_err == "chisq1_standardized")
        cfg.error_dist = ErrorDist::chisq1_standardized;
      else
        throw std::invalid_argument("unknown error distribution: " + sim_err);
      if (sim_init == "s_normal")
        cfg.init_design = InitDesign::s_normal;
      else if (sim_init == "s_chisq")
        cfg.init_design = InitDesign::s_chisq;
      else if (sim_init == "ns_normal")
        cfg.init_design = InitDesign::ns_normal;
      else
        throw std::invalid_argument("unknown initial-condition design: " + sim_init);
      const PanelData panel = generate(cfg);
      std::ofstream file;
      std::ostream& os = open_out(file, sim_out);
      sim_wide ? write_wide_csv(os, panel) : write_long_csv(os, panel);
    } else if (*est) {
      const PanelData panel = read_panel_csv(est_data, est_wide);
      const Model model = parse_model(est_model);
      const VarianceMode mode = parse_mode(est_mode);
      const Likelihood lik(panel, model, mode);
      if (!est_starts.empty()) est_opts.rho_starts = est_starts;
      const FitResult fr = est_h0 ? fit_restricted_rho(lik, *est_h0, est_opts)
                                  : fit_unrestricted(lik, est_opts);
      std::ofstream file;
      write_fit(open_out(file, est_out), fr, model, mode);
    } else if (*tst) {
      const PanelData panel = read_panel_csv(tst_data, tst_wide);
      TestOptions opts;
      opts.centered_opg = tst_centered;
      opts.mode = parse_mode(tst_mode);
      const Model model = parse_model(tst_model);
      const bool have_rho = tst->count("--h0-rho") > 0;
      const bool have_restriction = !tst_restriction.empty();
      if (have_rho == have_restriction)
        throw std::invalid_argument("test: give exactly one of --h0-rho or --restriction");
      TestResult tr;
      double a_report = tst_a;
      if (have_restriction) {
        const Eigen::MatrixXd a_mat = read_matrix_csv(tst_restriction[0]);
        const Eigen::MatrixXd a_raw = read_matrix_csv(tst_restriction[1]);
        if (a_raw.cols() != 1)
          throw std::invalid_argument("test: the restriction value file must be one column");
        const VectorXd a_vec = a_raw.col(0);
        a_report = std::numeric_limits<double>::quiet_NaN();
        try {
          tr = qlm_test(panel, model, a_mat, a_vec, opts);
        } catch (const UnitRootHypothesisError&) {
          tr = qlm1_test(panel, model, a_mat, a_vec, opts);
        }
      } else {
        tr = (tst_a == 1.0) ? qlm1_test_rho(panel, model, opts)
                            : qlm_test_rho(panel, model, tst_a, opts);
      }
      std::ofstream file;
      write_test_row(open_out(file, tst_out), tr, a_report, true);
    } else if (*cs) {
      const PanelData panel = read_panel_csv(cs_data, cs_wide);
      TestOptions opts;
      opts.centered_opg = cs_centered;
      opts.mode = parse_mode(cs_mode);
      const VectorXd grid = cs_grid.empty() ? default_rho_grid() : parse_grid(cs_grid);
      const ConfidenceSet set =
          confidence_set(panel, parse_model(cs_model), cs_level, grid, opts);
      std::ofstream file;
      std::ostream& os = open_out(file, cs_out);
      os << "level," << set.level << '\n';
      os << "intervals";
      for (const auto& iv : set.intervals) os << ",[" << iv.first << ';' << iv.second << ']';
      os << '\n';
      os << "rho,accepted,failed\n";
      for (Eigen::Index k = 0; k < grid.size(); ++k)
        os << grid(k) << ',' << (set.accepted[k] ? 1 : 0) << ',' << (set.failed[k] ? 1 : 0)
           << '\n';
    } else if (*ar) {
      const PanelData panel = read_panel_csv(ar_data, ar_wide);
      const TestResult tr = gmm_ar_test(panel, ar_a, !ar_uncentered);
      std::ofstream file;
      write_test_row(open_out(file, ar_out), tr, ar_a, true);
    } else if (*pw) {
      const VectorXd grid = parse_grid(pw_grid);
      PowerCurve curve;
      if (pw_variant == "qlm_c_tsh")
        curve = qlm_c_power_curve(pw_t, grid);
      else if (pw_variant == "gmm_ar")
        curve = gmm_ar_power_curve(pw_t, grid);
      else if (pw_variant == "map")
        curve = map_power_curve(pw_t, grid);
      else
        throw std::invalid_argument("unknown power variant: " + pw_variant);
      std::ofstream file;
      std::ostream& os = open_out(file, pw_out);
      os << "e,delta,df,power\n";
      for (const auto& pt : curve.points)
        os << pt.e << ',' << pt.delta << ',' << pt.df << ',' << pt.power << '\n';
    } else if (*vf) {
      if (vf_lo < 2 || vf_hi < vf_lo) throw std::invalid_argument("verify: bad T range");
      bool all = true;
      for (const auto& c : verify_constants(vf_lo, vf_hi)) {
        std::printf("[%s] %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str());
        all = all && c.pass;
      }
      if (!all) return 1;
    } else if (*mc) {
      std::ifstream is(mc_spec);
      if (!is) throw std::invalid_argument("cannot open spec file: " + mc_spec);
      ExperimentSpec spec = parse_experiment_spec(is);
      if (mc_seed) spec.master_seed = *mc_seed;
      if (!mc->count("--seed") && !spec.master_seed)
        throw std::invalid_argument("mc: a master seed is required (--seed or master_seed=)");
      if (mc_jobs > 0) spec.jobs = mc_jobs;
      const TableLayout layout =
          mc_layout == "long" ? TableLayout::long_form : TableLayout::paper;
      const auto t0 = std::chrono::steady_clock::now();
      const auto cells = run(spec);
      const double dt =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const std::string table = emit_table(cells, layout);
      if (mc_out.empty()) {
        std::cout << table;
      } else {
        std::ofstream csv(mc_out + ".csv");
        if (!csv) throw std::runtime_error("cannot open output file: " + mc_out + ".csv");
        csv << table;
        std::ofstream manifest(mc_out + ".manifest.json");
        manifest << run_manifest_json(spec, cells, dt) << '\n';
      }
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
