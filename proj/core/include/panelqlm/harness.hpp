#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "panelqlm/dgp.hpp"
#include "panelqlm/inference.hpp"

// Monte Carlo experiment runner: empirical size over a rho grid, or empirical
// power against the fixed null rho = 0.8, per design and sample size, with
// cross-sectional averages removed before testing. Replications are the unit
// of parallelism; every replication's draws are keyed on
// (master_seed, table_tag, cell, replication), so the table is a pure
// function of the spec regardless of worker count.

namespace panelqlm {

enum class ExperimentKind { size, power };

constexpr double kPowerNullRho = 0.8;

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::size;
  Model model = Model::re;
  int t_len = 4;
  int n = 100;
  double sigma_mu_sq = 1.0;
  std::vector<InitDesign> designs = {InitDesign::s_normal, InitDesign::s_chisq,
                                     InitDesign::ns_normal};
  std::vector<double> rho_values;  // size: null = truth grid; power: true-rho list
  int replications = 2500;
  double level = 0.05;
  std::uint64_t master_seed = 0;
  std::uint64_t table_tag = 0;
  bool centered_opg = false;
  int jobs = 1;

  void validate() const;
};

struct TableCell {
  ExperimentKind kind = ExperimentKind::size;
  Model model = Model::re;
  InitDesign design = InitDesign::s_normal;
  double rho = 0.0;  // truth
  int n = 0;
  int t_len = 0;
  double rejection_rate = 0.0;
  double mc_se = 0.0;
  int replications = 0;  // effective denominator
  int failures = 0;
  bool flagged = false;  // failure rate above 1%
};

std::vector<TableCell> run(const ExperimentSpec& spec);

enum class TableLayout { paper, long_form };

// paper layout: one row per rho, one column per (design, N); long layout has
// one row per cell. Cells may span several runs (e.g. both sample sizes).
std::string emit_table(const std::vector<TableCell>& cells, TableLayout layout);

// key = value config parsing; see the documented schema in the README.
ExperimentSpec parse_experiment_spec(std::istream& is);

// Provenance record written next to each table.
std::string run_manifest_json(const ExperimentSpec& spec, const std::vector<TableCell>& cells,
                              double elapsed_seconds);

const char* to_string(InitDesign d);
const char* to_string(ExperimentKind k);
const char* to_string(Model m);

}  // namespace panelqlm
