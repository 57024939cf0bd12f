#include "doctest.h"

#include <sstream>

#include "panelqlm/harness.hpp"

using namespace panelqlm;

namespace {

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::size;
  spec.model = Model::re;
  spec.t_len = 4;
  spec.n = 60;
  spec.rho_values = {0.2, 0.5};
  spec.replications = 40;
  spec.master_seed = 11;
  return spec;
}

}  // namespace

TEST_CASE("spec validation") {
  ExperimentSpec spec = small_spec();
  CHECK_NOTHROW(spec.validate());
  spec.rho_values = {};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec();
  spec.model = Model::fe;
  spec.sigma_mu_sq = 25.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec();
  spec.kind = ExperimentKind::power;
  spec.rho_values = {0.5, 1.0};
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("run produces one cell per design and rho") {
  const ExperimentSpec spec = small_spec();
  const auto cells = run(spec);
  REQUIRE(cells.size() == 6);  // 3 designs x 2 rho
  for (const auto& c : cells) {
    CHECK(c.rejection_rate >= 0.0);
    CHECK(c.rejection_rate <= 1.0);
    CHECK(c.replications + c.failures == 40);
    CHECK(c.mc_se >= 0.0);
  }
}

TEST_CASE("zero replications keep the schema intact") {
  ExperimentSpec spec = small_spec();
  spec.replications = 0;
  const auto cells = run(spec);
  REQUIRE(cells.size() == 6);
  for (const auto& c : cells) {
    CHECK(c.replications == 0);
    CHECK(c.rejection_rate == 0.0);
  }
  const std::string text = emit_table(cells, TableLayout::long_form);
  CHECK(text.find("kind,model,design") == 0);
}

TEST_CASE("results do not depend on the worker count") {
  ExperimentSpec spec = small_spec();
  spec.replications = 60;
  spec.jobs = 1;
  const auto a = run(spec);
  spec.jobs = 2;
  const auto b = run(spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].rejection_rate == b[k].rejection_rate);
    CHECK(a[k].failures == b[k].failures);
  }
}

TEST_CASE("table layouts") {
  ExperimentSpec spec = small_spec();
  spec.replications = 20;
  auto cells = run(spec);
  const std::string long_form = emit_table(cells, TableLayout::long_form);
  // Header plus one row per cell.
  CHECK(std::count(long_form.begin(), long_form.end(), '\n') == 7);

  const std::string paper = emit_table(cells, TableLayout::paper);
  CHECK(std::count(paper.begin(), paper.end(), '\n') == 3);  // header + 2 rho rows
  CHECK(paper.find("S-Normal N=60") != std::string::npos);

  cells.pop_back();
  CHECK_THROWS_AS(emit_table(cells, TableLayout::paper), std::invalid_argument);
}

TEST_CASE("config parsing round trip") {
  std::stringstream ss(
      "kind = power\n"
      "model = fe\n"
      "t = 9\n"
      "n = 250\n"
      "# comment line\n"
      "designs = s_normal, ns_normal\n"
      "rho_values = 0.5, 0.7\n"
      "replications = 123\n"
      "level = 0.05\n"
      "master_seed = 987\n"
      "jobs = 2\n");
  const ExperimentSpec spec = parse_experiment_spec(ss);
  CHECK(spec.kind == ExperimentKind::power);
  CHECK(spec.model == Model::fe);
  CHECK(spec.t_len == 9);
  CHECK(spec.n == 250);
  CHECK(spec.designs.size() == 2);
  CHECK(spec.rho_values.size() == 2);
  CHECK(spec.replications == 123);
  CHECK(spec.master_seed == 987);
  CHECK(spec.jobs == 2);

  std::stringstream bad("bogus_key = 1\n");
  CHECK_THROWS_AS(parse_experiment_spec(bad), std::runtime_error);
}

TEST_CASE("manifest is valid JSON with the headline fields") {
  const ExperimentSpec spec = small_spec();
  const auto cells = run(spec);
  const std::string manifest = run_manifest_json(spec, cells, 1.5);
  CHECK(manifest.find("\"master_seed\": 11") != std::string::npos);
  CHECK(manifest.find("\"cells\": 6") != std::string::npos);
  CHECK(manifest.find("panelqlm") != std::string::npos);
}

TEST_CASE("size sanity at the tabulated scale") {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::size;
  spec.model = Model::re;
  spec.t_len = 4;
  spec.n = 250;
  spec.designs = {InitDesign::s_normal};
  spec.rho_values = {0.8};
  spec.replications = 2500;
  spec.master_seed = 314159;
  spec.jobs = 2;
  const auto cells = run(spec);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].rejection_rate > 0.035);
  CHECK(cells[0].rejection_rate < 0.065);
  CHECK(cells[0].failures == 0);
}
