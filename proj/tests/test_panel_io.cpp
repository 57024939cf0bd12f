#include "doctest.h"

#include <sstream>

#include "panelqlm/dgp.hpp"
#include "panelqlm/panel_io.hpp"

using namespace panelqlm;

namespace {

PanelData sample_panel() {
  DgpConfig cfg;
  cfg.n = 7;
  cfg.t_len = 5;
  cfg.rho = 0.9;
  cfg.seed = 99;
  return generate(cfg);
}

}  // namespace

TEST_CASE("long CSV round trip is lossless") {
  const PanelData panel = sample_panel();
  std::stringstream ss;
  write_long_csv(ss, panel);
  const PanelData back = read_long_csv(ss);
  REQUIRE(back.n() == panel.n());
  REQUIRE(back.t_len() == panel.t_len());
  CHECK((back.y - panel.y).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("wide CSV round trip is lossless") {
  const PanelData panel = sample_panel();
  std::stringstream ss;
  write_wide_csv(ss, panel);
  const PanelData back = read_wide_csv(ss);
  CHECK((back.y - panel.y).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("malformed input is rejected with a message") {
  {
    std::stringstream ss("id,t\n1,1\n");
    CHECK_THROWS_WITH_AS(read_long_csv(ss), doctest::Contains("header"), std::runtime_error);
  }
  {
    std::stringstream ss("id,t,y\n1,1,0.5\n1,2,0.5\n");  // T = 2 after parsing
    CHECK_THROWS_AS(read_long_csv(ss), std::runtime_error);
  }
  {
    std::stringstream ss("id,t,y\n1,1,abc\n");
    CHECK_THROWS_WITH_AS(read_long_csv(ss), doctest::Contains("malformed"), std::runtime_error);
  }
  {
    std::stringstream ss("1,2,3\n4,5\n");
    CHECK_THROWS_WITH_AS(read_wide_csv(ss), doctest::Contains("ragged"), std::runtime_error);
  }
  {
    // Unbalanced long panel.
    std::stringstream ss("id,t,y\n1,1,0\n1,2,0\n1,3,0\n2,1,0\n");
    CHECK_THROWS_AS(read_long_csv(ss), std::runtime_error);
  }
}
