#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>

// Synthetic panel generation for the AR(1) model
//   y_{i,t} = rho * y_{i,t-1} + (1 - rho) * mu_i + eps_{i,t},  t = 2..T,
// under the three initial-condition designs and two error laws used by the
// simulation study. Draws come from a counter-based stream keyed on
// (seed, replication, individual), so a panel is a pure function of its
// config and replication workers can run in any order.

namespace panelqlm {

enum class ErrorDist { normal, chisq1_standardized };
enum class InitDesign { s_normal, s_chisq, ns_normal };

struct DgpConfig {
  int n = 0;                 // individuals (>= 2)
  int t_len = 0;             // time periods (>= 3)
  double rho = 0.0;          // in (-1, 1]
  double sigma_mu_sq = 1.0;  // variance of the individual effects
  ErrorDist error_dist = ErrorDist::normal;
  InitDesign init_design = InitDesign::s_normal;
  bool remove_time_effects = false;
  std::uint64_t seed = 0;
  std::uint64_t replication = 0;  // substream index

  // Test hooks: scale the idiosyncratic errors (0 silences them entirely)
  // and optionally pin every mu_i to a constant.
  double eps_scale = 1.0;
  std::optional<double> mu_override;

  void validate() const;  // throws std::invalid_argument on bad combinations
};

struct PanelData {
  Eigen::MatrixXd y;  // N x T, row i = (y_{i,1}, ..., y_{i,T})
  std::optional<DgpConfig> config;
  std::string source;  // tag for externally loaded panels

  int n() const { return static_cast<int>(y.rows()); }
  int t_len() const { return static_cast<int>(y.cols()); }
};

// Deterministic counter-based substream: every draw is a hash of
// (key, counter), so streams with distinct keys never overlap.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t replication, std::uint64_t unit);

  double next_uniform();  // in (0, 1)
  double next_normal();
  double next_chisq1_standardized();  // (chi^2(1) - 1) / sqrt(2)

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Hash combiner for deriving per-cell / per-replication seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

PanelData generate(const DgpConfig& config);

// Subtract cross-sectional (per time period) averages. Idempotent; N >= 2.
PanelData demean_time_effects(const PanelData& data);

}  // namespace panelqlm
