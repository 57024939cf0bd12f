#include "panelqlm/dgp.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace panelqlm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2) + splitmix64(b)));
}

CounterStream::CounterStream(std::uint64_t seed, std::uint64_t replication, std::uint64_t unit)
    : key_(mix_seed(mix_seed(seed, replication), unit)) {}

double CounterStream::next_uniform() {
  const std::uint64_t bits = splitmix64(key_ ^ splitmix64(counter_++));
  // 53 significant bits, shifted into (0, 1).
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double CounterStream::next_normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

double CounterStream::next_chisq1_standardized() {
  const double z = next_normal();
  return (z * z - 1.0) / std::sqrt(2.0);
}

void DgpConfig::validate() const {
  if (n < 2) throw std::invalid_argument("DgpConfig: need at least 2 individuals");
  if (t_len < 3) throw std::invalid_argument("DgpConfig: need at least 3 time periods");
  if (!(rho > -1.0 && rho <= 1.0)) throw std::invalid_argument("DgpConfig: rho must be in (-1, 1]");
  if (sigma_mu_sq < 0.0) throw std::invalid_argument("DgpConfig: sigma_mu_sq must be >= 0");
  if (eps_scale < 0.0) throw std::invalid_argument("DgpConfig: eps_scale must be >= 0");
  const bool stationary_init = init_design != InitDesign::ns_normal;
  if (stationary_init && rho == 1.0)
    throw std::invalid_argument("DgpConfig: stationary initial conditions require |rho| < 1");
  if (init_design == InitDesign::s_chisq && error_dist != ErrorDist::chisq1_standardized)
    throw std::invalid_argument("DgpConfig: the S-ChiSq design pairs with chi-square errors");
  if (init_design != InitDesign::s_chisq && error_dist == ErrorDist::chisq1_standardized)
    throw std::invalid_argument("DgpConfig: chi-square errors pair with the S-ChiSq design");
}

PanelData generate(const DgpConfig& config) {
  config.validate();
  PanelData out;
  out.y.resize(config.n, config.t_len);
  out.config = config;

  for (int i = 0; i < config.n; ++i) {
    CounterStream stream(config.seed, config.replication, static_cast<std::uint64_t>(i));

    const double mu = config.mu_override
                          ? *config.mu_override
                          : std::sqrt(config.sigma_mu_sq) * stream.next_normal();

    double v1 = 0.0;
    switch (config.init_design) {
      case InitDesign::ns_normal:
        v1 = 0.0;
        break;
      case InitDesign::s_normal:
        v1 = stream.next_normal() / std::sqrt(1.0 - config.rho * config.rho);
        break;
      case InitDesign::s_chisq:
        v1 = stream.next_chisq1_standardized() / std::sqrt(1.0 - config.rho * config.rho);
        break;
    }

    out.y(i, 0) = mu + v1;
    for (int t = 1; t < config.t_len; ++t) {
      double eps = (config.error_dist == ErrorDist::normal) ? stream.next_normal()
                                                            : stream.next_chisq1_standardized();
      eps *= config.eps_scale;
      out.y(i, t) = config.rho * out.y(i, t - 1) + (1.0 - config.rho) * mu + eps;
    }
  }

  if (config.remove_time_effects) return demean_time_effects(out);
  return out;
}

PanelData demean_time_effects(const PanelData& data) {
  if (data.n() < 2) throw std::invalid_argument("demean_time_effects: need at least 2 individuals");
  PanelData out = data;
  const Eigen::RowVectorXd col_means = data.y.colwise().mean();
  out.y.rowwise() -= col_means;
  return out;
}

}  // namespace panelqlm
