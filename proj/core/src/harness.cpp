#include "panelqlm/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "json.hpp"

namespace panelqlm {

namespace {

ErrorDist error_dist_for(InitDesign d) {
  return d == InitDesign::s_chisq ? ErrorDist::chisq1_standardized : ErrorDist::normal;
}

// One replication: simulate, demean, test the null, return 1 on rejection,
// 0 on acceptance, -1 on failure.
int one_replication(const ExperimentSpec& spec, InitDesign design, double truth_rho,
                    std::uint64_t cell_id, int rep) {
  DgpConfig cfg;
  cfg.n = spec.n;
  cfg.t_len = spec.t_len;
  cfg.rho = truth_rho;
  cfg.sigma_mu_sq = spec.sigma_mu_sq;
  cfg.error_dist = error_dist_for(design);
  cfg.init_design = design;
  cfg.seed = mix_seed(mix_seed(spec.master_seed, spec.table_tag), cell_id);
  cfg.replication = static_cast<std::uint64_t>(rep);

  const double a = (spec.kind == ExperimentKind::size) ? truth_rho : kPowerNullRho;
  TestOptions topts;
  topts.centered_opg = spec.centered_opg;
  topts.mode = VarianceMode::tsh;

  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      const PanelData panel = demean_time_effects(generate(cfg));
      const TestResult tr = (a == 1.0) ? qlm1_test_rho(panel, spec.model, topts)
                                       : qlm_test_rho(panel, spec.model, a, topts);
      if (!std::isfinite(tr.statistic)) throw std::runtime_error("non-finite statistic");
      return tr.p_value < spec.level ? 1 : 0;
    } catch (const std::exception&) {
      // Retry once with the numeric fallback optimizer before excluding.
      topts.fit.profile_scan_points = 81;
      topts.fit.max_iterations = 600;
    }
  }
  return -1;
}

}  // namespace

void ExperimentSpec::validate() const {
  if (t_len < 3) throw std::invalid_argument("ExperimentSpec: need T >= 3");
  if (n < 2) throw std::invalid_argument("ExperimentSpec: need N >= 2");
  if (replications < 0) throw std::invalid_argument("ExperimentSpec: negative replications");
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("ExperimentSpec: level must be in (0, 1)");
  if (designs.empty()) throw std::invalid_argument("ExperimentSpec: no designs");
  if (rho_values.empty()) throw std::invalid_argument("ExperimentSpec: no rho values");
  if (model == Model::fe && sigma_mu_sq != 1.0)
    throw std::invalid_argument(
        "ExperimentSpec: the FE statistic is invariant to the effect variance; "
        "scaled-effects experiments are RE only");
  for (double r : rho_values) {
    if (!(r > -1.0 && r <= 1.0))
      throw std::invalid_argument("ExperimentSpec: rho values must be in (-1, 1]");
    if (kind == ExperimentKind::size && r == 1.0) continue;
    if (r == 1.0)
      throw std::invalid_argument("ExperimentSpec: power experiments need |true rho| < 1");
  }
  if (jobs < 1) throw std::invalid_argument("ExperimentSpec: jobs must be >= 1");
}

std::vector<TableCell> run(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<TableCell> cells;

  std::uint64_t cell_id = 0;
  for (InitDesign design : spec.designs) {
    for (double rho : spec.rho_values) {
      TableCell cell;
      cell.kind = spec.kind;
      cell.model = spec.model;
      cell.design = design;
      cell.rho = rho;
      cell.n = spec.n;
      cell.t_len = spec.t_len;

      const int reps = spec.replications;
      std::vector<signed char> outcome(reps, 0);
      auto worker = [&](int lo, int hi) {
        for (int r = lo; r < hi; ++r)
          outcome[r] =
              static_cast<signed char>(one_replication(spec, design, rho, cell_id, r));
      };
      if (spec.jobs <= 1 || reps < 2 * spec.jobs) {
        worker(0, reps);
      } else {
        std::vector<std::thread> pool;
        const int chunk = (reps + spec.jobs - 1) / spec.jobs;
        for (int j = 0; j < spec.jobs; ++j) {
          const int lo = j * chunk;
          const int hi = std::min(reps, lo + chunk);
          if (lo < hi) pool.emplace_back(worker, lo, hi);
        }
        for (auto& th : pool) th.join();
      }

      int rejections = 0, failures = 0;
      for (signed char o : outcome) {
        if (o < 0)
          ++failures;
        else
          rejections += o;
      }
      const int effective = reps - failures;
      cell.replications = effective;
      cell.failures = failures;
      cell.flagged = reps > 0 && failures > 0.01 * reps;
      cell.rejection_rate = effective > 0 ? static_cast<double>(rejections) / effective : 0.0;
      cell.mc_se = effective > 0
                       ? std::sqrt(cell.rejection_rate * (1.0 - cell.rejection_rate) / effective)
                       : 0.0;
      cells.push_back(cell);
      ++cell_id;
    }
  }
  return cells;
}

const char* to_string(InitDesign d) {
  switch (d) {
    case InitDesign::s_normal: return "S-Normal";
    case InitDesign::s_chisq: return "S-ChiSq";
    case InitDesign::ns_normal: return "NS-Normal";
  }
  return "?";
}

const char* to_string(ExperimentKind k) {
  return k == ExperimentKind::size ? "size" : "power";
}

const char* to_string(Model m) { return m == Model::re ? "re" : "fe"; }

std::string emit_table(const std::vector<TableCell>& cells, TableLayout layout) {
  std::ostringstream os;
  if (layout == TableLayout::long_form) {
    os << "kind,model,design,t,n,rho,rejection_rate,mc_se,replications,failures,flagged\n";
    for (const auto& c : cells) {
      os << to_string(c.kind) << ',' << to_string(c.model) << ',' << to_string(c.design) << ','
         << c.t_len << ',' << c.n << ',' << c.rho << ',' << c.rejection_rate << ',' << c.mc_se
         << ',' << c.replications << ',' << c.failures << ',' << (c.flagged ? 1 : 0) << '\n';
    }
    return os.str();
  }

  // paper layout: rho rows, (design, N) columns.
  std::set<double> rhos;
  std::set<int> ns;
  std::set<int> design_order;
  std::map<std::tuple<int, int, long long>, const TableCell*> lookup;
  for (const auto& c : cells) {
    rhos.insert(c.rho);
    ns.insert(c.n);
    design_order.insert(static_cast<int>(c.design));
    lookup[{static_cast<int>(c.design), c.n, std::llround(c.rho * 1e6)}] = &c;
  }
  os << "rho";
  for (int d : design_order)
    for (int n : ns) os << ',' << to_string(static_cast<InitDesign>(d)) << " N=" << n;
  os << '\n';
  for (double rho : rhos) {
    os << rho;
    for (int d : design_order)
      for (int n : ns) {
        const auto it = lookup.find({d, n, std::llround(rho * 1e6)});
        if (it == lookup.end())
          throw std::invalid_argument("emit_table: missing cell for the paper layout");
        os << ',' << it->second->rejection_rate;
      }
    os << '\n';
  }
  return os.str();
}

ExperimentSpec parse_experiment_spec(std::istream& is) {
  ExperimentSpec spec;
  spec.designs.clear();
  spec.rho_values.clear();
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error("experiment spec line " + std::to_string(lineno) + ": " + msg);
  };
  auto split_list = [](const std::string& s) {
    std::vector<std::string> items;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        items.push_back(cur);
        cur.clear();
      } else if (!isspace(static_cast<unsigned char>(c))) {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) items.push_back(cur);
    return items;
  };

  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = true;
      for (char c : line)
        if (!isspace(static_cast<unsigned char>(c))) blank = false;
      if (blank) continue;
      fail("expected key = value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "kind") {
        if (value == "size")
          spec.kind = ExperimentKind::size;
        else if (value == "power")
          spec.kind = ExperimentKind::power;
        else
          fail("kind must be size or power");
      } else if (key == "model") {
        if (value == "re")
          spec.model = Model::re;
        else if (value == "fe")
          spec.model = Model::fe;
        else
          fail("model must be re or fe");
      } else if (key == "t") {
        spec.t_len = std::stoi(value);
      } else if (key == "n") {
        spec.n = std::stoi(value);
      } else if (key == "sigma_mu_sq") {
        spec.sigma_mu_sq = std::stod(value);
      } else if (key == "designs") {
        for (const auto& item : split_list(value)) {
          if (item == "s_normal")
            spec.designs.push_back(InitDesign::s_normal);
          else if (item == "s_chisq")
            spec.designs.push_back(InitDesign::s_chisq);
          else if (item == "ns_normal")
            spec.designs.push_back(InitDesign::ns_normal);
          else
            fail("unknown design '" + item + "'");
        }
      } else if (key == "rho_values") {
        for (const auto& item : split_list(value)) spec.rho_values.push_back(std::stod(item));
      } else if (key == "replications") {
        spec.replications = std::stoi(value);
      } else if (key == "level") {
        spec.level = std::stod(value);
      } else if (key == "master_seed") {
        spec.master_seed = std::stoull(value);
      } else if (key == "table_tag") {
        spec.table_tag = std::stoull(value);
      } else if (key == "centered_opg") {
        spec.centered_opg = (value == "true" || value == "1");
      } else if (key == "jobs") {
        spec.jobs = std::stoi(value);
      } else {
        fail("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      fail("cannot parse value '" + value + "'");
    }
  }
  if (spec.designs.empty())
    spec.designs = {InitDesign::s_normal, InitDesign::s_chisq, InitDesign::ns_normal};
  return spec;
}

std::string run_manifest_json(const ExperimentSpec& spec, const std::vector<TableCell>& cells,
                              double elapsed_seconds) {
  nlohmann::json j;
  j["library"] = "panelqlm 0.1.0";
  j["kind"] = to_string(spec.kind);
  j["model"] = to_string(spec.model);
  j["t"] = spec.t_len;
  j["n"] = spec.n;
  j["sigma_mu_sq"] = spec.sigma_mu_sq;
  j["replications"] = spec.replications;
  j["level"] = spec.level;
  j["master_seed"] = spec.master_seed;
  j["table_tag"] = spec.table_tag;
  j["centered_opg"] = spec.centered_opg;
  j["jobs"] = spec.jobs;
  j["elapsed_seconds"] = elapsed_seconds;
  int failures = 0;
  for (const auto& c : cells) failures += c.failures;
  j["total_failures"] = failures;
  j["cells"] = cells.size();
  return j.dump(2);
}

}  // namespace panelqlm
