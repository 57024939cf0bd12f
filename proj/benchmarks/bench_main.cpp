#include <benchmark/benchmark.h>

#include "panelqlm/dgp.hpp"
#include "panelqlm/estimation.hpp"
#include "panelqlm/expected.hpp"
#include "panelqlm/inference.hpp"

namespace {

using namespace panelqlm;

PanelData bench_panel(int n, int t_len, double rho) {
  DgpConfig cfg;
  cfg.n = n;
  cfg.t_len = t_len;
  cfg.rho = rho;
  cfg.seed = 12345;
  return generate(cfg);
}

void BM_Generate(benchmark::State& state) {
  DgpConfig cfg;
  cfg.n = static_cast<int>(state.range(0));
  cfg.t_len = 4;
  cfg.rho = 0.8;
  cfg.seed = 1;
  for (auto _ : state) {
    cfg.replication++;
    benchmark::DoNotOptimize(generate(cfg));
  }
  state.SetItemsProcessed(state.iterations() * cfg.n);
}
BENCHMARK(BM_Generate)->Arg(250)->Arg(1000);

void BM_LoglikScore(benchmark::State& state) {
  const PanelData panel = bench_panel(static_cast<int>(state.range(0)), 4, 0.8);
  const Likelihood lik(panel, Model::re, VarianceMode::tsh);
  VectorXd theta(4);
  theta << 0.8, 0.2, 1.0, 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lik.loglik(theta));
    benchmark::DoNotOptimize(lik.score(theta));
  }
  state.SetItemsProcessed(state.iterations() * panel.n());
}
BENCHMARK(BM_LoglikScore)->Arg(250)->Arg(1000);

void BM_RestrictedFit(benchmark::State& state) {
  const PanelData panel = bench_panel(static_cast<int>(state.range(0)), 4, 0.8);
  const Likelihood lik(panel, Model::re, VarianceMode::tsh);
  for (auto _ : state) benchmark::DoNotOptimize(fit_restricted_rho(lik, 0.8));
}
BENCHMARK(BM_RestrictedFit)->Arg(250)->Arg(1000);

void BM_QlmTest(benchmark::State& state) {
  const PanelData panel = bench_panel(static_cast<int>(state.range(0)), 4, 0.8);
  for (auto _ : state) benchmark::DoNotOptimize(qlm_test_rho(panel, Model::re, 0.8));
}
BENCHMARK(BM_QlmTest)->Arg(250)->Arg(1000);

void BM_UnitRootTest(benchmark::State& state) {
  DgpConfig cfg;
  cfg.n = static_cast<int>(state.range(0));
  cfg.t_len = 4;
  cfg.rho = 1.0;
  cfg.init_design = InitDesign::ns_normal;
  cfg.seed = 7;
  const PanelData panel = generate(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(qlm1_test_rho(panel, Model::fe));
}
BENCHMARK(BM_UnitRootTest)->Arg(250)->Arg(1000);

void BM_ExpectedHessian(benchmark::State& state) {
  const ExpectedLikelihood ex(Model::fe, VarianceMode::tsh, static_cast<int>(state.range(0)));
  VectorXd tn(3);
  tn << 0.8, 0.2, 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(ex.hessian_n(tn));
}
BENCHMARK(BM_ExpectedHessian)->Arg(4)->Arg(9);

void BM_GmmArTest(benchmark::State& state) {
  const PanelData panel = bench_panel(static_cast<int>(state.range(0)), 4, 0.8);
  for (auto _ : state) benchmark::DoNotOptimize(gmm_ar_test(panel, 0.8));
}
BENCHMARK(BM_GmmArTest)->Arg(250)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
