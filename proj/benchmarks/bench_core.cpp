#include <benchmark/benchmark.h>

#include <random>

#include "tubempc/config.hpp"
#include "tubempc/harness.hpp"

using namespace tubempc;

namespace {

const Experiment& crane() {
  static const Experiment ex = Experiment::build(default_config());
  return ex;
}

HPolytope random_polytope(int dim, int rows, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  MatrixXd C(rows + 2 * dim, dim);
  VectorXd d(rows + 2 * dim);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < dim; ++j) C(i, j) = g(rng);
    d(i) = 1.0;
  }
  C.bottomRows(2 * dim) << MatrixXd::Identity(dim, dim), -MatrixXd::Identity(dim, dim);
  d.tail(2 * dim).setConstant(2.0);
  return HPolytope(C, d);
}

}  // namespace

static void BM_LpSupport(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const HPolytope P = random_polytope(dim, 8 * dim, 3);
  const auto dirs = sphere_directions(dim, 64, 5);
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(support(P, dirs[k++ % dirs.size()]));
}
BENCHMARK(BM_LpSupport)->Arg(2)->Arg(6)->Arg(12);

static void BM_TubeSupport(benchmark::State& state) {
  const SupportSet& Z = crane().syn.Z;
  const auto dirs = sphere_directions(6, 64, 7);
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(Z.support(dirs[k++ % dirs.size()]));
}
BENCHMARK(BM_TubeSupport);

static void BM_TubeMembership(benchmark::State& state) {
  const SupportSet& Z = crane().syn.Z;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (auto _ : state) {
    VectorXd e(6);
    for (int i = 0; i < 6; ++i) e(i) = u(rng);
    benchmark::DoNotOptimize(contains_point(Z, e, 1e-6));
  }
}
BENCHMARK(BM_TubeMembership)->Unit(benchmark::kMicrosecond);

static void BM_TubeQp(benchmark::State& state) {
  const Experiment& ex = crane();
  MpcConfig mpc = ex.mpc;
  mpc.optimize_z0 = state.range(0) != 0;
  const TubeQp t = build_qp(ex.cfg.scenario.x0, ex.syn, mpc);
  for (auto _ : state) benchmark::DoNotOptimize(solve_qp(t.qp));
  state.counters["vars"] = t.qp.num_vars();
}
BENCHMARK(BM_TubeQp)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_ControlStep(benchmark::State& state) {
  const Experiment& ex = crane();
  const RunConfig* cfg = &ex.cfg;
  for (auto _ : state) {
    TubeMpcController ctl(ex.syn, ex.mpc, &ex.model,
                          [cfg](const VectorXd& x) { return scheduling_point(*cfg, x); });
    benchmark::DoNotOptimize(ctl.control_step(ex.cfg.scenario.x0));
  }
}
BENCHMARK(BM_ControlStep)->Unit(benchmark::kMillisecond);

static void BM_NmpcSolve(benchmark::State& state) {
  const Experiment& ex = crane();
  const NmpcConfig nc = nmpc_config_from(ex.syn, ex.mpc.Q, ex.mpc.R, ex.mpc.N);
  const auto& sc = ex.cfg.scenario;
  const StepFn F = crane_rk4_map(ex.crane(), sc.m_l, sc.beta_d, ex.cfg.model.Ts);
  VectorXd x(6);
  x << 1.2, 0, 1.9, 0, 0.5, 0;
  for (auto _ : state) benchmark::DoNotOptimize(sqp_solve(transcribe_ms(x, nc.N, 2, F), x, F, nc));
}
BENCHMARK(BM_NmpcSolve)->Unit(benchmark::kMillisecond);

static void BM_Synthesis(benchmark::State& state) {
  const RunConfig cfg = default_config();
  const PolytopicLPV model = build_model(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(synthesize(model, cfg.synthesis));
}
BENCHMARK(BM_Synthesis)->Unit(benchmark::kMillisecond)->Iterations(3);

BENCHMARK_MAIN();
