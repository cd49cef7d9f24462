#include "tubempc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

namespace tubempc {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t run_seed(std::uint64_t master, int index) {
  return splitmix64(master + static_cast<std::uint64_t>(index));
}

VectorXd sample_w(const HPolytope& W, std::mt19937_64& rng) {
  const int n = W.dim();
  VectorXd lo(n), hi(n);
  for (int i = 0; i < n; ++i) {
    const VectorXd e = VectorXd::Unit(n, i);
    hi(i) = support(W, e);
    lo(i) = -support(W, -e);
  }
  if (!lo.allFinite() || !hi.allFinite() || (lo.array() > hi.array()).any())
    throw std::invalid_argument("sample_w: W must be bounded and non-empty");
  std::uniform_real_distribution<double> U(0.0, 1.0);
  VectorXd w(n);
  for (int tries = 0; tries < 10000; ++tries) {
    for (int i = 0; i < n; ++i) w(i) = lo(i) + (hi(i) - lo(i)) * U(rng);
    if (contains_point(W, w, 0.0)) return w;
  }
  throw std::runtime_error("sample_w: rejection sampling did not hit W");
}

std::pair<MatrixXd, MatrixXd> sample_delta(const PolytopicLPV& model, const VectorXd& p,
                                           const DeltaBounds& bounds, std::mt19937_64& rng) {
  const LinearVertex ref = model.evaluate(p);
  MatrixXd dA = MatrixXd::Zero(model.n(), model.n());
  MatrixXd dB = MatrixXd::Zero(model.n(), model.m());
  if (!(bounds.A > 0.0) && !(bounds.B > 0.0)) return {dA, dB};

  std::exponential_distribution<double> E(1.0);
  const auto norm = [](const MatrixXd& M) { return M.cwiseAbs().rowwise().sum().maxCoeff(); };
  VectorXd sigma(model.num_vertices());
  for (int tries = 0; tries < 100; ++tries) {
    // Flat Dirichlet weights.
    for (int j = 0; j < sigma.size(); ++j) sigma(j) = E(rng);
    sigma /= sigma.sum();
    const LinearVertex v = model.combine(sigma);
    dA = v.A - ref.A;
    dB = v.B - ref.B;
    if (norm(dA) <= bounds.A && norm(dB) <= bounds.B) return {dA, dB};
  }
  // Shrink along the segment towards (A(p), B(p)); both stay in the hull.
  double t = 1.0;
  const double nA = norm(dA), nB = norm(dB);
  if (nA > bounds.A) t = std::min(t, bounds.A / nA);
  if (nB > bounds.B) t = std::min(t, bounds.B / nB);
  return {t * dA, t * dB};
}

Disturbance sample_disturbance(const PolytopicLPV& model, const VectorXd& p,
                               const DeltaBounds& bounds, std::mt19937_64& rng) {
  Disturbance d;
  d.w = sample_w(model.W(), rng);
  std::tie(d.dA, d.dB) = sample_delta(model, p, bounds, rng);
  return d;
}

Experiment Experiment::build(const RunConfig& cfg) {
  PolytopicLPV model = build_model(cfg);
  TubeSynthesis syn = synthesize(model, cfg.synthesis);
  Experiment ex{cfg, std::move(model), std::move(syn), {}};
  ex.mpc = resolve_mpc(cfg, ex.model);
  return ex;
}

Experiment Experiment::from_synthesis(const RunConfig& cfg, TubeSynthesis syn) {
  Experiment ex{cfg, build_model(cfg), std::move(syn), {}};
  ex.mpc = resolve_mpc(cfg, ex.model);
  return ex;
}

bool RunLog::all_tube() const {
  return std::all_of(steps.begin(), steps.end(), [](const StepRecord& s) { return s.tube_member; });
}

RunOptions RunOptions::from(const ScenarioConfig& s) {
  RunOptions o;
  o.steps = s.steps;
  o.mode2_stop = s.mode2_stop;
  o.controller = s.controller;
  o.plant = s.plant;
  o.delta_mode = s.delta_mode;
  o.disturbances = s.disturbances;
  return o;
}

namespace {

// Controller behind a common call; only one of the two is live.
class AnyController {
 public:
  AnyController(const Experiment& ex, ControllerKind kind) {
    const auto& sc = ex.cfg.scenario;
    if (kind == ControllerKind::tmpc) {
      const RunConfig* cfg = &ex.cfg;
      tmpc_.emplace(ex.syn, ex.mpc, &ex.model,
                    [cfg](const VectorXd& x) { return scheduling_point(*cfg, x); });
    } else {
      const CraneSurrogate crane = ex.crane();
      nmpc_.emplace(nmpc_config_from(ex.syn, ex.mpc.Q, ex.mpc.R, ex.mpc.N),
                    crane_rk4_map(crane, sc.m_l, sc.beta_d, ex.cfg.model.Ts));
    }
  }

  ControlStep step(const VectorXd& x) { return tmpc_ ? tmpc_->control_step(x) : nmpc_->control_step(x); }

  std::vector<VectorXd> plan() const {
    if (tmpc_ && tmpc_->last_plan()) return tmpc_->last_plan()->z;
    if (nmpc_ && nmpc_->last_result()) return nmpc_->last_result()->iterate.z;
    return {};
  }

 private:
  std::optional<TubeMpcController> tmpc_;
  std::optional<NmpcController> nmpc_;
};

}  // namespace

RunLog run_closed_loop(const Experiment& ex, const VectorXd& x0, const RunOptions& opt,
                       std::uint64_t master_seed, int index) {
  if (x0.size() != ex.syn.n() || !x0.allFinite())
    throw std::invalid_argument("run_closed_loop: bad initial state");
  RunLog log;
  log.seed = run_seed(master_seed, index);
  std::mt19937_64 rng(log.seed);
  const auto& sc = ex.cfg.scenario;
  const double Ts = ex.cfg.model.Ts;
  const CraneSurrogate crane = ex.crane();
  const DeltaBounds bounds = ex.delta_bounds();
  AnyController ctl(ex, opt.controller);

  std::optional<std::pair<MatrixXd, MatrixXd>> fixed_delta;
  VectorXd x = x0;
  int mode2_run = 0;
  log.stop_reason = "budget";
  for (int k = 0; k < opt.steps; ++k) {
    const ControlStep st = ctl.step(x);
    if (k == 0 && opt.record_plan0) log.plan0 = ctl.plan();

    StepRecord r;
    r.step = k;
    r.x = x;
    r.z0 = st.z0;
    r.u = st.u;
    r.mode = st.mode;
    r.feasible = st.feasible;
    r.tube_member = st.tube_member;
    r.fallback = st.fallback;
    r.qp = st.qp;
    r.slack_total = st.slack_total;
    r.cost = st.cost;
    r.stage_cost = st.stage_cost;
    log.steps.push_back(r);

    if (!st.feasible) {
      ++log.infeasible_steps;
      if (k == 0) log.infeasible_at_start = true;
    }
    if (st.fallback) ++log.fallbacks;
    if (!ex.syn.M.satisfied(x, st.u, opt.constraint_tol)) ++log.violations;
    if (st.mode == 2 && log.steps_to_terminal < 0) log.steps_to_terminal = k;

    // Plant.
    VectorXd w = VectorXd::Zero(x.size());
    if (opt.disturbances) w = sample_w(ex.model.W(), rng);
    if (opt.plant == PlantKind::lpv) {
      const VectorXd p = scheduling_point(ex.cfg, x);
      const LinearVertex lv = ex.model.evaluate(p);
      MatrixXd A = lv.A, B = lv.B;
      if (opt.disturbances) {
        if (opt.delta_mode == DeltaMode::per_run) {
          if (!fixed_delta) fixed_delta = sample_delta(ex.model, p, bounds, rng);
          A += fixed_delta->first;
          B += fixed_delta->second;
        } else {
          const auto [dA, dB] = sample_delta(ex.model, p, bounds, rng);
          A += dA;
          B += dB;
        }
      }
      x = A * x + B * st.u + w;
    } else {
      x = crane.rk4_step(x, st.u, sc.m_l, sc.beta_d, Ts) + w;
    }
    if (!x.allFinite()) {
      log.stop_reason = "diverged";
      break;
    }

    mode2_run = st.mode == 2 ? mode2_run + 1 : 0;
    if (opt.mode2_stop > 0 && mode2_run >= opt.mode2_stop) {
      log.stop_reason = "mode2";
      break;
    }
    if (opt.settle_tol > 0.0 && st.mode == 2 && x.lpNorm<Eigen::Infinity>() < opt.settle_tol) {
      log.stop_reason = "settled";
      break;
    }
  }
  log.x_final = x;
  if (!contains_point(ex.syn.M.state_part(), x, opt.constraint_tol)) ++log.violations;
  return log;
}

CostCheck check_cost_decrease(const RunLog& log, double tol, double slack_tol) {
  CostCheck c;
  for (std::size_t k = 0; k + 1 < log.steps.size(); ++k) {
    const auto& a = log.steps[k];
    const auto& b = log.steps[k + 1];
    if (!a.qp || !b.qp) continue;
    const double excess = b.cost - (a.cost - a.stage_cost);
    ++c.pairs;
    if (a.slack_total <= slack_tol && b.slack_total <= slack_tol) ++c.zero_slack_pairs;
    c.worst_excess = std::max(c.worst_excess, excess);
    if (excess > tol) ++c.failures;
  }
  return c;
}

MonteCarloSummary summarize(const std::vector<RunLog>& runs) {
  MonteCarloSummary s;
  s.runs = static_cast<int>(runs.size());
  if (runs.empty()) return s;
  int entered = 0;
  double steps = 0.0;
  for (const auto& r : runs) {
    s.containment_rate += r.all_tube() ? 1.0 : 0.0;
    s.violation_rate += r.violations > 0 ? 1.0 : 0.0;
    s.feasibility_rate += r.all_feasible() ? 1.0 : 0.0;
    if (r.steps_to_terminal >= 0) {
      ++entered;
      steps += r.steps_to_terminal;
    }
    s.total_violations += r.violations;
    s.total_fallbacks += r.fallbacks;
    const CostCheck c = check_cost_decrease(r);
    s.cost.pairs += c.pairs;
    s.cost.zero_slack_pairs += c.zero_slack_pairs;
    s.cost.failures += c.failures;
    s.cost.worst_excess = std::max(s.cost.worst_excess, c.worst_excess);
  }
  const double n = static_cast<double>(runs.size());
  s.containment_rate /= n;
  s.violation_rate /= n;
  s.feasibility_rate /= n;
  s.terminal_rate = entered / n;
  s.mean_steps_to_terminal = entered ? steps / entered : 0.0;
  return s;
}

MonteCarloResult monte_carlo(const Experiment& ex, const VectorXd& x0, const RunOptions& opt,
                             std::uint64_t master_seed, int runs, int threads) {
  if (runs < 1) throw std::invalid_argument("monte_carlo: runs must be >= 1");
  MonteCarloResult res;
  res.runs.resize(static_cast<std::size_t>(runs));
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, runs);

  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  auto worker = [&](int t) {
    try {
      for (int i = next++; i < runs; i = next++)
        res.runs[static_cast<std::size_t>(i)] = run_closed_loop(ex, x0, opt, master_seed, i);
    } catch (...) {
      errors[static_cast<std::size_t>(t)] = std::current_exception();
      next = runs;
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  res.summary = summarize(res.runs);
  return res;
}

std::vector<Eigen::Vector2d> projected_polygon(const SupportSet& S, int i, int j, int directions) {
  MatrixXd E = MatrixXd::Zero(2, S.dim());
  E(0, i) = 1.0;
  E(1, j) = 1.0;
  const SupportSet proj = SupportSet::linear_image(E, S);
  return outer_polygon(sample_boundary(proj, circle_directions(directions)));
}

namespace {

MatrixXd pick(const MatrixXd& M, const std::vector<int>& rows, const std::vector<int>& cols) {
  MatrixXd out(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) out(r, c) = M(rows[r], cols[c]);
  return out;
}

}  // namespace

std::vector<DampingSet> damping_sets(const RunConfig& cfg, const std::vector<double>& betas,
                                     bool full, int cap, std::size_t max_rows) {
  const CraneSurrogate crane(cfg.model.crane);
  const double m_l = cfg.scenario.m_l;
  const double y_top = cfg.model.box.hi(1);
  std::vector<int> states, inputs;
  if (full) {
    states = {0, 1, 2, 3, 4, 5};
    inputs = {0, 1};
  } else {
    states = {4, 5};
    inputs = {0};
  }
  std::vector<int> all_rows(6);
  for (int i = 0; i < 6; ++i) all_rows[i] = i;
  VectorXd xb(states.size()), ub(inputs.size());
  for (std::size_t i = 0; i < states.size(); ++i) xb(i) = cfg.constraints.x_bounds(states[i]);
  for (std::size_t i = 0; i < inputs.size(); ++i) ub(i) = cfg.constraints.u_bounds(inputs[i]);
  const HPolytope X = HPolytope::symmetric_box(xb);
  const HPolytope U = HPolytope::symmetric_box(ub);
  const MatrixXd Q = pick(cfg.synthesis.Q, states, states);
  const MatrixXd R = pick(cfg.synthesis.R, inputs, inputs);
  const int pi = full ? 4 : 0, pj = full ? 5 : 1;

  std::vector<DampingSet> out;
  for (double beta : betas) {
    const auto t0 = std::chrono::steady_clock::now();
    DampingSet d;
    d.beta_d = beta;
    d.coords = {4, 5};
    const Linearization lin = crane.rest_linearization(m_l, y_top, beta);
    const auto [A6, B6] = discretize_euler(lin.Ac, lin.Bc, cfg.model.Ts);
    const MatrixXd A = pick(A6, states, states);
    const MatrixXd B = pick(B6, states, inputs);

    const DareResult dare = dare_solve(A, B, Q, R, 1e-10);
    if (!dare.converged) {
      d.diagnostic = "DARE did not converge";
    } else {
      const InvariantSetResult mpi = mpi_terminal(A, B, dare.K, X, U, cap);
      d.mpi = mpi.set;
      d.mpi_converged = mpi.converged;
      d.mpi_iterations = mpi.iterations;
      if (!mpi.converged) d.diagnostic = "MPI: " + mpi.diagnostic;
    }
    try {
      const InvariantSetResult mc = mcpi(A, B, X, U, cap, max_rows);
      d.mcpi = mc.set;
      d.mcpi_converged = mc.converged;
      d.mcpi_iterations = mc.iterations;
      if (!mc.converged) d.diagnostic += (d.diagnostic.empty() ? "MCPI: " : "; MCPI: ") + mc.diagnostic;
    } catch (const std::exception& e) {
      d.diagnostic += (d.diagnostic.empty() ? "MCPI: " : "; MCPI: ") + std::string(e.what());
    }
    if (d.mpi_converged && d.mcpi_converged) {
      d.mpi_in_mcpi = is_subset(d.mpi, d.mcpi, 1e-7);
      d.mpi_polygon = projected_polygon(SupportSet::polytope(d.mpi), pi, pj);
      d.mcpi_polygon = projected_polygon(SupportSet::polytope(d.mcpi), pi, pj);
      d.mpi_area = polygon_area(d.mpi_polygon);
      d.mcpi_area = polygon_area(d.mcpi_polygon);
    }
    d.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(d));
  }
  return out;
}

CompareResult compare_controllers(const Experiment& ex, const VectorXd& x0, int steps,
                                  double complete_tol, double settle_tol) {
  RunOptions opt;
  opt.steps = steps;
  opt.mode2_stop = 0;
  opt.settle_tol = settle_tol;
  opt.plant = PlantKind::nonlinear;
  opt.disturbances = false;
  opt.record_plan0 = true;

  CompareResult c;
  c.complete_tol = complete_tol;
  opt.controller = ControllerKind::tmpc;
  c.tmpc = run_closed_loop(ex, x0, opt, ex.cfg.scenario.seed);
  opt.controller = ControllerKind::nmpc;
  c.nmpc = run_closed_loop(ex, x0, opt, ex.cfg.scenario.seed);

  if (c.nmpc.plan0.empty()) {
    // x0 already in the terminal set: the comparison still needs the
    // optimized NMPC trajectory from x0.
    const auto& sc = ex.cfg.scenario;
    const NmpcConfig ncfg = nmpc_config_from(ex.syn, ex.mpc.Q, ex.mpc.R, ex.mpc.N);
    const StepFn F = crane_rk4_map(ex.crane(), sc.m_l, sc.beta_d, ex.cfg.model.Ts);
    const SqpResult r = sqp_solve(transcribe_ms(x0, ncfg.N, ex.syn.m(), F), x0, F, ncfg);
    c.nmpc.plan0 = r.iterate.z;
  }
  const std::size_t np = std::min(c.tmpc.plan0.size(), c.nmpc.plan0.size());
  for (std::size_t k = 0; k < np; ++k)
    c.initial_plan_gap =
        std::max(c.initial_plan_gap, (c.tmpc.plan0[k] - c.nmpc.plan0[k]).lpNorm<Eigen::Infinity>());
  const std::size_t ns = std::min(c.tmpc.steps.size(), c.nmpc.steps.size());
  for (std::size_t k = 0; k < ns; ++k)
    c.closed_loop_gap = std::max(
        c.closed_loop_gap, (c.tmpc.steps[k].x - c.nmpc.steps[k].x).lpNorm<Eigen::Infinity>());

  const auto complete = [&](const RunLog& r) {
    const VectorXd& x = r.x_final;
    return std::abs(x(0)) < complete_tol && std::abs(x(2)) < complete_tol &&
           std::abs(x(4)) < complete_tol;
  };
  c.tmpc_complete = complete(c.tmpc);
  c.nmpc_complete = complete(c.nmpc);
  return c;
}

}  // namespace tubempc
