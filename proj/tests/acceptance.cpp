// Acceptance run: one PASS/FAIL line per criterion. Criteria listed with
// --known-failure are still executed and printed; the exit code ignores
// them only while they keep failing.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tubempc/config.hpp"
#include "tubempc/harness.hpp"
#include "tubempc/nmpc.hpp"
#include "tubempc/run_io.hpp"

using namespace tubempc;
using Eigen::Vector2d;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// --- 1: set algebra against brute-force oracles -----------------------------

Verdict set_algebra(int instances) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::normal_distribution<double> G;
  int disagreements = 0, points = 0;
  double worst_fm = 0.0;
  for (int t = 0; t < instances; ++t) {
    // Pontryagin difference on a grid.
    const auto Pv = oracle::random_polygon(rng, 10, 1.0, 2.0);
    const auto Sv = oracle::random_polygon(rng, 6, 0.1, 0.4);
    const HPolytope P = oracle::hull_polytope(Pv);
    const HPolytope R = pontryagin_diff(P, oracle::hull_polytope(Sv));
    for (double x = -2.0; x <= 2.0; x += 0.1)
      for (double y = -2.0; y <= 2.0; y += 0.1) {
        const Vector2d p(x, y);
        const double m = oracle::pontryagin_margin(P, Sv, p);
        if (std::abs(m) < 1e-6) continue;
        ++points;
        if (contains_point(R, p, 1e-9) != (m > 0)) ++disagreements;
      }

    // Minkowski-chain membership: W (+) A W (+) A^2 W.
    const auto Wv = oracle::random_polygon(rng, 7, 0.2, 0.6);
    Eigen::Matrix2d A;
    A << U(rng), U(rng), U(rng), U(rng);
    A *= 0.7 / std::max(1e-9, A.cwiseAbs().rowwise().sum().maxCoeff());
    const auto chain = SupportSet::minkowski_chain(oracle::hull_polytope(Wv),
                                                   {MatrixXd::Identity(2, 2), A, A * A});
    const auto sum = oracle::minkowski(oracle::minkowski(Wv, oracle::transform(A, Wv)),
                                       oracle::transform(A * A, Wv));
    for (int k = 0; k < 40; ++k) {
      const Vector2d p(1.5 * U(rng), 1.5 * U(rng));
      const double m = oracle::hull_margin(sum, p);
      if (std::abs(m) < 1e-6) continue;
      ++points;
      if (contains_point(chain, p, 1e-6) != (m > 0)) ++disagreements;
    }

    // Fourier-Motzkin shadow of a random 3D polytope.
    MatrixXd C(16, 3);
    VectorXd d(16);
    for (int i = 0; i < 10; ++i) {
      C.row(i) << G(rng), G(rng), G(rng);
      d(i) = (0.5 + 0.5 * (U(rng) + 1.0)) * C.row(i).norm();
    }
    C.bottomRows(6) << MatrixXd::Identity(3, 3), -MatrixXd::Identity(3, 3);
    d.tail(6).setConstant(2.0);
    const HPolytope Q(C, d);
    const HPolytope shadow = project_fm(Q, {0, 2});
    std::vector<Vector2d> pts;
    for (const auto& v : oracle::vertices3d(Q)) pts.emplace_back(v(0), v(2));
    for (const auto& l : circle_directions(64))
      worst_fm = std::max(worst_fm, std::abs(support(shadow, l) - oracle::support_points(pts, l)));
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << instances << " instances, " << points << " membership points, " << disagreements
     << " disagreements, worst FM support error " << fmt("%.2e", worst_fm) << ", "
     << fmt("%.2f", secs) << " s";
  return {disagreements == 0 && worst_fm <= 1e-6 && secs < 10.0 && instances >= 50, os.str()};
}

// --- 2: DARE closed form -----------------------------------------------------

Verdict dare_closed_form() {
  const auto g = dare_solve(MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1),
                            MatrixXd::Ones(1, 1));
  const double err = std::abs(g.P(0, 0) - (1.0 + std::sqrt(5.0)) / 2.0);
  MatrixXd A(2, 2), B(2, 1);
  A << 1, 1, 0, 1;
  B << 0.5, 1;
  const auto di = dare_solve(A, B, MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1));
  const double rho = spectral_radius(A + B * di.K);
  std::ostringstream os;
  os << "golden-ratio error " << fmt("%.1e", err) << ", double integrator rho(A+BK) = "
     << fmt("%.4f", rho);
  return {g.converged && err <= 1e-10 && di.converged && rho < 1.0, os.str()};
}

// --- 3: per-vertex mRPI contract ---------------------------------------------

Verdict mrpi_contract(const Experiment& ex) {
  const auto& s = ex.syn;
  bool ok = s.K_vertex.size() == 8;
  int imin = 1 << 30, imax = 0, rpi_ok = 0;
  double amax = 0.0;
  for (std::size_t j = 0; j < s.K_vertex.size(); ++j) {
    const auto& v = ex.model.vertices()[j];
    const bool rpi = rpi_check(v.A + v.B * s.K_vertex[j], s.Z_vertex[j], s.W, 128, 1e-6);
    rpi_ok += rpi;
    ok = ok && rpi && s.alpha_vertex[j] <= 0.1 && s.i_vertex[j] <= 500;
    imin = std::min(imin, s.i_vertex[j]);
    imax = std::max(imax, s.i_vertex[j]);
    amax = std::max(amax, s.alpha_vertex[j]);
  }
  std::ostringstream os;
  os << "8 vertices, i in [" << imin << ", " << imax << "], max alpha " << fmt("%.4f", amax)
     << ", rpi_check " << rpi_ok << "/8";
  return {ok, os.str()};
}

// --- 4: tightening sanity ----------------------------------------------------

SupportSet vertex_tube(const PolytopicLPV& model, const SynthesisConfig& c, const HPolytope& W) {
  std::vector<SupportSet> members;
  for (const auto& v : model.vertices()) {
    const auto d = dare_solve(v.A, v.B, c.Q_tube, c.R_tube);
    members.push_back(mrpi_approx(v.A + v.B * d.K, d.K, W, c.alpha_target, c.i_max).Z);
  }
  return tube_cross_section(members);
}

Verdict tightening(const Experiment& ex) {
  const auto& s = ex.syn;
  const auto zero = SupportSet::polytope(HPolytope::box(VectorXd::Zero(6), VectorXd::Zero(6)));
  const MixedConstraints same = tighten(s.M, zero, s.K);
  const bool identical = same.E == s.M.E && same.Cx == s.M.Cx && same.Du == s.M.Du;
  const HPolytope& W = ex.model.W();
  const auto& c = ex.cfg.synthesis;
  const auto Mb = tighten(s.M, vertex_tube(ex.model, c, W), s.K);
  const auto Mb15 = tighten(s.M, vertex_tube(ex.model, c, HPolytope(W.C(), 1.5 * W.d())), s.K);
  int loosened = 0;
  for (int r = 0; r < Mb.rows(); ++r) loosened += Mb15.E(r) > Mb.E(r);
  std::ostringstream os;
  os << "Z = {0} " << (identical ? "bit-identical" : "DIFFERS") << "; W x 1.5 loosened "
     << loosened << "/" << Mb.rows() << " rows";
  return {identical && loosened == 0, os.str()};
}

// --- 5: terminal set ---------------------------------------------------------

Verdict terminal_set(const Experiment& ex) {
  const auto& s = ex.syn;
  const MatrixXd Acl = s.A0 + s.B0 * s.K_f;
  int bad_inv = 0, bad_adm = 0, n = 0;
  for (const auto& b : sample_boundary(s.X_f_bar, sphere_directions(6, 200, 99))) {
    ++n;
    bad_inv += !contains_point(s.X_f_bar, Acl * b.point, 1e-8);
    bad_adm += !s.M_bar.satisfied(b.point, s.K_f * b.point, 1e-8);
  }
  std::ostringstream os;
  os << "fixpoint after " << s.terminal_iterations << " iterations ("
     << (s.terminal_converged ? "converged" : "NOT converged") << "), " << n
     << " boundary samples, " << bad_inv << " leave, " << bad_adm << " inadmissible";
  return {s.terminal_converged && n == 200 && bad_inv == 0 && bad_adm == 0, os.str()};
}

// --- 6: damping sweep --------------------------------------------------------

Verdict damping(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto sets = damping_sets(cfg, {0.01, 0.5, 1.0});
  const double secs = seconds_since(t0);
  bool ok = sets.size() == 3;
  std::ostringstream os;
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const auto& d = sets[k];
    ok = ok && d.mpi_converged && d.mcpi_converged && d.mpi_in_mcpi;
    if (k > 0) ok = ok && d.mpi_area >= sets[k - 1].mpi_area && d.mcpi_area >= sets[k - 1].mcpi_area;
    os << "beta_d " << d.beta_d << ": MPI " << fmt("%.2f", d.mpi_area) << " MCPI "
       << fmt("%.2f", d.mcpi_area) << (d.mpi_in_mcpi ? " (nested)" : " (NOT nested)") << "; ";
  }
  os << fmt("%.2f", secs) << " s";
  return {ok && secs < 60.0, os.str()};
}

// --- 7, 8, 11: Monte Carlo ---------------------------------------------------

std::string all_csv(const MonteCarloResult& mc) {
  std::ostringstream os;
  for (const auto& r : mc.runs) write_run_csv(os, r);
  os << summary_json(mc.summary).dump();
  return os.str();
}

Verdict monte_carlo_replication(const MonteCarloResult& mc, double secs, int budget) {
  const auto& s = mc.summary;
  int entered_in_budget = 0;
  for (const auto& r : mc.runs) entered_in_budget += r.steps_to_terminal >= 0 && r.steps_to_terminal < budget;
  std::ostringstream os;
  os << s.runs << " runs: containment " << s.containment_rate << ", violations "
     << s.total_violations << ", feasibility " << s.feasibility_rate << ", entered X_f_bar "
     << entered_in_budget << "/" << s.runs << " (mean step " << fmt("%.1f", s.mean_steps_to_terminal)
     << "), " << fmt("%.1f", secs) << " s";
  const bool ok = s.runs == 35 && s.containment_rate == 1.0 && s.total_violations == 0 &&
                  s.feasibility_rate == 1.0 && entered_in_budget == s.runs && secs < 300.0;
  return {ok, os.str()};
}

Verdict cost_monotonicity(const MonteCarloResult& mc) {
  CostCheck total;
  total.worst_excess = -1e300;
  for (const auto& r : mc.runs) {
    const CostCheck c = check_cost_decrease(r, 1e-6);
    total.pairs += c.pairs;
    total.zero_slack_pairs += c.zero_slack_pairs;
    total.failures += c.failures;
    total.worst_excess = std::max(total.worst_excess, c.worst_excess);
  }
  std::ostringstream os;
  os << total.pairs << " consecutive QP pairs (" << total.zero_slack_pairs
     << " with zero slack), " << total.failures << " increases beyond 1e-6, worst "
     << fmt("%+.3g", total.worst_excess);
  return {total.pairs > 0 && total.failures == 0, os.str()};
}

// --- 9: soft-band neutrality -------------------------------------------------

Verdict soft_bands(const Experiment& ex, const MonteCarloResult& mc) {
  const Band band = *ex.mpc.band;
  auto omegas = [&](const VectorXd& x) {
    std::vector<VectorXd> sched(ex.mpc.N + 1, scheduling_point(ex.cfg, x));
    std::vector<double> w;
    for (const auto& f : frequency_predict(ex.model, sched)) w.push_back(f.omega);
    return w;
  };
  // Feasible QPs from the logged Monte-Carlo states (every 5th Mode-1 step).
  int checked = 0, lost = 0;
  for (const auto& r : mc.runs)
    for (std::size_t k = 0; k < r.steps.size(); k += 5) {
      const auto& st = r.steps[k];
      if (st.mode != 1) continue;
      TubeQp t = build_qp(st.x, ex.syn, ex.mpc);
      add_soft_bands(t, omegas(st.x), band, ex.mpc.band_mode);
      if (!solve_mpc_qp(t, ex.mpc.slack_weight).plan) continue;
      ++checked;
      if (!solve_mpc_qp(strip_soft_bands(t), ex.mpc.slack_weight).plan) ++lost;
    }
  // Inside the band at the start state: slack against the one-variable value.
  const VectorXd x0 = ex.cfg.scenario.x0;
  const auto w = omegas(x0);
  TubeQp t = build_qp(x0, ex.syn, ex.mpc);
  add_soft_bands(t, w, band, ex.mpc.band_mode);
  const auto out = solve_mpc_qp(t, ex.mpc.slack_weight);
  bool slack_ok = out.plan.has_value() && w[0] > band.lo && w[0] < band.hi;
  double s0 = 0.0, hand = std::min(w[0] - band.lo, band.hi - w[0]);
  if (out.plan) {
    s0 = out.plan->s[0];
    slack_ok = slack_ok && s0 > 0.0 && s0 <= hand + 1e-7;
  }
  std::ostringstream os;
  os << checked << " feasible QPs, " << lost << " infeasible after stripping; omega_hat "
     << fmt("%.4f", w[0]) << " in [" << fmt("%.4f", band.lo) << ", " << fmt("%.4f", band.hi)
     << "], slack " << fmt("%.6f", s0) << " vs hand value " << fmt("%.6f", hand);
  return {checked > 0 && lost == 0 && slack_ok, os.str()};
}

// --- 10: NMPC cross-check ----------------------------------------------------

Verdict nmpc_cross_check(const Experiment& ex) {
  const auto& s = ex.syn;
  const NmpcConfig nc = nmpc_config_from(s, ex.mpc.Q, ex.mpc.R, ex.mpc.N);
  VectorXd x(6);
  x << 1.2, 0, 1.9, 0, 0.5, 0;  // outside the untightened X_f
  const StepFn F = linear_map(s.A0, s.B0);
  const SqpResult r = sqp_solve(transcribe_ms(x, nc.N, 2, F), x, F, nc);
  const NominalQpData d{s.A0, s.B0, nc.M, nc.X_f, nc.Q, nc.R, nc.P, nc.N, nc.slack_weight};
  const auto qp = solve_mpc_qp(build_nominal_qp(x, d), d.slack_weight);
  double gap = 1e300;
  if (r.converged && qp.plan) {
    gap = 0.0;
    for (int k = 0; k <= nc.N; ++k) gap = std::max(gap, (r.iterate.z[k] - qp.plan->z[k]).lpNorm<Eigen::Infinity>());
    for (int k = 0; k < nc.N; ++k) gap = std::max(gap, (r.iterate.v[k] - qp.plan->v[k]).lpNorm<Eigen::Infinity>());
  }
  const auto t0 = std::chrono::steady_clock::now();
  const CompareResult c = compare_controllers(ex, ex.cfg.scenario.x0, 1500, 0.02, 1e-3);
  std::ostringstream os;
  os << "linear plant gap " << fmt("%.1e", gap) << "; nonlinear: TMPC "
     << (c.tmpc_complete ? "complete" : "INCOMPLETE") << " in " << c.tmpc.steps.size()
     << " steps (" << c.tmpc.violations << " violations), NMPC "
     << (c.nmpc_complete ? "complete" : "INCOMPLETE") << " in " << c.nmpc.steps.size()
     << " steps (" << c.nmpc.violations << " violations); max nominal-plan gap "
     << fmt("%.4f", c.initial_plan_gap) << ", closed-loop gap " << fmt("%.4f", c.closed_loop_gap)
     << ", " << fmt("%.1f", seconds_since(t0)) << " s";
  const bool ok = gap <= 1e-6 && c.tmpc_complete && c.nmpc_complete && c.tmpc.violations == 0 &&
                  c.nmpc.violations == 0;
  return {ok, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> known;
  int oracle_instances = 60;
  app.add_option("--known-failure", known, "criteria expected to fail")->delimiter(',');
  app.add_option("--oracle-instances", oracle_instances, "random 2D instances for criterion 1");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> expected_fail(known.begin(), known.end());

  std::vector<std::pair<int, Verdict>> results;
  auto record = [&](int id, const std::function<Verdict()>& f) {
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail
              << std::endl;
    results.emplace_back(id, v);
  };

  const RunConfig cfg = default_config();
  std::cout << "crane defaults: N = " << cfg.mpc.N << ", Ts = " << cfg.model.Ts
            << " s, Q = 2.5 I, R = I, slack weight " << cfg.mpc.slack_weight
            << ", |w| <= (" << cfg.constraints.w_bounds.transpose() << "), |F| <= "
            << cfg.constraints.u_bounds(0) << std::endl;

  record(1, [&] { return set_algebra(oracle_instances); });
  record(2, dare_closed_form);

  const auto t_syn = std::chrono::steady_clock::now();
  const Experiment ex = Experiment::build(cfg);
  std::cout << "synthesis: " << fmt("%.2f", seconds_since(t_syn)) << " s" << std::endl;

  record(3, [&] { return mrpi_contract(ex); });
  record(4, [&] { return tightening(ex); });
  record(5, [&] { return terminal_set(ex); });
  record(6, [&] { return damping(cfg); });

  RunOptions opt = RunOptions::from(cfg.scenario);
  const std::uint64_t seed = 7;
  const auto t_mc = std::chrono::steady_clock::now();
  const MonteCarloResult mc = monte_carlo(ex, cfg.scenario.x0, opt, seed, 35, 1);
  const double mc_secs = seconds_since(t_mc);
  record(7, [&] { return monte_carlo_replication(mc, mc_secs, opt.steps); });
  record(8, [&] { return cost_monotonicity(mc); });
  record(9, [&] { return soft_bands(ex, mc); });
  record(10, [&] { return nmpc_cross_check(ex); });
  record(11, [&] {
    const MonteCarloResult again = monte_carlo(ex, cfg.scenario.x0, opt, seed, 35, 2);
    const std::string a = all_csv(mc), b = all_csv(again);
    std::ostringstream os;
    os << "seed 7, 35 runs, 1 vs 2 threads: " << a.size() << " bytes, "
       << (a == b ? "identical" : "DIFFERENT");
    return Verdict{a == b, os.str()};
  });

  int unexpected = 0;
  for (const auto& [id, v] : results) {
    const bool listed = expected_fail.count(id) > 0;
    if (!v.pass && !listed) ++unexpected;
    if (v.pass && listed) {
      std::cout << "criterion " << id << " is listed as a known failure but passed" << std::endl;
      ++unexpected;
    }
  }
  int passed = 0;
  for (const auto& r : results) passed += r.second.pass;
  std::cout << passed << "/" << results.size() << " criteria pass";
  if (!expected_fail.empty()) {
    std::cout << " (known failures:";
    for (int k : expected_fail) std::cout << ' ' << k;
    std::cout << ")";
  }
  std::cout << std::endl;
  return unexpected == 0 ? 0 : 1;
}
