#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tubempc/config.hpp"
#include "tubempc/nmpc.hpp"
#include "tubempc/synthesis.hpp"
#include "tubempc/tube_mpc.hpp"

namespace tubempc {

std::uint64_t splitmix64(std::uint64_t x);
// Seed of run `index` under a master seed.
std::uint64_t run_seed(std::uint64_t master, int index);

struct DeltaBounds {
  double A = 0.0;  // induced inf-norm bound on Delta_A
  double B = 0.0;
};

struct Disturbance {
  VectorXd w;
  MatrixXd dA, dB;
};

// Uniform over W by rejection from its bounding box.
VectorXd sample_w(const HPolytope& W, std::mt19937_64& rng);

// A(p) + dA, B(p) + dB is a random convex combination of the vertices,
// pulled back towards (A(p), B(p)) until both norm bounds hold. Rejection
// is tried 100 times before the scaling kicks in.
std::pair<MatrixXd, MatrixXd> sample_delta(const PolytopicLPV& model, const VectorXd& p,
                                           const DeltaBounds& bounds, std::mt19937_64& rng);

Disturbance sample_disturbance(const PolytopicLPV& model, const VectorXd& p,
                               const DeltaBounds& bounds, std::mt19937_64& rng);

// Everything a closed-loop run needs, built once from a RunConfig.
struct Experiment {
  RunConfig cfg;
  PolytopicLPV model;
  TubeSynthesis syn;
  MpcConfig mpc;

  // Throws SynthesisError when the offline pipeline fails.
  static Experiment build(const RunConfig& cfg);
  static Experiment from_synthesis(const RunConfig& cfg, TubeSynthesis syn);

  DeltaBounds delta_bounds() const { return {cfg.constraints.delta_A, cfg.constraints.delta_B}; }
  CraneSurrogate crane() const { return CraneSurrogate(cfg.model.crane); }
};

struct StepRecord {
  int step = 0;
  VectorXd x;   // measured state
  VectorXd z0;  // nominal state used by the controller
  VectorXd u;
  int mode = 1;
  bool feasible = true;
  bool tube_member = true;
  bool fallback = false;
  bool qp = false;
  double slack_total = 0.0;
  double cost = 0.0;
  double stage_cost = 0.0;
};

struct RunLog {
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  VectorXd x_final;
  int violations = 0;          // steps whose (x, u) break a hard row, plus a bad final state
  int steps_to_terminal = -1;  // first Mode-2 step, -1 if never
  int fallbacks = 0;
  int infeasible_steps = 0;
  bool infeasible_at_start = false;
  std::string stop_reason;     // budget, mode2, settled
  std::vector<VectorXd> plan0; // nominal trajectory of the first step

  bool all_tube() const;
  bool all_feasible() const { return infeasible_steps == 0; }
};

struct RunOptions {
  int steps = 400;
  int mode2_stop = 50;      // 0 disables
  double settle_tol = 0.0;  // stop once ||x||_inf < settle_tol; 0 disables
  ControllerKind controller = ControllerKind::tmpc;
  PlantKind plant = PlantKind::lpv;
  DeltaMode delta_mode = DeltaMode::per_step;
  bool disturbances = true;
  bool record_plan0 = false;
  double constraint_tol = 1e-8;

  static RunOptions from(const ScenarioConfig& s);
};

// One run from x0 with the seed of run `index`.
RunLog run_closed_loop(const Experiment& ex, const VectorXd& x0, const RunOptions& opt,
                       std::uint64_t master_seed, int index = 0);

struct CostCheck {
  int pairs = 0;             // consecutive QP steps
  int zero_slack_pairs = 0;  // of those, both with zero slack
  int failures = 0;          // J(k+1) > J(k) - stage(k) + tol
  double worst_excess = -std::numeric_limits<double>::infinity();
};
// Nominal cost (slack term excluded) over consecutive QP steps. Band rows
// only bound the slacks, so a positive slack leaves the (z, v) part of the
// problem unchanged and the pair is still checked.
CostCheck check_cost_decrease(const RunLog& log, double tol = 1e-6, double slack_tol = 1e-9);

struct MonteCarloSummary {
  int runs = 0;
  double containment_rate = 0.0;  // runs with every tube_member true
  double violation_rate = 0.0;    // runs with at least one violation
  double feasibility_rate = 0.0;  // runs without an infeasible step
  double terminal_rate = 0.0;     // runs that entered Mode 2
  double mean_steps_to_terminal = 0.0;  // over runs that entered
  int total_violations = 0;
  int total_fallbacks = 0;
  CostCheck cost;
};

struct MonteCarloResult {
  std::vector<RunLog> runs;
  MonteCarloSummary summary;
};

MonteCarloSummary summarize(const std::vector<RunLog>& runs);

// Runs are distributed over `threads` workers (0: hardware concurrency);
// the result does not depend on the thread count.
MonteCarloResult monte_carlo(const Experiment& ex, const VectorXd& x0, const RunOptions& opt,
                             std::uint64_t master_seed, int runs, int threads = 0);

struct DampingSet {
  double beta_d = 0.0;
  std::vector<int> coords;  // state coordinates of the projection
  HPolytope mpi, mcpi;
  int mpi_iterations = 0, mcpi_iterations = 0;
  bool mpi_converged = false, mcpi_converged = false;
  bool mpi_in_mcpi = false;
  double mpi_area = 0.0, mcpi_area = 0.0;
  std::vector<Eigen::Vector2d> mpi_polygon, mcpi_polygon;
  double seconds = 0.0;
  std::string diagnostic;
};

// MPI (DARE gain, weights from the config) and MCPI for each damping value.
// The default works on the modal subsystem (w_t, dw_t; F1) of the rest
// linearization at (m_l, top of the y_l range); `full` uses all six states
// and projects onto (w_t, dw_t).
std::vector<DampingSet> damping_sets(const RunConfig& cfg, const std::vector<double>& betas,
                                     bool full = false, int cap = 200,
                                     std::size_t max_rows = 10000);

// Outer polygon of the projection of S onto coordinates (i, j) from
// `directions` support lines.
std::vector<Eigen::Vector2d> projected_polygon(const SupportSet& S, int i, int j,
                                               int directions = 256);

struct CompareResult {
  RunLog tmpc, nmpc;
  double initial_plan_gap = 0.0;  // max_k ||z_k(tmpc) - z_k(nmpc)||_inf at the first step
  double closed_loop_gap = 0.0;   // max_k ||x_k(tmpc) - x_k(nmpc)||_inf
  bool tmpc_complete = false;
  bool nmpc_complete = false;
  double complete_tol = 0.0;
};

// Both controllers on the disturbance-free nonlinear plant from x0. A run
// is complete when |x_c|, |y_l| and |w_t| end below complete_tol.
CompareResult compare_controllers(const Experiment& ex, const VectorXd& x0, int steps,
                                  double complete_tol = 0.02, double settle_tol = 0.0);

}  // namespace tubempc
