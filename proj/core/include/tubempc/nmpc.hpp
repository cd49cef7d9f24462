#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tubempc/crane.hpp"
#include "tubempc/qp_solver.hpp"
#include "tubempc/synthesis.hpp"
#include "tubempc/tube_mpc.hpp"

namespace tubempc {

// Discrete one-step map x+ = F(x, u).
using StepFn = std::function<VectorXd(const VectorXd& x, const VectorXd& u)>;

// RK4 step of the crane surrogate over Ts with fixed (m_l, beta_d).
StepFn crane_rk4_map(const CraneSurrogate& crane, double m_l, double beta_d, double Ts);

StepFn linear_map(const MatrixXd& A, const MatrixXd& B);

struct NlpIterate {
  std::vector<VectorXd> z;  // N + 1 shooting states
  std::vector<VectorXd> v;  // N controls
  VectorXd defects;         // F(z_k, v_k) - z_{k+1}, stacked
  double merit = 0.0;
  std::string warning;
};

// Shooting nodes from a forward rollout of F under u = 0. A non-finite
// rollout falls back to all-zero nodes and sets `warning`.
NlpIterate transcribe_ms(const VectorXd& x0, int N, int m, const StepFn& F);

VectorXd shooting_defects(const NlpIterate& it, const StepFn& F);

struct NmpcConfig {
  int N = 15;
  MatrixXd Q, R, P;
  MixedConstraints M;  // untightened rows on (z_k, v_k)
  HPolytope X_f;       // terminal rows on z_N
  MatrixXd K_f;        // terminal feedback, used for warm starts and Mode 2
  int max_iterations = 30;
  double step_tol = 1e-6;
  double slack_weight = 1e6;
};

struct SqpResult {
  NlpIterate iterate;
  int iterations = 0;      // steps with ||step||_inf above step_tol
  int qp_solves = 0;
  bool converged = false;
  bool relaxed = false;    // hard rows were softened to keep the QP feasible
  double max_defect = 0.0;
  double cost = 0.0;
  double slack_total = 0.0;
  std::string diagnostic;
};

// Gauss-Newton SQP with an l1 merit line search. z_0 is pinned to x0.
SqpResult sqp_solve(const NlpIterate& init, const VectorXd& x0, const StepFn& F,
                    const NmpcConfig& cfg, const QpSettings& qp_settings = {});

// Terminal ingredients for the reference controller: the synthesis' P and
// K_f with the terminal set rebuilt on untightened constraints.
NmpcConfig nmpc_config_from(const TubeSynthesis& syn, const MatrixXd& Q, const MatrixXd& R,
                            int N);

class NmpcController {
 public:
  NmpcController(NmpcConfig cfg, StepFn F);

  // u = K_f x while x is in X_f, otherwise SQP warm-started from the
  // shifted previous solution.
  ControlStep control_step(const VectorXd& x_meas);
  void reset();

  const std::optional<SqpResult>& last_result() const { return last_; }
  const NmpcConfig& config() const { return cfg_; }

 private:
  NmpcConfig cfg_;
  StepFn F_;
  int mode_ = 1;
  std::optional<NlpIterate> warm_;
  std::optional<SqpResult> last_;
};

}  // namespace tubempc
