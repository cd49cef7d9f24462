#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tubempc/crane.hpp"
#include "tubempc/qp_solver.hpp"
#include "tubempc/synthesis.hpp"

namespace tubempc {

struct Band {
  double lo = 0.0;  // rad/s
  double hi = 0.0;
};

// excluded: the band is a resonance zone to stay out of.
// corridor: the band is the admissible frequency range.
enum class BandMode { excluded, corridor };

struct MpcConfig {
  int N = 15;
  MatrixXd Q, R, P;
  double slack_weight = 1e5;
  std::optional<Band> band;
  BandMode band_mode = BandMode::excluded;
  bool optimize_z0 = true;
};

// Decision vector [z_0 .. z_N, v_0 .. v_{N-1}, s_0 .. s_N, aux].
struct QpLayout {
  int n = 0, m = 0, N = 0;
  int n_aux = 0;
  int z(int k) const { return k * n; }
  int v(int k) const { return (N + 1) * n + k * m; }
  int s(int k) const { return (N + 1) * n + N * m + k; }
  int aux() const { return s(N + 1); }
  int total() const { return aux() + n_aux; }
};

struct NominalQpData {
  MatrixXd A, B;
  MixedConstraints M;  // stage rows on (z_k, v_k), k < N
  HPolytope X_f;       // rows on z_N
  MatrixXd Q, R, P;
  int N = 15;
  double slack_weight = 1e5;
};

struct TubeQp {
  QpProblem qp;
  QpLayout layout;
  int band_row_begin = 0;  // rows of G in s only, added by add_soft_bands
  int band_row_count = 0;
};

// Nominal MPC QP with z_0 fixed to x0 (no tube).
TubeQp build_nominal_qp(const VectorXd& x0, const NominalQpData& data);

// Tube MPC QP. With optimize_z0 the initial nominal state is free and
// x_meas - z_0 is constrained to Z through a conic lifting of Z's
// representation; otherwise z_0 = x_meas.
TubeQp build_qp(const VectorXd& x_meas, const TubeSynthesis& syn, const MpcConfig& cfg);

struct FrequencyEstimate {
  double omega = 0.0;  // rad/s
  bool overdamped = false;
};

// Damped frequency of the 2x2 modal block (rows/cols modal_index,
// modal_index + 1) of A(p_k) for each scheduling point.
std::vector<FrequencyEstimate> frequency_predict(const PolytopicLPV& model,
                                                 const std::vector<VectorXd>& schedule,
                                                 int modal_index = 4);
FrequencyEstimate modal_frequency(const MatrixXd& A_block, double Ts);

// Frozen-coefficient slack rows, one per stage: s_k >= c_k where c_k is the
// band violation of omega_hat[k].
void add_soft_bands(TubeQp& qp, const std::vector<double>& omega_hat, const Band& band,
                    BandMode mode = BandMode::excluded);
double band_violation(double omega, const Band& band, BandMode mode);

// Removes the soft band rows again.
TubeQp strip_soft_bands(const TubeQp& qp);

struct MpcPlan {
  std::vector<VectorXd> z;  // N + 1
  std::vector<VectorXd> v;  // N
  std::vector<double> s;    // N + 1
  double cost = 0.0;        // full objective
  double slack_cost = 0.0;  // slack_weight * sum s
};

struct QpOutcome {
  QpSolution solution;
  std::optional<MpcPlan> plan;
};
QpOutcome solve_mpc_qp(const TubeQp& qp, double slack_weight, const QpSettings& settings = {});

struct ControlStep {
  VectorXd u;
  VectorXd z0;   // nominal state used this step
  VectorXd v0;   // nominal input (Mode 1)
  int mode = 1;
  bool feasible = true;
  bool fallback = false;
  bool tube_member = true;
  bool qp = false;            // a QP was solved to optimality this step
  double cost = 0.0;          // nominal cost J (slack term excluded)
  double slack_total = 0.0;
  double stage_cost = 0.0;    // ||z0||_Q^2 + ||v0||_R^2
  int qp_iterations = 0;
  std::string diagnostic;
};

// Scheduling point (m_l, y_l, beta_d) from a state; used for the frequency
// prediction along the plan.
using ScheduleFn = std::function<VectorXd(const VectorXd& x)>;

class TubeMpcController {
 public:
  TubeMpcController(const TubeSynthesis& syn, MpcConfig cfg,
                    const PolytopicLPV* model = nullptr, ScheduleFn schedule = {});

  ControlStep control_step(const VectorXd& x_meas);
  void reset();

  int fallback_count() const { return fallbacks_; }
  const std::optional<MpcPlan>& last_plan() const { return plan_; }
  const MpcConfig& config() const { return cfg_; }
  const TubeSynthesis& synthesis() const { return syn_; }

 private:
  ControlStep mode1(const VectorXd& x_meas);
  std::vector<double> predicted_frequencies(const VectorXd& x_meas) const;

  const TubeSynthesis& syn_;
  MpcConfig cfg_;
  const PolytopicLPV* model_;
  ScheduleFn schedule_;
  MatrixXd A_f_;  // A0 + B0 K_f
  int mode_ = 1;
  VectorXd z_;    // Mode 2 nominal state
  std::optional<MpcPlan> plan_;
  int shift_ = 0;  // steps the stored plan has been shifted by fallbacks
  int fallbacks_ = 0;
};

}  // namespace tubempc
