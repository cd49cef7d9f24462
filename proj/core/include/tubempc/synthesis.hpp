#pragma once

#include <string>
#include <vector>

#include "tubempc/geometry.hpp"
#include "tubempc/lpv_model.hpp"

namespace tubempc {

// Rows C_x x + D_u u <= E. Kept unnormalized so tightening is an exact
// offset shift.
struct MixedConstraints {
  MatrixXd Cx;
  MatrixXd Du;
  VectorXd E;

  int rows() const { return static_cast<int>(E.size()); }
  static MixedConstraints from_sets(const HPolytope& X, const HPolytope& U);
  HPolytope as_polytope() const;   // over (x, u)
  HPolytope state_part() const;    // rows without input terms
  HPolytope input_part() const;    // rows without state terms
  // Rows of {x : (C_x + D_u K) x <= E}.
  HPolytope under_feedback(const MatrixXd& K) const;
  bool satisfied(const VectorXd& x, const VectorXd& u, double tol) const;
};

struct DareResult {
  MatrixXd P;
  MatrixXd K;
  int iterations = 0;
  bool converged = false;
};

// Fixed-point Riccati iteration. Stops when ||dP||_inf <= tol * max(1, ||P||_inf).
DareResult dare_solve(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
                      double tol = 1e-12, int max_iterations = 100000);

double spectral_radius(const MatrixXd& A);

struct MrpiResult {
  int i = 0;
  double alpha = 1.0;
  SupportSet Z;  // (1 - alpha)^-1 (W (+) A W (+) ... (+) A^{i-1} W)
  bool converged = false;
};

MrpiResult mrpi_approx(const MatrixXd& A_cl, const MatrixXd& K, const HPolytope& W,
                       double alpha_target = 0.1, int i_max = 500);

SupportSet tube_cross_section(const std::vector<SupportSet>& members);

MixedConstraints tighten(const MixedConstraints& M, const SupportSet& Z, const MatrixXd& K);

struct InvariantSetResult {
  HPolytope set;
  int iterations = 0;
  bool converged = false;
  std::string diagnostic;
};

// Maximal positively invariant set of x+ = (A + B K) x inside
// X0 = X cap {x : K x in U}.
InvariantSetResult mpi_terminal(const MatrixXd& A, const MatrixXd& B, const MatrixXd& K,
                                const HPolytope& X, const HPolytope& U, int cap = 200,
                                double tol = 1e-8);
// Same recursion on mixed rows: X0 = {x : (C_x + D_u K) x <= E}.
InvariantSetResult mpi_terminal(const MatrixXd& A_cl, const HPolytope& X0, int cap = 200,
                                double tol = 1e-8);

// Maximal controlled invariant set by backward recursion with
// Fourier-Motzkin projection of the input.
InvariantSetResult mcpi(const MatrixXd& A, const MatrixXd& B, const HPolytope& X,
                        const HPolytope& U, int cap = 50, std::size_t max_rows = 10000);

bool rpi_check(const MatrixXd& A_cl, const SupportSet& Z, const HPolytope& W, int directions,
               double tol);

enum class TerminalPair { nominal, last_vertex };

struct SynthesisConfig {
  MatrixXd Q_tube;  // weights for the per-vertex and nominal tube gains
  MatrixXd R_tube;
  MatrixXd Q;       // MPC stage weights, also used for the terminal DARE
  MatrixXd R;
  double alpha_target = 0.1;
  int i_max = 500;
  TerminalPair terminal_pair = TerminalPair::nominal;
  int terminal_cap = 200;
  bool parallel = true;
};

struct TubeSynthesis {
  MatrixXd A0, B0;
  std::vector<MatrixXd> K_vertex;
  std::vector<int> i_vertex;
  std::vector<double> alpha_vertex;
  std::vector<SupportSet> Z_vertex;
  MatrixXd K;      // nominal tube gain
  MatrixXd P;      // terminal weight
  MatrixXd K_f;    // terminal feedback
  TerminalPair terminal_pair = TerminalPair::nominal;
  SupportSet Z;    // hull of the per-vertex tubes
  SupportSet KZ;   // K Z
  HPolytope W;
  MixedConstraints M;       // original constraints
  MixedConstraints M_bar;   // tightened
  HPolytope X_bar, U_bar, X_f_bar;
  int terminal_iterations = 0;
  bool terminal_converged = false;

  int n() const { return static_cast<int>(A0.rows()); }
  int m() const { return static_cast<int>(B0.cols()); }
};

class SynthesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Full offline pipeline. Throws SynthesisError when a step fails (DARE
// divergence, i_max exceeded, empty tightened set, terminal set not found).
TubeSynthesis synthesize(const PolytopicLPV& model, const SynthesisConfig& cfg);

}  // namespace tubempc
