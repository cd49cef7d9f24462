#pragma once

#include <Eigen/Dense>

namespace tubempc::detail {

enum class SimplexStatus { optimal, infeasible, unbounded, iteration_limit };

struct SimplexResult {
  SimplexStatus status = SimplexStatus::infeasible;
  double value = 0.0;
  Eigen::VectorXd y;            // primal solution of the standard form
  Eigen::VectorXd multipliers;  // simplex multipliers of the equality rows
  int iterations = 0;
};

// Two-phase revised simplex for   min c'y  s.t.  A y = b,  y >= 0.
//
// Meant for problems with few rows and many columns (the dual form of the
// polytope LPs used throughout the library). The basis inverse is kept
// explicitly and refactorized periodically. Dantzig pricing is used until a
// run of degenerate pivots is detected, after which Bland's rule takes over so
// the method cannot cycle.
SimplexResult solve_standard_form(const Eigen::MatrixXd& A,
                                  const Eigen::VectorXd& b,
                                  const Eigen::VectorXd& c,
                                  int max_iterations = 20000);

}  // namespace tubempc::detail
