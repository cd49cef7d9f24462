#pragma once

#include <Eigen/Sparse>

#include <utility>
#include <vector>

#include "tubempc/geometry.hpp"
#include "tubempc/qp_solver.hpp"

namespace tubempc::detail {

// Incremental assembly of a sparse QP  min 1/2 x'Hx + q'x, Ax = b, Gx <= h.
struct QpBuilder {
  using Triplet = Eigen::Triplet<double>;
  int ncols = 0;
  std::vector<Triplet> H, A, G;
  std::vector<double> q, b, h;

  int add_var() {
    q.push_back(0.0);
    return ncols++;
  }
  int eq_row(double rhs) {
    b.push_back(rhs);
    return static_cast<int>(b.size()) - 1;
  }
  int ineq_row(double rhs) {
    h.push_back(rhs);
    return static_cast<int>(h.size()) - 1;
  }
  static void add_block(std::vector<Triplet>& t, int r0, int c0, const MatrixXd& M);
  QpProblem finish() const;
};

// Each entry (column, v) says that variable `column` contributes v * value
// to the lifted point.
using LiftColumns = std::vector<std::pair<int, VectorXd>>;

// Adds variables and rows forcing the lifted point into lambda * S, where
// lambda is the variable lambda_col (lambda_col < 0 means lambda = 1).
// Needs lambda >= 0 to be enforced by the caller when it is a variable.
LiftColumns encode_lifting(QpBuilder& bl, const SupportSet& S, int lambda_col);

// Gauge of S at x from the lifted LP  min t  s.t.  x in t S. Returns a
// negative value when the LP could not be solved.
double lifted_gauge(const SupportSet& S, const VectorXd& x);

}  // namespace tubempc::detail
