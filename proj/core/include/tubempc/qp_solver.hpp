#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string>

namespace tubempc {

using SparseMatrix = Eigen::SparseMatrix<double>;

//   min 1/2 x'Hx + q'x   s.t.   A x = b,   G x <= h
// H must be symmetric positive semidefinite (both triangles stored).
struct QpProblem {
  SparseMatrix H;
  Eigen::VectorXd q;
  SparseMatrix A;
  Eigen::VectorXd b;
  SparseMatrix G;
  Eigen::VectorXd h;

  int num_vars() const { return static_cast<int>(q.size()); }
};

enum class QpStatus { optimal, infeasible, max_iterations, numerical_error };

struct QpSettings {
  double tol = 1e-9;
  double rel_tol = 1e-12;
  int max_iterations = 100;
  double regularization = 1e-10;
  int refinement_steps = 3;  // used once the regularization has been raised
  int correctors = 2;  // centrality correctors per iteration
};

struct QpSolution {
  QpStatus status = QpStatus::numerical_error;
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // equality multipliers
  Eigen::VectorXd z;  // inequality multipliers, >= 0
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double complementarity = 0.0;
  // When infeasible: (y, z) with z >= 0, A'y + G'z = 0 and b'y + h'z < 0.
  Eigen::VectorXd farkas_y;
  Eigen::VectorXd farkas_z;
  std::string diagnostic;
};

// Mehrotra predictor-corrector interior point method on the reduced KKT
// system, factored with a sparse LDL'. When the main iteration fails, a
// phase-one LP decides infeasibility and supplies the certificate.
QpSolution solve_qp(const QpProblem& qp, const QpSettings& settings = {});

const char* to_string(QpStatus s);

}  // namespace tubempc
