#include "tubempc/lp_solver.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace tubempc::detail {
namespace {

constexpr double kPivotTol = 1e-9;
constexpr int kRefactorEvery = 40;
constexpr int kDegenerateBeforeBland = 30;

class RevisedSimplex {
 public:
  RevisedSimplex(const Eigen::MatrixXd& A, const Eigen::VectorXd& b)
      : m_(A.rows()), n_(A.cols()), A_(m_, n_ + m_), b_(b), sign_(m_) {
    A_.leftCols(n_) = A;
    A_.rightCols(m_).setIdentity();
    for (int i = 0; i < m_; ++i) {
      sign_(i) = b_(i) < 0.0 ? -1.0 : 1.0;
      A_.row(i).head(n_) *= sign_(i);
      b_(i) *= sign_(i);
    }
    basis_.resize(m_);
    for (int i = 0; i < m_; ++i) basis_[i] = n_ + i;
    Binv_ = Eigen::MatrixXd::Identity(m_, m_);
    xB_ = b_;
    double scale = 1.0;
    for (int j = 0; j < n_; ++j) scale = std::max(scale, A_.col(j).cwiseAbs().maxCoeff());
    col_scale_ = scale;
  }

  // Runs simplex iterations with the given cost over all columns. Artificial
  // columns (index >= n) never enter when allow_artificial is false.
  SimplexStatus run(const Eigen::VectorXd& cost, bool allow_artificial, int max_iter, int& iters) {
    const double cost_scale = 1.0 + cost.cwiseAbs().maxCoeff();
    const double opt_tol = 1e-11 * cost_scale * col_scale_;
    int degenerate_run = 0;
    Eigen::VectorXd cB(m_);
    while (iters < max_iter) {
      for (int i = 0; i < m_; ++i) cB(i) = cost(basis_[i]);
      const Eigen::VectorXd pi = Binv_.transpose() * cB;
      const bool bland = degenerate_run >= kDegenerateBeforeBland;
      const int limit = allow_artificial ? n_ + m_ : n_;
      int entering = -1;
      double best = -opt_tol;
      for (int j = 0; j < limit; ++j) {
        if (in_basis(j)) continue;
        const double r = cost(j) - pi.dot(A_.col(j));
        if (r < best) {
          entering = j;
          best = r;
          if (bland) break;
        }
      }
      if (entering < 0) return SimplexStatus::optimal;

      const Eigen::VectorXd dir = Binv_ * A_.col(entering);
      int leaving = -1;
      double theta = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        if (dir(i) <= kPivotTol) continue;
        const double t = std::max(xB_(i), 0.0) / dir(i);
        if (t < theta - 1e-14 ||
            (std::abs(t - theta) <= 1e-14 && leaving >= 0 && basis_[i] < basis_[leaving])) {
          theta = t;
          leaving = i;
        }
      }
      if (leaving < 0) return SimplexStatus::unbounded;

      degenerate_run = theta <= 1e-14 ? degenerate_run + 1 : 0;
      pivot(leaving, entering, dir, theta);
      ++iters;
      if (iters % kRefactorEvery == 0) refactor();
    }
    return SimplexStatus::iteration_limit;
  }

  // After phase one: pivot artificials out of the basis where possible.
  void expel_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_) continue;
      for (int j = 0; j < n_; ++j) {
        if (in_basis(j)) continue;
        const Eigen::VectorXd dir = Binv_ * A_.col(j);
        if (std::abs(dir(i)) > 1e-7) {
          pivot(i, j, dir, 0.0);
          break;
        }
      }
    }
    refactor();
  }

  double objective(const Eigen::VectorXd& cost) const {
    double v = 0.0;
    for (int i = 0; i < m_; ++i) v += cost(basis_[i]) * xB_(i);
    return v;
  }

  Eigen::VectorXd primal() const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < n_) y(basis_[i]) = std::max(xB_(i), 0.0);
    return y;
  }

  Eigen::VectorXd multipliers(const Eigen::VectorXd& cost) const {
    Eigen::VectorXd cB(m_);
    for (int i = 0; i < m_; ++i) cB(i) = cost(basis_[i]);
    Eigen::VectorXd pi = Binv_.transpose() * cB;
    return pi.cwiseProduct(sign_);
  }

 private:
  bool in_basis(int j) const {
    for (int b : basis_)
      if (b == j) return true;
    return false;
  }

  void pivot(int r, int entering, const Eigen::VectorXd& dir, double theta) {
    xB_ -= theta * dir;
    xB_(r) = theta;
    const double p = dir(r);
    Binv_.row(r) /= p;
    for (int i = 0; i < m_; ++i) {
      if (i == r || dir(i) == 0.0) continue;
      Binv_.row(i) -= dir(i) * Binv_.row(r);
    }
    basis_[r] = entering;
  }

  void refactor() {
    Eigen::MatrixXd B(m_, m_);
    for (int i = 0; i < m_; ++i) B.col(i) = A_.col(basis_[i]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    Binv_ = lu.inverse();
    xB_ = Binv_ * b_;
  }

  int m_;
  int n_;
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
  Eigen::VectorXd sign_;
  std::vector<int> basis_;
  Eigen::MatrixXd Binv_;
  Eigen::VectorXd xB_;
  double col_scale_ = 1.0;
};

}  // namespace

SimplexResult solve_standard_form(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                  const Eigen::VectorXd& c, int max_iterations) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  SimplexResult out;
  RevisedSimplex lp(A, b);
  int iters = 0;

  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
  phase1.tail(m).setOnes();
  auto st = lp.run(phase1, /*allow_artificial=*/true, max_iterations, iters);
  out.iterations = iters;
  if (st == SimplexStatus::iteration_limit) {
    out.status = st;
    return out;
  }
  const double infeas = lp.objective(phase1);
  if (infeas > 1e-9 * (1.0 + b.cwiseAbs().maxCoeff())) {
    out.status = SimplexStatus::infeasible;
    return out;
  }
  lp.expel_artificials();

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
  phase2.head(n) = c;
  st = lp.run(phase2, /*allow_artificial=*/false, max_iterations, iters);
  out.iterations = iters;
  out.status = st;
  if (st != SimplexStatus::optimal) return out;
  out.y = lp.primal();
  out.value = c.dot(out.y);
  out.multipliers = lp.multipliers(phase2);
  return out;
}

}  // namespace tubempc::detail
