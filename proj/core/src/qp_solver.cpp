#include "tubempc/qp_solver.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>
#include <vector>

namespace tubempc {
namespace {

using Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

double inf_norm(const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double max_step(const VectorXd& v, const VectorXd& dv) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  return a;
}

struct IpmResult {
  QpStatus status = QpStatus::numerical_error;
  VectorXd x, y, z, s;
  int iterations = 0;
  double rp = 0.0, rd = 0.0, mu = 0.0;
  std::string diagnostic;
};

class Ipm {
 public:
  Ipm(const QpProblem& qp, const QpSettings& st)
      : qp_(qp), st_(st), n_(qp.num_vars()), p_(static_cast<int>(qp.b.size())),
        m_(static_cast<int>(qp.h.size())) {
    At_ = qp.A.transpose();
    Gt_ = qp.G.transpose();
  }

  IpmResult run() {
    IpmResult out;
    VectorXd x = VectorXd::Zero(n_), y = VectorXd::Zero(p_);
    VectorXd z = VectorXd::Ones(m_), s = VectorXd::Ones(m_);
    if (!initial_point(x, y, s, z)) {
      out.status = QpStatus::numerical_error;
      out.diagnostic = "KKT factorization failed at the initial point";
      return out;
    }
    // Absolute tolerances with a small relative allowance for large data.
    const double tb = st_.tol + st_.rel_tol * inf_norm(qp_.b);
    const double th = st_.tol + st_.rel_tol * inf_norm(qp_.h);
    const double tq = st_.tol + st_.rel_tol * inf_norm(qp_.q);

    for (int it = 0; it <= st_.max_iterations; ++it) {
      const VectorXd rd = qp_.H * x + qp_.q + At_ * y + Gt_ * z;
      const VectorXd rp = qp_.A * x - qp_.b;
      const VectorXd ri = qp_.G * x + s - qp_.h;
      const double mu = m_ ? s.dot(z) / m_ : 0.0;
      out.iterations = it;
      out.rp = std::max(inf_norm(rp), inf_norm(ri));
      out.rd = inf_norm(rd);
      out.mu = mu;
      if (!std::isfinite(out.rp) || !std::isfinite(out.rd) || !std::isfinite(mu)) {
        out.status = QpStatus::numerical_error;
        out.diagnostic = "non-finite iterate";
        return out;
      }
      const double comp_max = m_ ? s.cwiseProduct(z).maxCoeff() : 0.0;
      if (inf_norm(rp) <= tb && inf_norm(ri) <= th && out.rd <= tq && comp_max <= st_.tol) {
        out.status = QpStatus::optimal;
        out.x = x;
        out.y = y;
        out.z = z;
        out.s = s;
        return out;
      }
      if (it == st_.max_iterations) break;

      // d = S Z^-1, the (3,3) block of the augmented system.
      const VectorXd d = m_ ? VectorXd(s.cwiseQuotient(z)) : VectorXd();
      if (!factorize(d)) {
        out.status = QpStatus::numerical_error;
        out.diagnostic = "KKT factorization failed";
        return out;
      }
      // Affine predictor.
      VectorXd rc = s.cwiseProduct(z);
      VectorXd dx, dy, dz, ds;
      direction(d, s, z, rd, rp, ri, rc, dx, dy, dz, ds);
      double alpha = m_ ? std::min(max_step(s, ds), max_step(z, dz)) : 1.0;
      if (m_) {
        const double mu_aff = (s + alpha * ds).dot(z + alpha * dz) / m_;
        const double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3);
        rc += ds.cwiseProduct(dz);
        rc.array() -= sigma * mu;
        direction(d, s, z, rd, rp, ri, rc, dx, dy, dz, ds);
        alpha = std::min(max_step(s, ds), max_step(z, dz));
        // Gondzio centrality correctors: push outlying products s_i z_i
        // toward [0.1, 10] * sigma mu at an enlarged trial step.
        const double mu_t = sigma * mu;
        const VectorXd zero_p = VectorXd::Zero(p_), zero_n = VectorXd::Zero(n_);
        const VectorXd zero_m = VectorXd::Zero(m_);
        for (int k = 0; k < st_.correctors && alpha < 1.0; ++k) {
          const double trial = std::min(1.0, 1.5 * alpha + 0.1);
          const VectorXd v = (s + trial * ds).cwiseProduct(z + trial * dz);
          VectorXd t = VectorXd::Zero(m_);
          for (int i = 0; i < m_; ++i) {
            if (v(i) < 0.1 * mu_t)
              t(i) = 0.1 * mu_t - v(i);
            else if (v(i) > 10.0 * mu_t)
              t(i) = std::max(-10.0 * mu_t, 10.0 * mu_t - v(i));
          }
          VectorXd cx, cy, cz, cs;
          direction(d, s, z, zero_n, zero_p, zero_m, -t, cx, cy, cz, cs);
          const VectorXd nds = ds + cs, ndz = dz + cz;
          const double na = std::min(max_step(s, nds), max_step(z, ndz));
          if (na < alpha + 0.01) break;
          dx += cx;
          dy += cy;
          dz = ndz;
          ds = nds;
          alpha = na;
        }
        alpha = std::min(1.0, 0.99 * alpha);
      }
      x += alpha * dx;
      y += alpha * dy;
      z += alpha * dz;
      s += alpha * ds;
    }
    out.status = QpStatus::max_iterations;
    out.x = x;
    out.y = y;
    out.z = z;
    out.s = s;
    out.diagnostic = "interior point iteration limit reached";
    return out;
  }

 private:
  // Quasi-definite augmented system
  //   [[H + eI, A', G'], [A, -eI, 0], [G, 0, -(D + eI)]]
  // with D = S Z^-1 and a small regularization e.
  bool factorize(const VectorXd& d) {
    const int dim = n_ + p_ + m_;
    if (!built_) {
      // Lower triangle only; the diagonal is rewritten in place later.
      std::vector<Triplet> trip;
      trip.reserve(qp_.H.nonZeros() + qp_.A.nonZeros() + qp_.G.nonZeros() + dim);
      auto push = [&trip](const SparseMatrix& M, int r0, int c0, bool lower) {
        for (int k = 0; k < M.outerSize(); ++k)
          for (SparseMatrix::InnerIterator itm(M, k); itm; ++itm)
            if (!lower || itm.row() >= itm.col())
              trip.emplace_back(itm.row() + r0, itm.col() + c0, itm.value());
      };
      push(qp_.H, 0, 0, true);
      push(qp_.A, n_, 0, false);
      push(qp_.G, n_ + p_, 0, false);
      // Explicit zeros keep every diagonal entry in the pattern.
      for (int i = 0; i < dim; ++i) trip.emplace_back(i, i, 0.0);
      K_.resize(dim, dim);
      K_.setFromTriplets(trip.begin(), trip.end());
      K_.makeCompressed();
      diag_.resize(dim);
      h_diag_ = VectorXd::Zero(n_);
      for (int c = 0; c < dim; ++c) {
        // Column c of the lower triangle starts with its diagonal entry.
        diag_[c] = K_.outerIndexPtr()[c];
        if (c < n_) h_diag_(c) = K_.valuePtr()[diag_[c]];
      }
      ldlt_.analyzePattern(K_);
      built_ = true;
    }
    // Regularization grows when a pivot vanishes; refinement then works
    // against the unregularized operator.
    double* val = K_.valuePtr();
    for (double e = st_.regularization; e <= 1e-4; e *= 100.0) {
      for (int i = 0; i < n_; ++i) val[diag_[i]] = h_diag_(i) + e;
      for (int i = 0; i < p_; ++i) val[diag_[n_ + i]] = -e;
      for (int i = 0; i < m_; ++i) val[diag_[n_ + p_ + i]] = -(d(i) + e);
      ldlt_.factorize(K_);
      if (ldlt_.info() == Eigen::Success && ldlt_.vectorD().allFinite()) {
        escalated_ = e > st_.regularization;
        return true;
      }
    }
    return false;
  }

  // Solves the unregularized system with iterative refinement.
  // Refinement only pays off once the regularization had to grow; the outer
  // iteration measures true residuals either way.
  VectorXd kkt_solve(const VectorXd& d, const VectorXd& rhs) const {
    VectorXd sol = ldlt_.solve(rhs);
    const int steps = escalated_ ? st_.refinement_steps : 0;
    for (int k = 0; k < steps; ++k) {
      const VectorXd res = rhs - kkt_apply(d, sol);
      if (inf_norm(res) <= 1e-12 * (1.0 + inf_norm(rhs))) break;
      sol += ldlt_.solve(res);
    }
    return sol;
  }

  VectorXd kkt_apply(const VectorXd& d, const VectorXd& v) const {
    const VectorXd vx = v.head(n_);
    const VectorXd vy = v.segment(n_, p_);
    const VectorXd vz = v.tail(m_);
    VectorXd out(n_ + p_ + m_);
    out.head(n_) = qp_.H * vx + At_ * vy + Gt_ * vz;
    out.segment(n_, p_) = qp_.A * vx;
    if (m_) out.tail(m_) = qp_.G * vx - d.cwiseProduct(vz);
    return out;
  }

  void direction(const VectorXd& d, const VectorXd& s, const VectorXd& z, const VectorXd& rd,
                 const VectorXd& rp, const VectorXd& ri, const VectorXd& rc, VectorXd& dx,
                 VectorXd& dy, VectorXd& dz, VectorXd& ds) const {
    VectorXd rhs(n_ + p_ + m_);
    rhs.head(n_) = -rd;
    rhs.segment(n_, p_) = -rp;
    if (m_) rhs.tail(m_) = -ri + rc.cwiseQuotient(z);
    const VectorXd sol = kkt_solve(d, rhs);
    dx = sol.head(n_);
    dy = sol.segment(n_, p_);
    dz = sol.tail(m_);
    if (m_)
      ds = -(rc + s.cwiseProduct(dz)).cwiseQuotient(z);
    else
      ds.resize(0);
  }

  // Primal start from min 1/2 x'Hx + 1/2 |Gx - h|^2 s.t. Ax = b, dual start
  // from the same system driven by q alone.
  bool initial_point(VectorXd& x, VectorXd& y, VectorXd& s, VectorXd& z) {
    const VectorXd d = VectorXd::Ones(m_);
    if (!factorize(d)) return false;
    VectorXd rhs = VectorXd::Zero(n_ + p_ + m_);
    rhs.segment(n_, p_) = qp_.b;
    rhs.tail(m_) = qp_.h;
    const VectorXd primal = kkt_solve(d, rhs);
    rhs.setZero();
    rhs.head(n_) = -qp_.q;
    const VectorXd dual = kkt_solve(d, rhs);
    x = primal.head(n_);
    y = dual.segment(n_, p_);
    if (m_) {
      s = qp_.h - qp_.G * x;
      z = dual.tail(m_);
      // Mehrotra's shift: into the positive orthant, then balanced so that
      // s'z is spread evenly.
      const double ds = std::max(-1.5 * s.minCoeff(), 0.0);
      const double dz = std::max(-1.5 * z.minCoeff(), 0.0);
      s.array() += ds;
      z.array() += dz;
      const double sz = s.dot(z);
      s.array() += 0.5 * sz / std::max(z.sum(), 1e-300);
      z.array() += 0.5 * sz / std::max(s.sum(), 1e-300);
      s = s.cwiseMax(1e-8);
      z = z.cwiseMax(1e-8);
    }
    return x.allFinite() && y.allFinite();
  }

  const QpProblem& qp_;
  QpSettings st_;
  int n_, p_, m_;
  SparseMatrix At_, Gt_, K_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  std::vector<int> diag_;
  VectorXd h_diag_;
  bool escalated_ = false;
  bool built_ = false;
};

// min 1't + 1'p + 1'r  s.t.  Ax + p - r = b,  Gx - t <= h,  t, p, r >= 0.
QpProblem phase_one(const QpProblem& qp) {
  const int n = qp.num_vars();
  const int pe = static_cast<int>(qp.b.size());
  const int m = static_cast<int>(qp.h.size());
  const int nv = n + m + 2 * pe;
  QpProblem ph;
  ph.H.resize(nv, nv);
  ph.q = VectorXd::Zero(nv);
  ph.q.tail(m + 2 * pe).setOnes();
  std::vector<Triplet> ta, tg;
  for (int k = 0; k < qp.A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(qp.A, k); it; ++it)
      ta.emplace_back(it.row(), it.col(), it.value());
  for (int i = 0; i < pe; ++i) {
    ta.emplace_back(i, n + m + i, 1.0);
    ta.emplace_back(i, n + m + pe + i, -1.0);
  }
  ph.A.resize(pe, nv);
  ph.A.setFromTriplets(ta.begin(), ta.end());
  ph.b = qp.b;
  for (int k = 0; k < qp.G.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(qp.G, k); it; ++it)
      tg.emplace_back(it.row(), it.col(), it.value());
  for (int i = 0; i < m; ++i) tg.emplace_back(i, n + i, -1.0);
  for (int i = 0; i < m + 2 * pe; ++i) tg.emplace_back(m + i, n + i, -1.0);
  ph.G.resize(2 * m + 2 * pe, nv);
  ph.G.setFromTriplets(tg.begin(), tg.end());
  ph.h = VectorXd::Zero(2 * m + 2 * pe);
  ph.h.head(m) = qp.h;
  return ph;
}

}  // namespace

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::max_iterations: return "max_iterations";
    case QpStatus::numerical_error: return "numerical_error";
  }
  return "unknown";
}

QpSolution solve_qp(const QpProblem& qp, const QpSettings& settings) {
  const int n = qp.num_vars();
  if (qp.H.rows() != n || qp.H.cols() != n || qp.A.cols() != n || qp.G.cols() != n ||
      qp.A.rows() != qp.b.size() || qp.G.rows() != qp.h.size())
    throw std::invalid_argument("solve_qp: inconsistent problem dimensions");

  QpSolution sol;
  IpmResult r = Ipm(qp, settings).run();
  sol.iterations = r.iterations;
  sol.primal_residual = r.rp;
  sol.dual_residual = r.rd;
  sol.complementarity = r.mu;
  if (r.status == QpStatus::optimal) {
    sol.status = QpStatus::optimal;
    sol.x = r.x;
    sol.y = r.y;
    sol.z = r.z;
    sol.objective = 0.5 * r.x.dot(qp.H * r.x) + qp.q.dot(r.x);
    return sol;
  }

  // Decide between infeasibility and a solver failure.
  const QpProblem ph = phase_one(qp);
  QpSettings ps = settings;
  ps.max_iterations = std::max(settings.max_iterations, 150);
  const IpmResult pr = Ipm(ph, ps).run();
  if (pr.status == QpStatus::optimal) {
    const double viol = ph.q.dot(pr.x);
    if (viol > 1e-7) {
      sol.status = QpStatus::infeasible;
      sol.farkas_y = pr.y;
      sol.farkas_z = pr.z.head(qp.h.size());
      sol.diagnostic = "phase-one optimum " + std::to_string(viol) + " > 0";
      return sol;
    }
  }
  sol.status = r.status;
  sol.x = r.x;
  sol.y = r.y;
  sol.z = r.z;
  if (r.x.size()) sol.objective = 0.5 * r.x.dot(qp.H * r.x) + qp.q.dot(r.x);
  sol.diagnostic = r.diagnostic + "; phase one " +
                   (pr.status == QpStatus::optimal ? "found a feasible point" : "did not converge");
  return sol;
}

}  // namespace tubempc
