#include <cmath>
#include <limits>

#include "detail.hpp"
#include "tubempc/geometry.hpp"
#include "tubempc/lp_solver.hpp"

namespace tubempc {
namespace detail {

RawLp lp_max_raw(const MatrixXd& C, const VectorXd& d, const VectorXd& c) {
  RawLp out;
  if (C.rows() == 0) {
    out.status = c.isZero(0.0) ? LPStatus::optimal : LPStatus::unbounded;
    out.point = VectorXd::Zero(c.size());
    return out;
  }
  // Dual: min d'y  s.t.  C'y = c, y >= 0. Its multipliers are the primal point.
  const MatrixXd Ct = C.transpose();
  const SimplexResult r = solve_standard_form(Ct, c, d);
  switch (r.status) {
    case SimplexStatus::optimal:
      out.status = LPStatus::optimal;
      out.value = r.value;
      out.point = r.multipliers;
      out.dual = r.y;
      break;
    case SimplexStatus::infeasible:
      // Primal unbounded or infeasible; callers resolve this with emptiness.
      out.status = LPStatus::unbounded;
      break;
    case SimplexStatus::unbounded:
      out.status = LPStatus::infeasible;
      break;
    case SimplexStatus::iteration_limit:
      throw GeometryError("lp_solve: simplex iteration limit reached");
  }
  return out;
}

FeasibilityLp feasibility_lp(const MatrixXd& C, const VectorXd& d) {
  const int q = static_cast<int>(C.rows());
  const int n = static_cast<int>(C.cols());
  // max -t  s.t.  C x - t 1 <= d,  -t <= 1, solved through its dual.
  MatrixXd A = MatrixXd::Zero(n + 1, q + 1);
  A.topLeftCorner(n, q) = C.transpose();
  A.row(n).setConstant(-1.0);
  VectorXd b = VectorXd::Zero(n + 1);
  b(n) = -1.0;
  VectorXd cost(q + 1);
  cost.head(q) = d;
  cost(q) = 1.0;
  const SimplexResult r = solve_standard_form(A, b, cost);
  if (r.status != SimplexStatus::optimal)
    throw GeometryError("feasibility LP did not reach optimality");
  FeasibilityLp out;
  out.x = r.multipliers.head(n);
  out.t = r.multipliers(n);
  return out;
}

}  // namespace detail

HPolytope::HPolytope(MatrixXd C, VectorXd d) {
  if (C.rows() != d.size()) throw GeometryError("HPolytope: C and d row counts differ");
  const int n = static_cast<int>(C.cols());
  MatrixXd Cn(C.rows(), n);
  VectorXd dn(C.rows());
  int q = 0;
  bool contradiction = false;
  for (int i = 0; i < C.rows(); ++i) {
    const double nrm = C.row(i).norm();
    if (!std::isfinite(nrm) || !std::isfinite(d(i)))
      throw GeometryError("HPolytope: non-finite data");
    if (nrm < 1e-12) {
      if (d(i) < -1e-12) contradiction = true;
      continue;
    }
    Cn.row(q) = C.row(i) / nrm;
    dn(q) = d(i) / nrm;
    ++q;
  }
  *this = HPolytope(Raw{}, Cn.topRows(q), dn.head(q), contradiction);
}

HPolytope::HPolytope(Raw, MatrixXd C, VectorXd d, bool known_empty)
    : C_(std::move(C)), d_(std::move(d)), empty_(known_empty) {
  detect_box();
  classify();
}

void HPolytope::detect_box() {
  const int n = dim();
  if (rows() != 2 * n || n == 0) return;
  VectorXd lo = VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  VectorXd hi = lo;
  for (int i = 0; i < rows(); ++i) {
    int idx = -1;
    for (int j = 0; j < n; ++j) {
      if (C_(i, j) == 0.0) continue;
      if (idx >= 0 || std::abs(C_(i, j)) != 1.0) return;
      idx = j;
    }
    if (idx < 0) return;
    if (C_(i, idx) > 0) {
      if (!std::isnan(hi(idx))) return;
      hi(idx) = d_(i);
    } else {
      if (!std::isnan(lo(idx))) return;
      lo(idx) = -d_(i);
    }
  }
  box_ = std::make_pair(lo, hi);
}

void HPolytope::classify() {
  const int n = dim();
  center_ = VectorXd::Zero(n);
  if (empty_) {
    bounded_ = true;
    margin_ = -1.0;
    return;
  }
  if (box_) {
    const auto& [lo, hi] = *box_;
    if (((hi - lo).array() < -kRedundancyTol).any()) {
      empty_ = true;
      bounded_ = true;
      margin_ = -1.0;
      return;
    }
    center_ = 0.5 * (lo + hi);
    margin_ = std::min(1.0, 0.5 * (hi - lo).minCoeff());
    bounded_ = true;
    return;
  }
  if (rows() == 0) {
    margin_ = 1.0;
    bounded_ = (n == 0);
    return;
  }
  const auto feas = detail::feasibility_lp(C_, d_);
  if (feas.t > kRedundancyTol) {
    empty_ = true;
    bounded_ = true;
    margin_ = -feas.t;
    return;
  }
  center_ = feas.x;
  margin_ = -feas.t;
  bounded_ = true;
  for (int i = 0; i < n && bounded_; ++i) {
    for (double sgn : {1.0, -1.0}) {
      VectorXd e = VectorXd::Zero(n);
      e(i) = sgn;
      if (detail::lp_max_raw(C_, d_, e).status != LPStatus::optimal) {
        bounded_ = false;
        break;
      }
    }
  }
}

HPolytope HPolytope::box(const VectorXd& lo, const VectorXd& hi) {
  const int n = static_cast<int>(lo.size());
  if (hi.size() != n) throw GeometryError("HPolytope::box: bound sizes differ");
  MatrixXd C(2 * n, n);
  C << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
  VectorXd d(2 * n);
  d << hi, -lo;
  return HPolytope(C, d);
}

HPolytope HPolytope::symmetric_box(const VectorXd& half_width) {
  return box(-half_width, half_width);
}

HPolytope HPolytope::empty_set(int dim) {
  return HPolytope(Raw{}, MatrixXd::Zero(0, dim), VectorXd::Zero(0), true);
}

HPolytope HPolytope::universe(int dim) {
  return HPolytope(Raw{}, MatrixXd::Zero(0, dim), VectorXd::Zero(0), false);
}

LPResult lp_solve(const VectorXd& cost, const HPolytope& P, Sense sense) {
  if (cost.size() != P.dim()) throw GeometryError("lp_solve: dimension mismatch");
  LPResult out;
  if (P.is_empty()) {
    out.status = LPStatus::infeasible;
    return out;
  }
  const VectorXd c = sense == Sense::max ? cost : VectorXd(-cost);
  if (const auto& bx = P.axis_box()) {
    const auto& [lo, hi] = *bx;
    out.status = LPStatus::optimal;
    out.point.resize(c.size());
    for (int i = 0; i < c.size(); ++i)
      out.point(i) = c(i) > 0 ? hi(i) : (c(i) < 0 ? lo(i) : 0.5 * (lo(i) + hi(i)));
    out.value = cost.dot(out.point);
    return out;
  }
  const auto raw = detail::lp_max_raw(P.C(), P.d(), c);
  out.status = raw.status;
  if (raw.status == LPStatus::optimal) {
    out.point = raw.point;
    out.value = sense == Sense::max ? raw.value : -raw.value;
  }
  return out;
}

double support(const HPolytope& P, const VectorXd& l) {
  if (P.is_empty()) return -std::numeric_limits<double>::infinity();
  if (const auto& bx = P.axis_box()) {
    const auto& [lo, hi] = *bx;
    return l.cwiseProduct(lo).cwiseMax(l.cwiseProduct(hi)).sum();
  }
  const auto r = lp_solve(l, P, Sense::max);
  if (r.status == LPStatus::unbounded) return std::numeric_limits<double>::infinity();
  return r.value;
}

bool contains_point(const HPolytope& P, const VectorXd& x, double tol) {
  if (x.size() != P.dim()) throw GeometryError("contains_point: dimension mismatch");
  if (P.is_empty()) return false;
  if (P.rows() == 0) return true;
  return ((P.C() * x - P.d()).array() <= tol).all();
}

}  // namespace tubempc
