#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include "detail.hpp"
#include "tubempc/geometry.hpp"

namespace tubempc {
namespace {

// Indices of rows after merging exact (to 1e-12) duplicates, keeping the
// tightest offset.
std::vector<int> dedupe_rows(const MatrixXd& C, const VectorXd& d) {
  std::map<std::vector<long long>, int> seen;
  std::vector<int> keep;
  for (int i = 0; i < C.rows(); ++i) {
    std::vector<long long> key(C.cols());
    for (int j = 0; j < C.cols(); ++j) key[j] = std::llround(C(i, j) * 1e12);
    auto [it, fresh] = seen.emplace(key, static_cast<int>(keep.size()));
    if (fresh) {
      keep.push_back(i);
    } else if (d(i) < d(keep[it->second])) {
      keep[it->second] = i;
    }
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

// max c'x over the listed rows plus optional extra rows.
detail::RawLp lp_over(const MatrixXd& C, const VectorXd& d, const std::vector<int>& idx,
                      const MatrixXd& extraC, const VectorXd& extrad, const VectorXd& c) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  MatrixXd A(k + extraC.rows(), C.cols());
  VectorXd b(k + extraC.rows());
  for (Eigen::Index i = 0; i < k; ++i) {
    A.row(i) = C.row(idx[i]);
    b(i) = d(idx[i]);
  }
  A.bottomRows(extraC.rows()) = extraC;
  b.tail(extrad.size()) = extrad;
  return detail::lp_max_raw(A, b, c);
}

// Straightforward reduction: one LP per row over all surviving rows.
std::vector<int> reduce_direct(const MatrixXd& C, const VectorXd& d, std::vector<int> rows) {
  const MatrixXd none(0, C.cols());
  const VectorXd nod(0);
  for (std::size_t pos = 0; pos < rows.size();) {
    const int r = rows[pos];
    std::vector<int> others;
    others.reserve(rows.size() - 1);
    for (int i : rows)
      if (i != r) others.push_back(i);
    // Relaxed copy of r keeps the LP bounded whenever the set is.
    MatrixXd rc = C.row(r);
    VectorXd rd(1);
    rd(0) = d(r) + 1.0;
    const auto lp = lp_over(C, d, others, rc, rd, C.row(r).transpose());
    if (lp.status == LPStatus::optimal && lp.value <= d(r) + kRedundancyTol) {
      rows.erase(rows.begin() + static_cast<std::ptrdiff_t>(pos));
    } else {
      ++pos;
    }
  }
  return rows;
}

// Clarkson's output-sensitive reduction. Needs a strictly interior point and
// a bounding box so every restricted LP is bounded.
std::vector<int> reduce_clarkson(const MatrixXd& C, const VectorXd& d, const std::vector<int>& rows,
                                 const VectorXd& center, const MatrixXd& boxC,
                                 const VectorXd& boxd) {
  enum class State { unknown, essential, redundant };
  std::vector<State> st(C.rows(), State::unknown);
  std::vector<int> ess;
  for (int r : rows) {
    while (st[r] == State::unknown) {
      const auto lp = lp_over(C, d, ess, boxC, boxd, C.row(r).transpose());
      if (lp.status != LPStatus::optimal) throw GeometryError("reduce: restricted LP failed");
      if (lp.value <= d(r) + kRedundancyTol) {
        st[r] = State::redundant;
        break;
      }
      const VectorXd dir = lp.point - center;
      int hit = -1;
      double tmin = std::numeric_limits<double>::infinity();
      for (int i : rows) {
        if (st[i] != State::unknown) continue;
        const double rate = C.row(i).dot(dir);
        if (rate <= 1e-14) continue;
        const double t = (d(i) - C.row(i).dot(center)) / rate;
        if (t < tmin) {
          tmin = t;
          hit = i;
        }
      }
      if (hit < 0) hit = r;
      st[hit] = State::essential;
      ess.push_back(hit);
    }
  }
  std::sort(ess.begin(), ess.end());
  // Weakly redundant rows (touching the set) can be picked up on ties.
  for (std::size_t pos = 0; pos < ess.size();) {
    const int r = ess[pos];
    std::vector<int> others;
    for (int i : ess)
      if (i != r) others.push_back(i);
    const auto lp = lp_over(C, d, others, boxC, boxd, C.row(r).transpose());
    if (lp.status == LPStatus::optimal && lp.value <= d(r) + kRedundancyTol) {
      ess.erase(ess.begin() + static_cast<std::ptrdiff_t>(pos));
    } else {
      ++pos;
    }
  }
  return ess;
}

HPolytope select_rows(const HPolytope& P, const std::vector<int>& idx) {
  MatrixXd C(idx.size(), P.dim());
  VectorXd d(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    C.row(static_cast<Eigen::Index>(i)) = P.C().row(idx[i]);
    d(static_cast<Eigen::Index>(i)) = P.d()(idx[i]);
  }
  return HPolytope(C, d);
}

}  // namespace

HPolytope reduce(const HPolytope& P) {
  if (P.is_empty() || P.rows() == 0) return P;
  const MatrixXd& C = P.C();
  const VectorXd& d = P.d();
  std::vector<int> rows = dedupe_rows(C, d);
  if (P.is_bounded() && P.margin() > 1e-7) {
    const int n = P.dim();
    MatrixXd boxC(2 * n, n);
    boxC << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
    VectorXd boxd(2 * n);
    for (int i = 0; i < n; ++i) {
      VectorXd e = VectorXd::Zero(n);
      e(i) = 1.0;
      boxd(i) = support(P, e) + 1.0;
      boxd(n + i) = support(P, -e) + 1.0;
    }
    rows = reduce_clarkson(C, d, rows, P.center(), boxC, boxd);
  } else {
    rows = reduce_direct(C, d, rows);
  }
  return select_rows(P, rows);
}

HPolytope intersect(const HPolytope& P, const HPolytope& Q) {
  if (P.dim() != Q.dim()) throw GeometryError("intersect: dimension mismatch");
  if (P.is_empty() || Q.is_empty()) return HPolytope::empty_set(P.dim());
  MatrixXd C(P.rows() + Q.rows(), P.dim());
  C << P.C(), Q.C();
  VectorXd d(P.rows() + Q.rows());
  d << P.d(), Q.d();
  return HPolytope(C, d);
}

HPolytope intersect_reduce(const HPolytope& P, const HPolytope& Q) {
  return reduce(intersect(P, Q));
}

HPolytope pontryagin_diff(const HPolytope& P, const SupportSet& S) {
  if (P.dim() != S.dim()) throw GeometryError("pontryagin_diff: dimension mismatch");
  if (P.is_empty()) return P;
  VectorXd d = P.d();
  for (int i = 0; i < P.rows(); ++i) d(i) -= S.support(P.C().row(i).transpose());
  return HPolytope(P.C(), d);
}

HPolytope pontryagin_diff(const HPolytope& P, const HPolytope& S) {
  if (P.dim() != S.dim()) throw GeometryError("pontryagin_diff: dimension mismatch");
  if (P.is_empty()) return P;
  VectorXd d = P.d();
  for (int i = 0; i < P.rows(); ++i) d(i) -= support(S, P.C().row(i).transpose());
  return HPolytope(P.C(), d);
}

HPolytope pre_set(const HPolytope& P, const MatrixXd& A_cl) {
  if (A_cl.rows() != P.dim() || A_cl.cols() != P.dim())
    throw GeometryError("pre_set: dimension mismatch");
  if (P.is_empty()) return P;
  return HPolytope(P.C() * A_cl, P.d());
}

HPolytope project_fm(const HPolytope& P, const std::vector<int>& keep, std::size_t max_rows) {
  const int n = P.dim();
  std::vector<bool> kept(n, false);
  for (int k : keep) {
    if (k < 0 || k >= n || kept[k]) throw GeometryError("project_fm: invalid keep set");
    kept[k] = true;
  }
  if (P.is_empty()) return HPolytope::empty_set(static_cast<int>(keep.size()));

  std::vector<int> cols(n);  // original coordinate of each current column
  for (int i = 0; i < n; ++i) cols[i] = i;
  HPolytope cur = P;
  constexpr double kZero = 1e-12;
  while (true) {
    // Cheapest remaining elimination first.
    int best = -1;
    std::size_t best_cost = 0;
    for (int j = 0; j < cur.dim(); ++j) {
      if (kept[cols[j]]) continue;
      std::size_t pos = 0, neg = 0, zero = 0;
      for (int i = 0; i < cur.rows(); ++i) {
        const double c = cur.C()(i, j);
        if (c > kZero) ++pos;
        else if (c < -kZero) ++neg;
        else ++zero;
      }
      const std::size_t cost = pos * neg + zero;
      if (best < 0 || cost < best_cost) {
        best = j;
        best_cost = cost;
      }
    }
    if (best < 0) break;
    if (best_cost > max_rows)
      throw GeometryError("project_fm: elimination would create " + std::to_string(best_cost) +
                          " rows");

    const MatrixXd& C = cur.C();
    const VectorXd& d = cur.d();
    std::vector<int> pos, neg, zero;
    for (int i = 0; i < cur.rows(); ++i) {
      const double c = C(i, best);
      if (c > kZero) pos.push_back(i);
      else if (c < -kZero) neg.push_back(i);
      else zero.push_back(i);
    }
    const int m = cur.dim() - 1;
    auto drop = [&](const VectorXd& row) {
      VectorXd out(m);
      out.head(best) = row.head(best);
      out.tail(m - best) = row.tail(m - best);
      return out;
    };
    MatrixXd Cn(static_cast<Eigen::Index>(pos.size() * neg.size() + zero.size()), m);
    VectorXd dn(Cn.rows());
    Eigen::Index r = 0;
    for (int i : zero) {
      Cn.row(r) = drop(C.row(i).transpose()).transpose();
      dn(r++) = d(i);
    }
    for (int p : pos) {
      const double cp = C(p, best);
      for (int q : neg) {
        const double cq = -C(q, best);
        const VectorXd row = C.row(p).transpose() / cp + C.row(q).transpose() / cq;
        Cn.row(r) = drop(row).transpose();
        dn(r++) = d(p) / cp + d(q) / cq;
      }
    }
    cols.erase(cols.begin() + best);
    cur = reduce(HPolytope(Cn, dn));
    if (cur.is_empty()) return HPolytope::empty_set(static_cast<int>(keep.size()));
  }
  // Reorder columns to follow keep.
  MatrixXd C(cur.rows(), keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto it = std::find(cols.begin(), cols.end(), keep[k]);
    C.col(static_cast<Eigen::Index>(k)) = cur.C().col(it - cols.begin());
  }
  return HPolytope(C, cur.d());
}

bool is_subset(const HPolytope& P, const HPolytope& Q, double tol) {
  if (P.dim() != Q.dim()) throw GeometryError("is_subset: dimension mismatch");
  if (P.is_empty()) return true;
  if (Q.is_empty()) return false;
  for (int i = 0; i < Q.rows(); ++i)
    if (support(P, Q.C().row(i).transpose()) > Q.d()(i) + tol) return false;
  return true;
}

bool is_subset(const SupportSet& P, const HPolytope& Q, double tol) {
  if (P.dim() != Q.dim()) throw GeometryError("is_subset: dimension mismatch");
  if (Q.is_empty()) return false;
  for (int i = 0; i < Q.rows(); ++i)
    if (P.support(Q.C().row(i).transpose()) > Q.d()(i) + tol) return false;
  return true;
}

std::vector<BoundarySample> sample_boundary(const SupportSet& S,
                                            const std::vector<VectorXd>& directions) {
  std::vector<BoundarySample> out;
  out.reserve(directions.size());
  for (const auto& l : directions) out.push_back({l, S.support_point(l), S.support(l)});
  return out;
}

std::vector<BoundarySample> sample_boundary(const HPolytope& P,
                                            const std::vector<VectorXd>& directions) {
  std::vector<BoundarySample> out;
  out.reserve(directions.size());
  for (const auto& l : directions) {
    const auto r = lp_solve(l, P, Sense::max);
    if (r.status != LPStatus::optimal) throw GeometryError("sample_boundary: set not bounded");
    out.push_back({l, r.point, r.value});
  }
  return out;
}

std::vector<VectorXd> circle_directions(int count) {
  std::vector<VectorXd> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double a = 2.0 * std::numbers::pi * k / count;
    VectorXd l(2);
    l << std::cos(a), std::sin(a);
    out.push_back(l);
  }
  return out;
}

std::vector<VectorXd> sphere_directions(int dim, int count, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<VectorXd> out;
  out.reserve(count);
  while (static_cast<int>(out.size()) < count) {
    VectorXd l(dim);
    for (int i = 0; i < dim; ++i) l(i) = g(rng);
    const double nrm = l.norm();
    if (nrm < 1e-12) continue;
    out.push_back(l / nrm);
  }
  return out;
}

std::vector<Eigen::Vector2d> outer_polygon(const std::vector<BoundarySample>& samples) {
  std::vector<Eigen::Vector2d> verts;
  const std::size_t k = samples.size();
  if (k < 3) return verts;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& a = samples[i];
    const auto& b = samples[(i + 1) % k];
    Eigen::Matrix2d M;
    M << a.direction(0), a.direction(1), b.direction(0), b.direction(1);
    const Eigen::Vector2d rhs(a.h, b.h);
    if (std::abs(M.determinant()) < 1e-14) continue;
    verts.push_back(M.partialPivLu().solve(rhs));
  }
  return verts;
}

double polygon_area(const std::vector<Eigen::Vector2d>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % v.size()];
    s += a.x() * b.y() - a.y() * b.x();
  }
  return 0.5 * std::abs(s);
}

}  // namespace tubempc
