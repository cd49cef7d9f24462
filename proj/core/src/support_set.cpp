#include <cmath>
#include <limits>

#include "detail.hpp"
#include "lifting.hpp"
#include "tubempc/geometry.hpp"

namespace tubempc {

struct SupportSet::Node {
  Kind kind = Kind::polytope;
  int dim = 0;
  HPolytope P;                    // polytope / chain base
  std::vector<MatrixXd> mats;     // chain
  MatrixXd stacked_t;             // chain: [M_0'; M_1'; ...]
  MatrixXd stacked;               // chain: [M_0 M_1 ...]
  VectorXd lo_rep, hi_rep;        // chain over an axis box
  double factor = 1.0;            // chain scale or scaled factor
  std::vector<SupportSet> members;
  MatrixXd M;
  std::vector<SupportSet> inner;  // single element for linear_image / scaled
};

namespace {

VectorXd box_argmax(const VectorXd& v, const VectorXd& lo, const VectorXd& hi) {
  VectorXd x(v.size());
  for (int i = 0; i < v.size(); ++i)
    x(i) = v(i) > 0 ? hi(i) : (v(i) < 0 ? lo(i) : 0.5 * (lo(i) + hi(i)));
  return x;
}

}  // namespace

SupportSet SupportSet::polytope(HPolytope P) {
  if (!P.is_bounded()) throw GeometryError("SupportSet: polytope must be bounded");
  auto n = std::make_shared<Node>();
  n->kind = Kind::polytope;
  n->dim = P.dim();
  n->P = std::move(P);
  return SupportSet(std::move(n));
}

SupportSet SupportSet::minkowski_chain(HPolytope W, std::vector<MatrixXd> mats, double scale) {
  if (!W.is_bounded()) throw GeometryError("SupportSet: chain base must be bounded");
  if (mats.empty()) throw GeometryError("SupportSet: empty chain");
  if (!(scale >= 0.0)) throw GeometryError("SupportSet: negative chain scale");
  const int rows = static_cast<int>(mats.front().rows());
  const int cols = W.dim();
  const int k = static_cast<int>(mats.size());
  auto n = std::make_shared<Node>();
  n->kind = Kind::minkowski_chain;
  n->dim = rows;
  n->stacked_t.resize(static_cast<Eigen::Index>(k) * cols, rows);
  n->stacked.resize(rows, static_cast<Eigen::Index>(k) * cols);
  for (int m = 0; m < k; ++m) {
    if (mats[m].rows() != rows || mats[m].cols() != cols)
      throw GeometryError("SupportSet: chain matrix dimension mismatch");
    n->stacked_t.middleRows(static_cast<Eigen::Index>(m) * cols, cols) = mats[m].transpose();
    n->stacked.middleCols(static_cast<Eigen::Index>(m) * cols, cols) = mats[m];
  }
  if (const auto& bx = W.axis_box()) {
    n->lo_rep = bx->first.replicate(k, 1);
    n->hi_rep = bx->second.replicate(k, 1);
  }
  n->P = std::move(W);
  n->mats = std::move(mats);
  n->factor = scale;
  return SupportSet(std::move(n));
}

SupportSet SupportSet::hull_of_union(std::vector<SupportSet> members) {
  if (members.empty()) throw GeometryError("SupportSet: empty hull");
  const int dim = members.front().dim();
  for (const auto& m : members)
    if (m.dim() != dim) throw GeometryError("SupportSet: hull member dimension mismatch");
  auto n = std::make_shared<Node>();
  n->kind = Kind::hull_of_union;
  n->dim = dim;
  n->members = std::move(members);
  return SupportSet(std::move(n));
}

SupportSet SupportSet::linear_image(MatrixXd M, SupportSet S) {
  if (M.cols() != S.dim()) throw GeometryError("SupportSet: image map dimension mismatch");
  auto n = std::make_shared<Node>();
  n->kind = Kind::linear_image;
  n->dim = static_cast<int>(M.rows());
  n->M = std::move(M);
  n->inner.push_back(std::move(S));
  return SupportSet(std::move(n));
}

SupportSet SupportSet::scaled(double factor, SupportSet S) {
  if (!(factor >= 0.0)) throw GeometryError("SupportSet: negative scale");
  auto n = std::make_shared<Node>();
  n->kind = Kind::scaled;
  n->dim = S.dim();
  n->factor = factor;
  n->inner.push_back(std::move(S));
  return SupportSet(std::move(n));
}

const SupportSet::Node& SupportSet::node() const {
  if (!node_) throw GeometryError("SupportSet: empty handle");
  return *node_;
}

SupportSet::Kind SupportSet::kind() const { return node().kind; }
int SupportSet::dim() const { return node().dim; }
const HPolytope& SupportSet::base() const { return node().P; }
const std::vector<MatrixXd>& SupportSet::matrices() const { return node().mats; }
double SupportSet::scale() const { return node().factor; }
const std::vector<SupportSet>& SupportSet::members() const { return node().members; }
const MatrixXd& SupportSet::map() const { return node().M; }
const SupportSet& SupportSet::inner() const { return node().inner.front(); }

double SupportSet::support(const VectorXd& l) const {
  const Node& n = node();
  if (l.size() != n.dim) throw GeometryError("support: dimension mismatch");
  switch (n.kind) {
    case Kind::polytope:
      return tubempc::support(n.P, l);
    case Kind::minkowski_chain: {
      const VectorXd v = n.stacked_t * l;
      double h = 0.0;
      if (n.lo_rep.size()) {
        h = v.cwiseProduct(n.lo_rep).cwiseMax(v.cwiseProduct(n.hi_rep)).sum();
      } else {
        const int c = n.P.dim();
        for (std::size_t m = 0; m < n.mats.size(); ++m)
          h += tubempc::support(n.P, v.segment(static_cast<Eigen::Index>(m) * c, c));
      }
      return n.factor * h;
    }
    case Kind::hull_of_union: {
      double h = -std::numeric_limits<double>::infinity();
      for (const auto& m : n.members) h = std::max(h, m.support(l));
      return h;
    }
    case Kind::linear_image:
      return n.inner.front().support(n.M.transpose() * l);
    case Kind::scaled:
      return n.factor * n.inner.front().support(l);
  }
  return 0.0;
}

VectorXd SupportSet::support_point(const VectorXd& l) const {
  const Node& n = node();
  if (l.size() != n.dim) throw GeometryError("support_point: dimension mismatch");
  switch (n.kind) {
    case Kind::polytope: {
      const auto r = lp_solve(l, n.P, Sense::max);
      if (r.status != LPStatus::optimal) throw GeometryError("support_point: LP failed");
      return r.point;
    }
    case Kind::minkowski_chain: {
      const VectorXd v = n.stacked_t * l;
      VectorXd xs(v.size());
      if (n.lo_rep.size()) {
        xs = box_argmax(v, n.lo_rep, n.hi_rep);
      } else {
        const int c = n.P.dim();
        for (std::size_t m = 0; m < n.mats.size(); ++m) {
          const auto seg = static_cast<Eigen::Index>(m) * c;
          const auto r = lp_solve(v.segment(seg, c), n.P, Sense::max);
          if (r.status != LPStatus::optimal) throw GeometryError("support_point: LP failed");
          xs.segment(seg, c) = r.point;
        }
      }
      return n.factor * (n.stacked * xs);
    }
    case Kind::hull_of_union: {
      std::size_t best = 0;
      double h = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n.members.size(); ++j) {
        const double hj = n.members[j].support(l);
        if (hj > h) {
          h = hj;
          best = j;
        }
      }
      return n.members[best].support_point(l);
    }
    case Kind::linear_image:
      return n.M * n.inner.front().support_point(n.M.transpose() * l);
    case Kind::scaled:
      return n.factor * n.inner.front().support_point(l);
  }
  return VectorXd();
}

double support(const SupportSet& S, const VectorXd& l) { return S.support(l); }

GaugeBounds gauge(const SupportSet& S, const VectorXd& x, double threshold, double rel_gap) {
  const int n = S.dim();
  if (x.size() != n) throw GeometryError("gauge: dimension mismatch");
  GaugeBounds out;
  const double xn = x.norm();
  if (xn == 0.0) return out;

  // Restricted polar {l : g_k'l <= 1} built from support points g_k, boxed so
  // the LP stays bounded while the polar is still coarse.
  constexpr double kBox = 1e9;
  constexpr int kMaxRounds = 60;
  std::vector<VectorXd> pts;
  for (int i = 0; i < n; ++i) {
    VectorXd e = VectorXd::Zero(n);
    e(i) = 1.0;
    pts.push_back(S.support_point(e));
    pts.push_back(S.support_point(-e));
  }
  pts.push_back(S.support_point(x / xn));

  out.lower = 0.0;
  out.upper = std::numeric_limits<double>::infinity();
  for (int round = 0; round < kMaxRounds; ++round) {
    const int q = static_cast<int>(pts.size());
    MatrixXd C(q + 2 * n, n);
    VectorXd d(q + 2 * n);
    for (int k = 0; k < q; ++k) C.row(k) = pts[k].transpose();
    d.head(q).setOnes();
    C.middleRows(q, n).setIdentity();
    C.bottomRows(n) = -MatrixXd::Identity(n, n);
    d.tail(2 * n).setConstant(kBox);
    const auto lp = detail::lp_max_raw(C, d, x);
    if (lp.status != LPStatus::optimal) throw GeometryError("gauge: master LP failed");
    const VectorXd& l = lp.point;
    out.upper = std::min(out.upper, std::max(0.0, l.dot(x)));
    const double h = S.support(l);
    if (h > 0.0) {
      out.lower = std::max(out.lower, l.dot(x) / h);
    } else if (l.dot(x) > 0.0) {
      out.lower = std::numeric_limits<double>::infinity();
    }
    if (out.lower > out.upper) out.upper = out.lower;  // box cap artifact
    if (out.upper <= threshold || out.lower > threshold) return out;
    if (out.upper - out.lower <= rel_gap * std::max(1.0, out.upper)) return out;
    pts.push_back(S.support_point(l));
  }
  // Cutting planes tail off near the boundary; settle it with the lifted LP.
  const double g = detail::lifted_gauge(S, x);
  if (g >= 0.0) out.lower = out.upper = g;
  return out;
}

bool contains_point(const SupportSet& S, const VectorXd& x, double tol) {
  if (S.kind() == SupportSet::Kind::polytope) return contains_point(S.base(), x, tol);
  const double thr = 1.0 + tol;
  const auto g = gauge(S, x, thr);
  if (g.upper <= thr) return true;
  if (g.lower > thr) return false;
  return 0.5 * (g.lower + g.upper) <= thr;
}

}  // namespace tubempc
