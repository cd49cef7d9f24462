#include "lifting.hpp"

#include <algorithm>
#include <limits>

namespace tubempc::detail {

void QpBuilder::add_block(std::vector<Triplet>& t, int r0, int c0, const MatrixXd& M) {
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      if (M(i, j) != 0.0) t.emplace_back(r0 + static_cast<int>(i), c0 + static_cast<int>(j), M(i, j));
}

QpProblem QpBuilder::finish() const {
  QpProblem qp;
  const auto n = static_cast<Eigen::Index>(ncols);
  qp.H.resize(n, n);
  qp.H.setFromTriplets(H.begin(), H.end());
  qp.q = Eigen::Map<const VectorXd>(q.data(), n);
  qp.A.resize(static_cast<Eigen::Index>(b.size()), n);
  qp.A.setFromTriplets(A.begin(), A.end());
  qp.b = Eigen::Map<const VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  qp.G.resize(static_cast<Eigen::Index>(h.size()), n);
  qp.G.setFromTriplets(G.begin(), G.end());
  qp.h = Eigen::Map<const VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
  return qp;
}

namespace {

LiftColumns encode_polytope(QpBuilder& bl, const HPolytope& P, int lambda_col) {
  const int n = P.dim();
  LiftColumns cols;
  for (int i = 0; i < n; ++i) cols.emplace_back(bl.add_var(), VectorXd::Unit(n, i));
  for (int r = 0; r < P.rows(); ++r) {
    const double d = P.d()(r);
    const int row = bl.ineq_row(lambda_col < 0 ? d : 0.0);
    for (int i = 0; i < n; ++i)
      if (P.C()(r, i) != 0.0) bl.G.emplace_back(row, cols[i].first, P.C()(r, i));
    if (lambda_col >= 0 && d != 0.0) bl.G.emplace_back(row, lambda_col, -d);
  }
  return cols;
}

}  // namespace

LiftColumns encode_lifting(QpBuilder& bl, const SupportSet& S, int lambda_col) {
  using K = SupportSet::Kind;
  switch (S.kind()) {
    case K::polytope:
      return encode_polytope(bl, S.base(), lambda_col);
    case K::minkowski_chain: {
      LiftColumns out;
      for (const auto& M : S.matrices()) {
        const LiftColumns sub = encode_polytope(bl, S.base(), lambda_col);
        for (const auto& [c, v] : sub) out.emplace_back(c, S.scale() * (M * v));
      }
      return out;
    }
    case K::hull_of_union: {
      LiftColumns out;
      std::vector<int> lambdas;
      for (const auto& mem : S.members()) {
        const int lj = bl.add_var();
        lambdas.push_back(lj);
        const int r = bl.ineq_row(0.0);
        bl.G.emplace_back(r, lj, -1.0);
        const LiftColumns sub = encode_lifting(bl, mem, lj);
        out.insert(out.end(), sub.begin(), sub.end());
      }
      const int er = bl.eq_row(lambda_col < 0 ? 1.0 : 0.0);
      for (int lj : lambdas) bl.A.emplace_back(er, lj, 1.0);
      if (lambda_col >= 0) bl.A.emplace_back(er, lambda_col, -1.0);
      return out;
    }
    case K::linear_image: {
      LiftColumns out = encode_lifting(bl, S.inner(), lambda_col);
      for (auto& [c, v] : out) v = S.map() * v;
      return out;
    }
    case K::scaled: {
      LiftColumns out = encode_lifting(bl, S.inner(), lambda_col);
      for (auto& [c, v] : out) v *= S.scale();
      return out;
    }
  }
  return {};
}

double lifted_gauge(const SupportSet& S, const VectorXd& x) {
  QpBuilder bl;
  const int t = bl.add_var();
  bl.q[t] = 1.0;
  const int r = bl.ineq_row(0.0);
  bl.G.emplace_back(r, t, -1.0);
  const LiftColumns cols = encode_lifting(bl, S, t);
  const int n = S.dim();
  const int r0 = static_cast<int>(bl.b.size());
  for (int i = 0; i < n; ++i) bl.eq_row(x(i));
  for (const auto& [c, v] : cols)
    for (int i = 0; i < n; ++i)
      if (v(i) != 0.0) bl.A.emplace_back(r0 + i, c, v(i));
  // Rows of A can be empty when S is flat in some coordinate; those rows then
  // only hold when x_i = 0, which the LP reports as infeasible.
  const QpSolution sol = solve_qp(bl.finish());
  if (sol.status == QpStatus::infeasible) return std::numeric_limits<double>::infinity();
  if (sol.status != QpStatus::optimal) return -1.0;
  return std::max(0.0, sol.x(t));
}

}  // namespace tubempc::detail
