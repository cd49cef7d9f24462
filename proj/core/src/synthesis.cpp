#include "tubempc/synthesis.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <future>
#include <limits>

namespace tubempc {

MixedConstraints MixedConstraints::from_sets(const HPolytope& X, const HPolytope& U) {
  MixedConstraints M;
  const int n = X.dim(), m = U.dim();
  const int qx = X.rows(), qu = U.rows();
  M.Cx = MatrixXd::Zero(qx + qu, n);
  M.Du = MatrixXd::Zero(qx + qu, m);
  M.E.resize(qx + qu);
  M.Cx.topRows(qx) = X.C();
  M.Du.bottomRows(qu) = U.C();
  M.E << X.d(), U.d();
  return M;
}

HPolytope MixedConstraints::as_polytope() const {
  MatrixXd C(rows(), Cx.cols() + Du.cols());
  C << Cx, Du;
  return HPolytope(C, E);
}

HPolytope MixedConstraints::state_part() const {
  std::vector<int> idx;
  for (int r = 0; r < rows(); ++r)
    if (Du.row(r).isZero(0.0) && !Cx.row(r).isZero(0.0)) idx.push_back(r);
  MatrixXd C(idx.size(), Cx.cols());
  VectorXd d(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    C.row(static_cast<Eigen::Index>(k)) = Cx.row(idx[k]);
    d(static_cast<Eigen::Index>(k)) = E(idx[k]);
  }
  return idx.empty() ? HPolytope::universe(static_cast<int>(Cx.cols())) : HPolytope(C, d);
}

HPolytope MixedConstraints::input_part() const {
  std::vector<int> idx;
  for (int r = 0; r < rows(); ++r)
    if (Cx.row(r).isZero(0.0) && !Du.row(r).isZero(0.0)) idx.push_back(r);
  MatrixXd C(idx.size(), Du.cols());
  VectorXd d(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    C.row(static_cast<Eigen::Index>(k)) = Du.row(idx[k]);
    d(static_cast<Eigen::Index>(k)) = E(idx[k]);
  }
  return idx.empty() ? HPolytope::universe(static_cast<int>(Du.cols())) : HPolytope(C, d);
}

HPolytope MixedConstraints::under_feedback(const MatrixXd& K) const {
  return HPolytope(Cx + Du * K, E);
}

bool MixedConstraints::satisfied(const VectorXd& x, const VectorXd& u, double tol) const {
  return ((Cx * x + Du * u - E).array() <= tol).all();
}

DareResult dare_solve(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
                      double tol, int max_iterations) {
  DareResult out;
  MatrixXd P = Q;
  for (int it = 1; it <= max_iterations; ++it) {
    const MatrixXd BtP = B.transpose() * P;
    const MatrixXd S = R + BtP * B;
    const MatrixXd G = S.ldlt().solve(BtP * A);
    MatrixXd Pn = Q + A.transpose() * P * A - (BtP * A).transpose() * G;
    Pn = 0.5 * (Pn + Pn.transpose());
    if (!Pn.allFinite()) break;
    const double step = (Pn - P).cwiseAbs().rowwise().sum().maxCoeff();
    const double scale = std::max(1.0, Pn.cwiseAbs().rowwise().sum().maxCoeff());
    P = std::move(Pn);
    out.iterations = it;
    if (step <= tol * scale) {
      out.converged = true;
      break;
    }
  }
  out.P = P;
  out.K = -(R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
  if (out.converged && A.rows() > 0 && spectral_radius(A + B * out.K) >= 1.0)
    out.converged = false;
  return out;
}

double spectral_radius(const MatrixXd& A) {
  if (A.rows() == 0) return 0.0;
  return Eigen::EigenSolver<MatrixXd>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

MrpiResult mrpi_approx(const MatrixXd& A_cl, const MatrixXd& K, const HPolytope& W,
                       double alpha_target, int i_max) {
  const int n = W.dim();
  const int m = static_cast<int>(K.rows());
  if (A_cl.rows() != n || A_cl.cols() != n || K.cols() != n)
    throw std::invalid_argument("mrpi_approx: dimension mismatch");
  if (!W.is_bounded() || W.is_empty()) throw std::invalid_argument("mrpi_approx: W not bounded");
  for (int r = 0; r < W.rows(); ++r)
    if (!(W.d()(r) > 0.0)) throw std::invalid_argument("mrpi_approx: W must contain 0 inside");

  // H-representation of K W from the lifted set {(u, w) : u = K w, w in W}.
  MatrixXd KWC(0, m);
  VectorXd KWd(0);
  if (m > 0 && !K.isZero(0.0)) {
    MatrixXd L = MatrixXd::Zero(W.rows() + 2 * m, m + n);
    VectorXd l = VectorXd::Zero(W.rows() + 2 * m);
    L.block(0, m, W.rows(), n) = W.C();
    l.head(W.rows()) = W.d();
    L.block(W.rows(), 0, m, m).setIdentity();
    L.block(W.rows(), m, m, n) = -K;
    L.block(W.rows() + m, 0, m, m) = -MatrixXd::Identity(m, m);
    L.block(W.rows() + m, m, m, n) = K;
    std::vector<int> keep(m);
    for (int i = 0; i < m; ++i) keep[i] = i;
    const HPolytope KW = project_fm(HPolytope(L, l), keep);
    std::vector<int> rows;
    for (int r = 0; r < KW.rows(); ++r)
      if (KW.d()(r) > 1e-12) rows.push_back(r);
    KWC.resize(rows.size(), m);
    KWd.resize(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      KWC.row(static_cast<Eigen::Index>(k)) = KW.C().row(rows[k]);
      KWd(static_cast<Eigen::Index>(k)) = KW.d()(rows[k]);
    }
  }

  MrpiResult out;
  std::vector<MatrixXd> mats{MatrixXd::Identity(n, n)};
  MatrixXd Ai = MatrixXd::Identity(n, n);
  for (int i = 1; i <= i_max; ++i) {
    Ai = A_cl * Ai;
    double alpha = 0.0;
    for (int r = 0; r < W.rows(); ++r)
      alpha = std::max(alpha, support(W, Ai.transpose() * W.C().row(r).transpose()) / W.d()(r));
    if (KWC.rows()) {
      const MatrixXd KAi = K * Ai;
      for (int r = 0; r < KWC.rows(); ++r)
        alpha = std::max(alpha, support(W, KAi.transpose() * KWC.row(r).transpose()) / KWd(r));
    }
    out.i = i;
    out.alpha = alpha;
    if (alpha <= alpha_target) {
      out.converged = true;
      break;
    }
    if (i < i_max) mats.push_back(Ai);
  }
  const double scale = out.alpha < 1.0 ? 1.0 / (1.0 - out.alpha) : 1.0;
  out.Z = SupportSet::minkowski_chain(W, std::move(mats), scale);
  return out;
}

SupportSet tube_cross_section(const std::vector<SupportSet>& members) {
  if (members.empty()) throw std::invalid_argument("tube_cross_section: empty list");
  if (members.size() == 1) return members.front();
  return SupportSet::hull_of_union(members);
}

MixedConstraints tighten(const MixedConstraints& M, const SupportSet& Z, const MatrixXd& K) {
  MixedConstraints out = M;
  for (int r = 0; r < M.rows(); ++r) {
    const VectorXd v = (M.Cx.row(r) + M.Du.row(r) * K).transpose();
    if (v.isZero(0.0)) continue;
    out.E(r) = M.E(r) - Z.support(v);
  }
  return out;
}

InvariantSetResult mpi_terminal(const MatrixXd& A_cl, const HPolytope& X0, int cap, double tol) {
  InvariantSetResult out;
  if (X0.is_empty()) {
    out.set = X0;
    out.converged = true;
    return out;
  }
  const HPolytope base = reduce(X0);
  const MatrixXd& G = base.C();
  const VectorXd& F = base.d();
  MatrixXd curC = G;
  VectorXd curd = F;
  HPolytope cur = base;
  MatrixXd Ak = MatrixXd::Identity(A_cl.rows(), A_cl.cols());
  for (int k = 1; k <= cap; ++k) {
    Ak = A_cl * Ak;
    const MatrixXd Gk = G * Ak;
    std::vector<int> add;
    for (int r = 0; r < Gk.rows(); ++r) {
      const double nrm = Gk.row(r).norm();
      if (nrm < 1e-14) {
        if (F(r) < 0.0) {
          out.set = HPolytope::empty_set(X0.dim());
          out.iterations = k;
          out.converged = true;
          return out;
        }
        continue;
      }
      const double h = support(cur, Gk.row(r).transpose());
      if (h > F(r) + tol * nrm) add.push_back(r);
    }
    out.iterations = k;
    if (add.empty()) {
      out.converged = true;
      out.set = reduce(cur);
      return out;
    }
    const auto q = curC.rows();
    curC.conservativeResize(q + static_cast<Eigen::Index>(add.size()), Eigen::NoChange);
    curd.conservativeResize(curC.rows());
    for (std::size_t a = 0; a < add.size(); ++a) {
      curC.row(q + static_cast<Eigen::Index>(a)) = Gk.row(add[a]);
      curd(q + static_cast<Eigen::Index>(a)) = F(add[a]);
    }
    cur = HPolytope(curC, curd);
    if (cur.is_empty()) {
      out.set = cur;
      out.converged = true;
      return out;
    }
    curC = cur.C();
    curd = cur.d();
  }
  out.set = reduce(cur);
  out.diagnostic = "iteration cap reached; last iterate is not certified invariant";
  return out;
}

InvariantSetResult mpi_terminal(const MatrixXd& A, const MatrixXd& B, const MatrixXd& K,
                                const HPolytope& X, const HPolytope& U, int cap, double tol) {
  const HPolytope KU = U.rows() ? HPolytope(U.C() * K, U.d()) : HPolytope::universe(X.dim());
  return mpi_terminal(A + B * K, intersect(X, KU), cap, tol);
}

InvariantSetResult mcpi(const MatrixXd& A, const MatrixXd& B, const HPolytope& X,
                        const HPolytope& U, int cap, std::size_t max_rows) {
  const int n = X.dim(), m = U.dim();
  InvariantSetResult out;
  HPolytope cur = reduce(X);
  std::vector<int> keep(n);
  for (int i = 0; i < n; ++i) keep[i] = i;
  for (int k = 1; k <= cap; ++k) {
    out.iterations = k;
    if (cur.is_empty()) {
      out.set = cur;
      out.converged = true;
      return out;
    }
    const int q = cur.rows(), qu = U.rows();
    MatrixXd L = MatrixXd::Zero(2 * q + qu, n + m);
    VectorXd l(2 * q + qu);
    L.topLeftCorner(q, n) = cur.C() * A;
    L.topRightCorner(q, m) = cur.C() * B;
    L.block(q, 0, q, n) = cur.C();
    L.bottomRightCorner(qu, m) = U.C();
    l << cur.d(), cur.d(), U.d();
    HPolytope next;
    try {
      next = project_fm(HPolytope(L, l), keep, max_rows);
    } catch (const GeometryError& e) {
      out.set = cur;
      out.diagnostic = std::string("projection aborted: ") + e.what();
      return out;
    }
    if (static_cast<std::size_t>(next.rows()) > max_rows) {
      out.set = cur;
      out.diagnostic = "projection exceeded the row limit";
      return out;
    }
    const bool fixpoint = is_subset(cur, next, 1e-8);
    cur = next;
    if (fixpoint) {
      out.converged = true;
      out.set = cur;
      return out;
    }
  }
  out.set = cur;
  out.diagnostic = "iteration cap reached; outer approximation of the MCPI set";
  return out;
}

bool rpi_check(const MatrixXd& A_cl, const SupportSet& Z, const HPolytope& W, int directions,
               double tol) {
  std::vector<VectorXd> dirs = sphere_directions(Z.dim(), directions, 12345);
  if (Z.kind() == SupportSet::Kind::polytope)
    for (int r = 0; r < Z.base().rows(); ++r) dirs.push_back(Z.base().C().row(r).transpose());
  const MatrixXd At = A_cl.transpose();
  for (const auto& l : dirs) {
    const double lhs = Z.support(At * l) + support(W, l);
    const double rhs = Z.support(l);
    if (lhs > rhs + tol * std::abs(rhs)) return false;
  }
  return true;
}

TubeSynthesis synthesize(const PolytopicLPV& model, const SynthesisConfig& cfg) {
  TubeSynthesis s;
  const auto nom = model.nominal();
  s.A0 = nom.A;
  s.B0 = nom.B;
  s.W = model.W();
  const int M = model.num_vertices();

  struct VertexOut {
    MatrixXd K;
    MrpiResult mrpi;
    bool dare_ok = false;
  };
  auto job = [&](int j) {
    VertexOut o;
    const auto& v = model.vertices()[j];
    const auto d = dare_solve(v.A, v.B, cfg.Q_tube, cfg.R_tube);
    o.dare_ok = d.converged;
    o.K = d.K;
    if (o.dare_ok) o.mrpi = mrpi_approx(v.A + v.B * d.K, d.K, model.W(), cfg.alpha_target, cfg.i_max);
    return o;
  };
  std::vector<VertexOut> outs(M);
  if (cfg.parallel) {
    std::vector<std::future<VertexOut>> fut;
    for (int j = 0; j < M; ++j) fut.push_back(std::async(std::launch::async, job, j));
    for (int j = 0; j < M; ++j) outs[j] = fut[j].get();
  } else {
    for (int j = 0; j < M; ++j) outs[j] = job(j);
  }
  for (int j = 0; j < M; ++j) {
    if (!outs[j].dare_ok)
      throw SynthesisError("DARE did not converge for vertex " + std::to_string(j) +
                           " (pair not stabilizable?)");
    if (!outs[j].mrpi.converged)
      throw SynthesisError("mRPI approximation for vertex " + std::to_string(j) +
                           " reached i_max with alpha " + std::to_string(outs[j].mrpi.alpha));
    s.K_vertex.push_back(outs[j].K);
    s.i_vertex.push_back(outs[j].mrpi.i);
    s.alpha_vertex.push_back(outs[j].mrpi.alpha);
    s.Z_vertex.push_back(outs[j].mrpi.Z);
  }

  const auto dn = dare_solve(s.A0, s.B0, cfg.Q_tube, cfg.R_tube);
  if (!dn.converged) throw SynthesisError("DARE did not converge for the nominal pair");
  s.K = dn.K;
  s.Z = tube_cross_section(s.Z_vertex);
  s.KZ = SupportSet::linear_image(s.K, s.Z);

  s.M = MixedConstraints::from_sets(model.X(), model.U());
  s.M_bar = tighten(s.M, s.Z, s.K);
  for (int r = 0; r < s.M_bar.rows(); ++r)
    if (s.M_bar.E(r) < 0.0)
      throw SynthesisError("tightened constraint " + std::to_string(r) +
                           " excludes the origin: tube too large for the constraints");
  s.X_bar = s.M_bar.state_part();
  s.U_bar = s.M_bar.input_part();

  s.terminal_pair = cfg.terminal_pair;
  const MatrixXd& At = cfg.terminal_pair == TerminalPair::nominal ? s.A0 : model.vertices().back().A;
  const MatrixXd& Bt = cfg.terminal_pair == TerminalPair::nominal ? s.B0 : model.vertices().back().B;
  const auto dt = dare_solve(At, Bt, cfg.Q, cfg.R);
  if (!dt.converged) throw SynthesisError("DARE did not converge for the terminal pair");
  s.P = dt.P;
  s.K_f = dt.K;
  const auto term = mpi_terminal(At + Bt * s.K_f, s.M_bar.under_feedback(s.K_f), cfg.terminal_cap);
  if (!term.converged) throw SynthesisError("terminal set: " + term.diagnostic);
  if (term.set.is_empty()) throw SynthesisError("terminal set is empty");
  s.X_f_bar = term.set;
  s.terminal_iterations = term.iterations;
  s.terminal_converged = term.converged;
  return s;
}

}  // namespace tubempc
