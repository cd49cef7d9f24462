#include "tubempc/nmpc.hpp"

#include "lifting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tubempc {
namespace {

using detail::QpBuilder;

struct Jacobian {
  MatrixXd A, B;
  VectorXd f;
};

// Central differences of the step map.
Jacobian step_jacobian(const StepFn& F, const VectorXd& x, const VectorXd& u) {
  const auto n = x.size();
  const auto m = u.size();
  Jacobian J;
  J.f = F(x, u);
  J.A.resize(n, n);
  J.B.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
    VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    J.A.col(i) = (F(xp, u) - F(xm, u)) / (2.0 * h);
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(u(i)));
    VectorXd up = u, um = u;
    up(i) += h;
    um(i) -= h;
    J.B.col(i) = (F(x, up) - F(x, um)) / (2.0 * h);
  }
  return J;
}

double stage_cost(const NlpIterate& it, const NmpcConfig& c) {
  double J = 0.0;
  for (int k = 0; k < c.N; ++k) J += it.z[k].dot(c.Q * it.z[k]) + it.v[k].dot(c.R * it.v[k]);
  return J + it.z[c.N].dot(c.P * it.z[c.N]);
}

struct QpStep {
  NlpIterate target;
  VectorXd eq_multipliers;
  VectorXd ineq_multipliers;
  double slack_total = 0.0;
  bool ok = false;
  std::string diagnostic;
};

// Linearized subproblem in the full variables (z, v); with `soft` every
// inequality row of stage k is relaxed by a shared slack s_k >= 0.
QpStep solve_subproblem(const NlpIterate& it, const VectorXd& x0, const std::vector<Jacobian>& lin,
                        const NmpcConfig& c, bool soft, const QpSettings& st) {
  const int n = static_cast<int>(x0.size());
  const int m = static_cast<int>(it.v.front().size());
  const int N = c.N;
  auto zc = [&](int k) { return k * n; };
  auto vc = [&](int k) { return (N + 1) * n + k * m; };
  auto sc = [&](int k) { return (N + 1) * n + N * m + k; };
  QpBuilder bl;
  const int nvar = (N + 1) * n + N * m + (soft ? N + 1 : 0);
  for (int i = 0; i < nvar; ++i) bl.add_var();
  for (int k = 0; k < N; ++k) {
    QpBuilder::add_block(bl.H, zc(k), zc(k), 2.0 * c.Q);
    QpBuilder::add_block(bl.H, vc(k), vc(k), 2.0 * c.R);
  }
  QpBuilder::add_block(bl.H, zc(N), zc(N), 2.0 * c.P);
  if (soft)
    for (int k = 0; k <= N; ++k) bl.q[sc(k)] = c.slack_weight;

  for (int i = 0; i < n; ++i) {
    const int r = bl.eq_row(x0(i));
    bl.A.emplace_back(r, zc(0) + i, 1.0);
  }
  const MatrixXd I = MatrixXd::Identity(n, n);
  for (int k = 0; k < N; ++k) {
    const Jacobian& J = lin[k];
    const VectorXd rhs = J.f - J.A * it.z[k] - J.B * it.v[k];
    const int r0 = static_cast<int>(bl.b.size());
    for (int i = 0; i < n; ++i) bl.eq_row(rhs(i));
    QpBuilder::add_block(bl.A, r0, zc(k + 1), I);
    QpBuilder::add_block(bl.A, r0, zc(k), -J.A);
    QpBuilder::add_block(bl.A, r0, vc(k), -J.B);
  }
  for (int k = 0; k < N; ++k) {
    for (int r = 0; r < c.M.rows(); ++r) {
      const int row = bl.ineq_row(c.M.E(r));
      for (int i = 0; i < n; ++i)
        if (c.M.Cx(r, i) != 0.0) bl.G.emplace_back(row, zc(k) + i, c.M.Cx(r, i));
      for (int i = 0; i < m; ++i)
        if (c.M.Du(r, i) != 0.0) bl.G.emplace_back(row, vc(k) + i, c.M.Du(r, i));
      if (soft) bl.G.emplace_back(row, sc(k), -1.0);
    }
  }
  for (int r = 0; r < c.X_f.rows(); ++r) {
    const int row = bl.ineq_row(c.X_f.d()(r));
    for (int i = 0; i < n; ++i)
      if (c.X_f.C()(r, i) != 0.0) bl.G.emplace_back(row, zc(N) + i, c.X_f.C()(r, i));
    if (soft) bl.G.emplace_back(row, sc(N), -1.0);
  }
  if (soft)
    for (int k = 0; k <= N; ++k) {
      const int row = bl.ineq_row(0.0);
      bl.G.emplace_back(row, sc(k), -1.0);
    }

  const QpSolution sol = solve_qp(bl.finish(), st);
  QpStep out;
  if (sol.status != QpStatus::optimal) {
    out.diagnostic = std::string(to_string(sol.status)) + ": " + sol.diagnostic;
    return out;
  }
  out.ok = true;
  out.target.z.resize(N + 1);
  out.target.v.resize(N);
  for (int k = 0; k <= N; ++k) out.target.z[k] = sol.x.segment(zc(k), n);
  for (int k = 0; k < N; ++k) out.target.v[k] = sol.x.segment(vc(k), m);
  if (soft)
    for (int k = 0; k <= N; ++k) out.slack_total += std::max(0.0, sol.x(sc(k)));
  out.eq_multipliers = sol.y;
  out.ineq_multipliers = sol.z;
  return out;
}

NlpIterate blend(const NlpIterate& a, const NlpIterate& b, double t) {
  NlpIterate out;
  out.z.resize(a.z.size());
  out.v.resize(a.v.size());
  for (std::size_t k = 0; k < a.z.size(); ++k) out.z[k] = a.z[k] + t * (b.z[k] - a.z[k]);
  for (std::size_t k = 0; k < a.v.size(); ++k) out.v[k] = a.v[k] + t * (b.v[k] - a.v[k]);
  return out;
}

// l1 violation of the stage and terminal rows.
double row_violation(const NlpIterate& it, const NmpcConfig& c) {
  double s = 0.0;
  for (std::size_t k = 0; k < it.v.size(); ++k)
    s += (c.M.Cx * it.z[k] + c.M.Du * it.v[k] - c.M.E).cwiseMax(0.0).sum();
  if (c.X_f.rows()) s += (c.X_f.C() * it.z.back() - c.X_f.d()).cwiseMax(0.0).sum();
  return s;
}

double max_step(const NlpIterate& a, const NlpIterate& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.z.size(); ++k) s = std::max(s, (b.z[k] - a.z[k]).lpNorm<Eigen::Infinity>());
  for (std::size_t k = 0; k < a.v.size(); ++k) s = std::max(s, (b.v[k] - a.v[k]).lpNorm<Eigen::Infinity>());
  return s;
}

}  // namespace

StepFn crane_rk4_map(const CraneSurrogate& crane, double m_l, double beta_d, double Ts) {
  return [crane, m_l, beta_d, Ts](const VectorXd& x, const VectorXd& u) {
    return crane.rk4_step(x, u, m_l, beta_d, Ts);
  };
}

StepFn linear_map(const MatrixXd& A, const MatrixXd& B) {
  return [A, B](const VectorXd& x, const VectorXd& u) -> VectorXd { return A * x + B * u; };
}

NlpIterate transcribe_ms(const VectorXd& x0, int N, int m, const StepFn& F) {
  if (N < 1) throw std::invalid_argument("transcribe_ms: N must be positive");
  NlpIterate it;
  it.z.assign(N + 1, VectorXd::Zero(x0.size()));
  it.v.assign(N, VectorXd::Zero(m));
  it.z[0] = x0;
  bool finite = x0.allFinite();
  for (int k = 0; k < N && finite; ++k) {
    it.z[k + 1] = F(it.z[k], it.v[k]);
    finite = it.z[k + 1].allFinite();
  }
  if (!finite) {
    for (auto& z : it.z) z.setZero();
    it.warning = "rollout diverged; shooting nodes zero-initialized";
  }
  it.defects = shooting_defects(it, F);
  return it;
}

VectorXd shooting_defects(const NlpIterate& it, const StepFn& F) {
  const int N = static_cast<int>(it.v.size());
  const auto n = it.z.front().size();
  VectorXd d(N * n);
  for (int k = 0; k < N; ++k) d.segment(k * n, n) = F(it.z[k], it.v[k]) - it.z[k + 1];
  return d;
}

SqpResult sqp_solve(const NlpIterate& init, const VectorXd& x0, const StepFn& F,
                    const NmpcConfig& cfg, const QpSettings& qp_settings) {
  if (static_cast<int>(init.v.size()) != cfg.N)
    throw std::invalid_argument("sqp_solve: iterate horizon does not match config");
  SqpResult res;
  NlpIterate cur = init;
  cur.z[0] = x0;
  double mu = 1.0;
  // Exact l1 merit: cost plus penalized defects and row violations. The
  // rows matter because early iterates (the u = 0 rollout) can break them.
  auto merit = [&](const NlpIterate& it, const VectorXd& d) {
    return stage_cost(it, cfg) + mu * (d.lpNorm<1>() + row_violation(it, cfg));
  };
  cur.defects = shooting_defects(cur, F);

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    std::vector<Jacobian> lin;
    lin.reserve(cfg.N);
    for (int k = 0; k < cfg.N; ++k) lin.push_back(step_jacobian(F, cur.z[k], cur.v[k]));

    QpStep qs = solve_subproblem(cur, x0, lin, cfg, res.relaxed, qp_settings);
    ++res.qp_solves;
    if (!qs.ok && !res.relaxed) {
      res.relaxed = true;
      qs = solve_subproblem(cur, x0, lin, cfg, true, qp_settings);
      ++res.qp_solves;
    }
    if (!qs.ok) {
      res.diagnostic = "SQP subproblem failed: " + qs.diagnostic;
      break;
    }
    res.slack_total = qs.slack_total;
    const double step = max_step(cur, qs.target);
    if (step <= cfg.step_tol) {
      res.converged = true;
      break;
    }
    // Penalty above the largest multiplier keeps the merit exact.
    double lam = 0.0;
    if (qs.eq_multipliers.size()) lam = qs.eq_multipliers.lpNorm<Eigen::Infinity>();
    if (qs.ineq_multipliers.size()) lam = std::max(lam, qs.ineq_multipliers.lpNorm<Eigen::Infinity>());
    mu = std::max(mu, 1.1 * lam + 1.0);

    const double phi0 = merit(cur, cur.defects);
    // Directional derivative of the merit along the step. The linearized
    // defects vanish at the target; the rows are linear, so by convexity
    // their violation changes at most by viol(target) - viol(cur).
    double slope = -mu * cur.defects.lpNorm<1>() +
                   mu * (row_violation(qs.target, cfg) - row_violation(cur, cfg));
    for (int k = 0; k < cfg.N; ++k) {
      slope += 2.0 * cur.z[k].dot(cfg.Q * (qs.target.z[k] - cur.z[k]));
      slope += 2.0 * cur.v[k].dot(cfg.R * (qs.target.v[k] - cur.v[k]));
    }
    slope += 2.0 * cur.z[cfg.N].dot(cfg.P * (qs.target.z[cfg.N] - cur.z[cfg.N]));

    double t = 1.0;
    bool accepted = false;
    NlpIterate trial;
    VectorXd d;
    for (int ls = 0; ls < 30; ++ls) {
      trial = blend(cur, qs.target, t);
      d = shooting_defects(trial, F);
      if (merit(trial, d) <= phi0 + 1e-4 * t * std::min(slope, 0.0)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      res.diagnostic = "SQP line search failed";
      break;
    }
    cur = std::move(trial);
    cur.defects = d;
    ++res.iterations;
    if (t * step <= cfg.step_tol) {
      // Tiny damped steps only count when the iterate is consistent.
      res.converged = cur.defects.lpNorm<Eigen::Infinity>() <= std::sqrt(cfg.step_tol) &&
                      row_violation(cur, cfg) <= std::sqrt(cfg.step_tol);
      if (!res.converged) res.diagnostic = "SQP stalled";
      break;
    }
  }
  cur.merit = merit(cur, cur.defects);
  res.cost = stage_cost(cur, cfg);
  res.max_defect = cur.defects.size() ? cur.defects.lpNorm<Eigen::Infinity>() : 0.0;
  res.iterate = std::move(cur);
  if (!res.converged && res.diagnostic.empty()) res.diagnostic = "SQP iteration limit reached";
  return res;
}

NmpcConfig nmpc_config_from(const TubeSynthesis& syn, const MatrixXd& Q, const MatrixXd& R, int N) {
  NmpcConfig c;
  c.N = N;
  c.Q = Q;
  c.R = R;
  c.P = syn.P;
  c.K_f = syn.K_f;
  c.M = syn.M;
  const auto term = mpi_terminal(syn.A0 + syn.B0 * syn.K_f, syn.M.under_feedback(syn.K_f));
  if (!term.converged) throw SynthesisError("untightened terminal set: " + term.diagnostic);
  c.X_f = term.set;
  return c;
}

NmpcController::NmpcController(NmpcConfig cfg, StepFn F) : cfg_(std::move(cfg)), F_(std::move(F)) {}

void NmpcController::reset() {
  mode_ = 1;
  warm_.reset();
  last_.reset();
}

ControlStep NmpcController::control_step(const VectorXd& x_meas) {
  ControlStep st;
  // Membership is re-checked every step: the terminal law comes from a
  // linear model and need not keep the true plant inside X_f.
  mode_ = contains_point(cfg_.X_f, x_meas, 1e-9) ? 2 : 1;
  if (mode_ == 2) {
    st.mode = 2;
    st.z0 = x_meas;
    st.u = cfg_.K_f * x_meas;
    st.v0 = st.u;
    st.cost = x_meas.dot(cfg_.P * x_meas);
    st.stage_cost = x_meas.dot(cfg_.Q * x_meas) + st.u.dot(cfg_.R * st.u);
    return st;
  }
  const int m = static_cast<int>(cfg_.R.rows());
  NlpIterate init;
  if (warm_) {
    // Shift by one stage and append the terminal feedback.
    init.z.assign(warm_->z.begin() + 1, warm_->z.end());
    init.v.assign(warm_->v.begin() + 1, warm_->v.end());
    const VectorXd v_last = cfg_.K_f * init.z.back();
    init.v.push_back(v_last);
    init.z.push_back(F_(init.z.back(), v_last));
    init.z[0] = x_meas;
    if (!init.z.back().allFinite()) init = transcribe_ms(x_meas, cfg_.N, m, F_);
  } else {
    init = transcribe_ms(x_meas, cfg_.N, m, F_);
  }
  SqpResult r = sqp_solve(init, x_meas, F_, cfg_);
  st.qp_iterations = r.iterations;
  st.feasible = r.converged && !r.relaxed;
  st.slack_total = r.slack_total;
  st.z0 = r.iterate.z[0];
  st.v0 = r.iterate.v[0];
  st.u = st.v0;
  st.cost = r.cost;
  st.stage_cost = st.z0.dot(cfg_.Q * st.z0) + st.v0.dot(cfg_.R * st.v0);
  st.diagnostic = r.diagnostic;
  if (r.relaxed) st.diagnostic += st.diagnostic.empty() ? "hard rows relaxed" : "; hard rows relaxed";
  warm_ = r.iterate;
  last_ = std::move(r);
  return st;
}

}  // namespace tubempc
