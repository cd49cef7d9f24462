#include "tubempc/tube_mpc.hpp"

#include "lifting.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tubempc {
namespace {

using Triplet = Eigen::Triplet<double>;
using detail::QpBuilder;

QpBuilder nominal_rows(const NominalQpData& d, QpLayout& L) {
  const int n = static_cast<int>(d.A.rows());
  const int m = static_cast<int>(d.B.cols());
  L.n = n;
  L.m = m;
  L.N = d.N;
  QpBuilder bl;
  for (int i = 0; i < L.aux(); ++i) bl.add_var();
  // Cost: ||z_N||_P^2 + sum ||z_k||_Q^2 + ||v_k||_R^2 + rho sum s_k.
  for (int k = 0; k < d.N; ++k) {
    bl.add_block(bl.H, L.z(k), L.z(k), 2.0 * d.Q);
    bl.add_block(bl.H, L.v(k), L.v(k), 2.0 * d.R);
  }
  bl.add_block(bl.H, L.z(d.N), L.z(d.N), 2.0 * d.P);
  for (int k = 0; k <= d.N; ++k) bl.q[L.s(k)] = d.slack_weight;

  const MatrixXd I = MatrixXd::Identity(n, n);
  for (int k = 0; k < d.N; ++k) {
    const int r0 = static_cast<int>(bl.b.size());
    for (int i = 0; i < n; ++i) bl.eq_row(0.0);
    bl.add_block(bl.A, r0, L.z(k + 1), I);
    bl.add_block(bl.A, r0, L.z(k), -d.A);
    bl.add_block(bl.A, r0, L.v(k), -d.B);
  }
  for (int k = 0; k < d.N; ++k) {
    for (int r = 0; r < d.M.rows(); ++r) {
      const int row = bl.ineq_row(d.M.E(r));
      for (int i = 0; i < n; ++i)
        if (d.M.Cx(r, i) != 0.0) bl.G.emplace_back(row, L.z(k) + i, d.M.Cx(r, i));
      for (int i = 0; i < m; ++i)
        if (d.M.Du(r, i) != 0.0) bl.G.emplace_back(row, L.v(k) + i, d.M.Du(r, i));
    }
  }
  for (int r = 0; r < d.X_f.rows(); ++r) {
    const int row = bl.ineq_row(d.X_f.d()(r));
    for (int i = 0; i < n; ++i)
      if (d.X_f.C()(r, i) != 0.0) bl.G.emplace_back(row, L.z(d.N) + i, d.X_f.C()(r, i));
  }
  for (int k = 0; k <= d.N; ++k) {
    const int row = bl.ineq_row(0.0);
    bl.G.emplace_back(row, L.s(k), -1.0);
  }
  return bl;
}

void fix_initial_state(QpBuilder& bl, const QpLayout& L, const VectorXd& x0) {
  for (int i = 0; i < L.n; ++i) {
    const int r = bl.eq_row(x0(i));
    bl.A.emplace_back(r, L.z(0) + i, 1.0);
  }
}

// Largest row violation of the QP constraints at x.
double max_violation(const QpProblem& qp, const VectorXd& x) {
  double v = 0.0;
  if (qp.A.rows()) v = ((qp.A * x - qp.b).cwiseAbs() - 1e-9 * qp.b.cwiseAbs()).maxCoeff();
  if (qp.G.rows()) v = std::max(v, ((qp.G * x - qp.h) - 1e-9 * qp.h.cwiseAbs()).maxCoeff());
  return v;
}

std::vector<Triplet> triplets_of(const SparseMatrix& M) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(M.nonZeros()));
  for (int k = 0; k < M.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(M, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  return t;
}

}  // namespace

TubeQp build_nominal_qp(const VectorXd& x0, const NominalQpData& data) {
  TubeQp out;
  QpBuilder bl = nominal_rows(data, out.layout);
  fix_initial_state(bl, out.layout, x0);
  out.qp = bl.finish();
  out.band_row_begin = static_cast<int>(out.qp.h.size());
  return out;
}

TubeQp build_qp(const VectorXd& x_meas, const TubeSynthesis& syn, const MpcConfig& cfg) {
  if (x_meas.size() != syn.n() || !x_meas.allFinite())
    throw std::invalid_argument("build_qp: bad measurement");
  NominalQpData d{syn.A0, syn.B0, syn.M_bar, syn.X_f_bar,
                  cfg.Q, cfg.R, cfg.P.size() ? cfg.P : syn.P, cfg.N, cfg.slack_weight};
  TubeQp out;
  QpBuilder bl = nominal_rows(d, out.layout);
  if (cfg.optimize_z0) {
    const int first_aux = bl.ncols;
    const detail::LiftColumns cols = detail::encode_lifting(bl, syn.Z, -1);
    out.layout.n_aux = bl.ncols - first_aux;
    // z_0 + lifted point = x_meas
    const int n = out.layout.n;
    const int r0 = static_cast<int>(bl.b.size());
    for (int i = 0; i < n; ++i) {
      bl.eq_row(x_meas(i));
      bl.A.emplace_back(r0 + i, out.layout.z(0) + i, 1.0);
    }
    for (const auto& [c, v] : cols)
      for (int i = 0; i < n; ++i)
        if (v(i) != 0.0) bl.A.emplace_back(r0 + i, c, v(i));
  } else {
    fix_initial_state(bl, out.layout, x_meas);
  }
  out.qp = bl.finish();
  out.band_row_begin = static_cast<int>(out.qp.h.size());
  return out;
}

FrequencyEstimate modal_frequency(const MatrixXd& Ab, double Ts) {
  const double tr = Ab.trace();
  const double det = Ab.determinant();
  const double disc = tr * tr - 4.0 * det;
  if (disc >= 0.0) return {0.0, true};
  const double re = 0.5 * tr;
  const double im = 0.5 * std::sqrt(-disc);
  return {std::abs(std::atan2(im, re)) / Ts, false};
}

std::vector<FrequencyEstimate> frequency_predict(const PolytopicLPV& model,
                                                 const std::vector<VectorXd>& schedule,
                                                 int modal_index) {
  std::vector<FrequencyEstimate> out;
  out.reserve(schedule.size());
  for (const auto& p : schedule) {
    const MatrixXd A = model.evaluate(p).A;
    out.push_back(modal_frequency(A.block(modal_index, modal_index, 2, 2), model.Ts()));
  }
  return out;
}

double band_violation(double omega, const Band& band, BandMode mode) {
  if (mode == BandMode::excluded) {
    if (omega <= band.lo || omega >= band.hi) return 0.0;
    return std::min(omega - band.lo, band.hi - omega);
  }
  return std::max({band.lo - omega, omega - band.hi, 0.0});
}

void add_soft_bands(TubeQp& t, const std::vector<double>& omega_hat, const Band& band,
                    BandMode mode) {
  const int stages = t.layout.N + 1;
  if (static_cast<int>(omega_hat.size()) != stages)
    throw std::invalid_argument("add_soft_bands: one frequency per stage required");
  if (!(band.lo < band.hi)) throw std::invalid_argument("add_soft_bands: empty band");
  auto trip = triplets_of(t.qp.G);
  const auto m0 = t.qp.G.rows();
  VectorXd h(m0 + stages);
  h.head(m0) = t.qp.h;
  for (int k = 0; k < stages; ++k) {
    trip.emplace_back(static_cast<int>(m0) + k, t.layout.s(k), -1.0);
    h(m0 + k) = -band_violation(omega_hat[k], band, mode);
  }
  t.qp.G.resize(m0 + stages, t.qp.G.cols());
  t.qp.G.setFromTriplets(trip.begin(), trip.end());
  t.qp.h = h;
  t.band_row_begin = static_cast<int>(m0);
  t.band_row_count = stages;
}

TubeQp strip_soft_bands(const TubeQp& t) {
  TubeQp out = t;
  if (t.band_row_count == 0) return out;
  std::vector<Triplet> keep;
  const int b0 = t.band_row_begin, b1 = t.band_row_begin + t.band_row_count;
  for (const auto& tr : triplets_of(t.qp.G)) {
    if (tr.row() >= b0 && tr.row() < b1) continue;
    keep.emplace_back(tr.row() < b0 ? tr.row() : tr.row() - t.band_row_count, tr.col(), tr.value());
  }
  const auto m = t.qp.G.rows() - t.band_row_count;
  out.qp.G.resize(m, t.qp.G.cols());
  out.qp.G.setFromTriplets(keep.begin(), keep.end());
  VectorXd h(m);
  h << t.qp.h.head(b0), t.qp.h.tail(t.qp.h.size() - b1);
  out.qp.h = h;
  out.band_row_count = 0;
  return out;
}

QpOutcome solve_mpc_qp(const TubeQp& t, double slack_weight, const QpSettings& settings) {
  QpOutcome out;
  out.solution = solve_qp(t.qp, settings);
  if (out.solution.status != QpStatus::optimal) return out;
  const auto& L = t.layout;
  const VectorXd& x = out.solution.x;
  MpcPlan plan;
  for (int k = 0; k <= L.N; ++k) plan.z.push_back(x.segment(L.z(k), L.n));
  for (int k = 0; k < L.N; ++k) plan.v.push_back(x.segment(L.v(k), L.m));
  double ssum = 0.0;
  for (int k = 0; k <= L.N; ++k) {
    plan.s.push_back(x(L.s(k)));
    ssum += x(L.s(k));
  }
  plan.cost = out.solution.objective;
  plan.slack_cost = slack_weight * ssum;
  out.plan = std::move(plan);
  return out;
}

TubeMpcController::TubeMpcController(const TubeSynthesis& syn, MpcConfig cfg,
                                     const PolytopicLPV* model, ScheduleFn schedule)
    : syn_(syn), cfg_(std::move(cfg)), model_(model), schedule_(std::move(schedule)) {
  if (cfg_.N < 1) throw std::invalid_argument("MpcConfig: N must be >= 1");
  if (cfg_.P.size() == 0) cfg_.P = syn_.P;
  if (!(cfg_.slack_weight > 0.0)) throw std::invalid_argument("MpcConfig: slack weight must be > 0");
  A_f_ = syn_.A0 + syn_.B0 * syn_.K_f;
}

void TubeMpcController::reset() {
  mode_ = 1;
  z_.resize(0);
  plan_.reset();
  shift_ = 0;
  fallbacks_ = 0;
}

std::vector<double> TubeMpcController::predicted_frequencies(const VectorXd& x_meas) const {
  std::vector<VectorXd> sched;
  for (int k = 0; k <= cfg_.N; ++k) {
    // Frozen along the previous plan (shifted by one step); the first solve
    // uses the measurement for every stage.
    if (plan_) {
      const int idx = std::min(k + 1, cfg_.N);
      sched.push_back(schedule_(plan_->z[idx]));
    } else {
      sched.push_back(schedule_(x_meas));
    }
  }
  std::vector<double> w;
  for (const auto& f : frequency_predict(*model_, sched)) w.push_back(f.omega);
  return w;
}

ControlStep TubeMpcController::control_step(const VectorXd& x_meas) {
  if (mode_ == 2) {
    ControlStep st;
    const VectorXd e = x_meas - z_;
    st.tube_member = contains_point(syn_.Z, e, 1e-6);
    const bool in_terminal = contains_point(syn_.X_f_bar, z_, 1e-8);
    if (st.tube_member && in_terminal) {
      st.mode = 2;
      st.z0 = z_;
      st.v0 = syn_.K_f * z_;
      st.u = syn_.K * e + st.v0;
      st.cost = z_.dot(cfg_.P * z_);
      st.stage_cost = z_.dot(cfg_.Q * z_) + st.v0.dot(cfg_.R * st.v0);
      z_ = A_f_ * z_;
      return st;
    }
    mode_ = 1;
  }
  return mode1(x_meas);
}

ControlStep TubeMpcController::mode1(const VectorXd& x_meas) {
  ControlStep st;
  TubeQp t = build_qp(x_meas, syn_, cfg_);
  if (cfg_.band && model_ && schedule_)
    add_soft_bands(t, predicted_frequencies(x_meas), *cfg_.band, cfg_.band_mode);
  const QpOutcome res = solve_mpc_qp(t, cfg_.slack_weight);
  st.qp_iterations = res.solution.iterations;
  if (res.plan) {
    st.qp = true;
    plan_ = res.plan;
    shift_ = 0;
    const auto& p = *plan_;
    st.z0 = p.z[0];
    st.v0 = p.v[0];
    st.slack_total = 0.0;
    for (double s : p.s) st.slack_total += s;
    st.cost = p.cost - p.slack_cost;
    st.stage_cost = st.z0.dot(cfg_.Q * st.z0) + st.v0.dot(cfg_.R * st.v0);
    // The lifted columns of the solution already witness x_meas - z0 in Z
    // when every row holds; otherwise ask the membership oracle.
    st.tube_member = !cfg_.optimize_z0 || max_violation(t.qp, res.solution.x) <= 1e-7 ||
                     contains_point(syn_.Z, x_meas - st.z0, 1e-6);
    if (contains_point(syn_.X_f_bar, st.z0, 1e-9)) {
      // Terminal set reached: hand over to the terminal feedback.
      mode_ = 2;
      st.mode = 2;
      st.v0 = syn_.K_f * st.z0;
      z_ = A_f_ * st.z0;
    }
    st.u = syn_.K * (x_meas - st.z0) + st.v0;
    return st;
  }

  st.feasible = false;
  st.diagnostic = std::string("QP ") + to_string(res.solution.status) + ": " +
                  res.solution.diagnostic;
  ++fallbacks_;
  st.fallback = true;
  if (plan_ && shift_ + 1 < cfg_.N) {
    ++shift_;
    st.z0 = plan_->z[shift_];
    st.v0 = plan_->v[shift_];
    st.u = syn_.K * (x_meas - st.z0) + st.v0;
    st.tube_member = contains_point(syn_.Z, x_meas - st.z0, 1e-6);
  } else {
    st.z0 = VectorXd::Zero(syn_.n());
    st.v0 = VectorXd::Zero(syn_.m());
    st.u = syn_.K * x_meas;
    st.tube_member = contains_point(syn_.Z, x_meas, 1e-6);
    st.diagnostic += "; no plan to shift, applied K x";
  }
  return st;
}

}  // namespace tubempc
