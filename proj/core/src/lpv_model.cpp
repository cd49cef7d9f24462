#include "tubempc/lpv_model.hpp"

#include <cmath>
#include <stdexcept>

namespace tubempc {

VectorXd SchedulingBox::corner(int j) const {
  VectorXd p(dim());
  for (int i = 0; i < dim(); ++i) p(i) = (j >> i) & 1 ? hi(i) : lo(i);
  return p;
}

SchedulingWeights scheduling_weights(const SchedulingBox& box, const VectorXd& p) {
  const int d = box.dim();
  if (p.size() != d) throw std::invalid_argument("scheduling_weights: dimension mismatch");
  SchedulingWeights out;
  VectorXd t(d);
  for (int i = 0; i < d; ++i) {
    const double span = box.hi(i) - box.lo(i);
    double ti = span > 0 ? (p(i) - box.lo(i)) / span : 0.0;
    if (ti < 0.0 || ti > 1.0 || !std::isfinite(ti)) {
      out.clamped = true;
      ti = std::isfinite(ti) ? std::clamp(ti, 0.0, 1.0) : 0.0;
    }
    t(i) = ti;
  }
  out.sigma.resize(box.corners());
  for (int j = 0; j < box.corners(); ++j) {
    double w = 1.0;
    for (int i = 0; i < d; ++i) w *= (j >> i) & 1 ? t(i) : 1.0 - t(i);
    out.sigma(j) = w;
  }
  return out;
}

PolytopicLPV::PolytopicLPV(std::vector<LinearVertex> vertices, SchedulingBox box, double Ts,
                           HPolytope X, HPolytope U, HPolytope W)
    : vertices_(std::move(vertices)), box_(std::move(box)), Ts_(Ts), X_(std::move(X)),
      U_(std::move(U)), W_(std::move(W)) {
  if (vertices_.empty()) throw std::invalid_argument("PolytopicLPV: no vertices");
  if (static_cast<int>(vertices_.size()) != box_.corners())
    throw std::invalid_argument("PolytopicLPV: vertex count must equal 2^d");
  if (!(Ts_ > 0.0)) throw std::invalid_argument("PolytopicLPV: Ts must be positive");
  for (const auto& v : vertices_)
    if (v.A.rows() != n() || v.A.cols() != n() || v.B.rows() != n() || v.B.cols() != m())
      throw std::invalid_argument("PolytopicLPV: vertex dimension mismatch");
}

LinearVertex PolytopicLPV::combine(const VectorXd& sigma) const {
  LinearVertex out{MatrixXd::Zero(n(), n()), MatrixXd::Zero(n(), m())};
  for (int j = 0; j < num_vertices(); ++j) {
    if (sigma(j) == 0.0) continue;
    out.A += sigma(j) * vertices_[j].A;
    out.B += sigma(j) * vertices_[j].B;
  }
  return out;
}

LinearVertex PolytopicLPV::evaluate(const VectorXd& p, bool* clamped) const {
  const auto w = scheduling_weights(box_, p);
  if (clamped) *clamped = w.clamped;
  return combine(w.sigma);
}

LinearVertex PolytopicLPV::nominal() const { return evaluate(box_.center()); }

PolytopicLPV PolytopicLPV::with_sets(HPolytope X, HPolytope U, HPolytope W) const {
  return PolytopicLPV(vertices_, box_, Ts_, std::move(X), std::move(U), std::move(W));
}

Linearization linearize(const ContinuousDynamics& f, const VectorXd& x_r, const VectorXd& u_r,
                        const VectorXd& xdot_r) {
  const VectorXd f0 = f(x_r, u_r);
  if (!f0.allFinite()) throw std::domain_error("linearize: non-finite f value");
  const auto n = x_r.size();
  const auto m = u_r.size();
  Linearization out{MatrixXd(f0.size(), n), MatrixXd(f0.size(), m), f0};
  if (xdot_r.size()) out.R -= xdot_r;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x_r(i)));
    VectorXd xp = x_r, xm = x_r;
    xp(i) += h;
    xm(i) -= h;
    const VectorXd col = (f(xp, u_r) - f(xm, u_r)) / (xp(i) - xm(i));
    if (!col.allFinite()) throw std::domain_error("linearize: non-finite f value");
    out.Ac.col(i) = col;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(u_r(i)));
    VectorXd up = u_r, um = u_r;
    up(i) += h;
    um(i) -= h;
    const VectorXd col = (f(x_r, up) - f(x_r, um)) / (up(i) - um(i));
    if (!col.allFinite()) throw std::domain_error("linearize: non-finite f value");
    out.Bc.col(i) = col;
  }
  return out;
}

std::pair<MatrixXd, MatrixXd> discretize_euler(const MatrixXd& Ac, const MatrixXd& Bc, double Ts) {
  if (!(Ts > 0.0)) throw std::invalid_argument("discretize_euler: Ts must be positive");
  MatrixXd A = Ts * Ac;
  A.diagonal().array() += 1.0;
  return {A, Ts * Bc};
}

DisturbanceEstimate estimate_disturbance_set(const PolytopicLPV& model, const DiscreteDynamics& f,
                                             const std::vector<DisturbanceSample>& samples,
                                             const VectorXd& floor) {
  if (samples.empty()) throw std::invalid_argument("estimate_disturbance_set: empty grid");
  DisturbanceEstimate out;
  out.raw = VectorXd::Zero(model.n());
  for (const auto& s : samples) {
    const auto AB = model.evaluate(s.p);
    const VectorXd err = f(s.x, s.u, s.p) - AB.A * s.x - AB.B * s.u;
    out.raw = out.raw.cwiseMax(err.cwiseAbs());
  }
  out.half_width = (1.1 * out.raw).cwiseMax(floor);
  out.W = HPolytope::symmetric_box(out.half_width);
  return out;
}

}  // namespace tubempc
