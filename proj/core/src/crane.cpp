#include "tubempc/crane.hpp"

#include <stdexcept>

namespace tubempc {

CraneSurrogate::CraneSurrogate(CraneParams params) : p_(params) {
  const double bl = kClampedFreeRoot;
  beta_ = bl / p_.L;
  kappa_ = (std::cosh(bl) + std::cos(bl)) / (std::sinh(bl) + std::sin(bl));
  psi_L_ = 1.0;
  psi_L_ = psi(p_.L);
  const double rhoA = p_.rho * p_.area;
  // Closed forms of the modal integrals for the clamped-free first mode:
  // int psi = 2 kappa / beta, int psi^2 = L, int psi''^2 = beta^4 L (psi(L) = 2).
  const double s2 = psi_L_ * psi_L_;
  a_ = rhoA * (2.0 * kappa_ / beta_) / psi_L_;
  b_ = rhoA * p_.L / s2;
  k_ = p_.EI * std::pow(beta_, 4) * p_.L / s2;
  m_r_ = p_.m_c + rhoA * p_.L + p_.m_t;
}

VectorXd CraneSurrogate::f(const VectorXd& x, const VectorXd& u, double m_l, double beta_d) const {
  if (x.size() != 6 || u.size() != 2) throw std::invalid_argument("crane: bad dimensions");
  if (!x.allFinite() || !u.allFinite()) throw std::domain_error("crane: non-finite state");
  const Eigen::Matrix<double, 6, 1> xs = x;
  const Eigen::Matrix<double, 2, 1> us = u;
  return dynamics<double>(xs, us, m_l, beta_d);
}

VectorXd CraneSurrogate::rk4_step(const VectorXd& x, const VectorXd& u, double m_l, double beta_d,
                                  double Ts) const {
  const VectorXd k1 = f(x, u, m_l, beta_d);
  const VectorXd k2 = f(x + 0.5 * Ts * k1, u, m_l, beta_d);
  const VectorXd k3 = f(x + 0.5 * Ts * k2, u, m_l, beta_d);
  const VectorXd k4 = f(x + Ts * k3, u, m_l, beta_d);
  return x + Ts / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double CraneSurrogate::energy(const VectorXd& x, double m_l) const {
  const double y = x(2), w = x(4);
  const Eigen::Vector3d qd(x(1), x(3), x(5));
  const Eigen::Vector3d J(1.0, dpsi_hat(y) * w, psi_hat(y));
  const double at = a_ + p_.m_t, bt = b_ + p_.m_t;
  Eigen::Matrix3d M;
  M << m_r_, 0, at, 0, m_l + p_.m_d, 0, at, 0, bt;
  M += m_l * J * J.transpose();
  return 0.5 * qd.dot(M * qd) + 0.5 * k_ * w * w;
}

double CraneSurrogate::clamped_frequency(double y_l, double m_l) const {
  const double rhoA = p_.rho * p_.area;
  const double py = psi(y_l);
  const double den = (rhoA * p_.L + py * py * m_l + psi_L_ * psi_L_ * p_.m_t) * std::pow(p_.L, 3);
  return std::sqrt(std::pow(kClampedFreeRoot, 4) * p_.EI / den);
}

Linearization CraneSurrogate::rest_linearization(double m_l, double y_l, double beta_d) const {
  const double g = psi_hat(y_l);
  const double at = a_ + p_.m_t, bt = b_ + p_.m_t;
  Eigen::Matrix3d M;
  M << m_r_ + m_l, 0, at + m_l * g, 0, m_l + p_.m_d, 0, at + m_l * g, 0, bt + m_l * g * g;
  const Eigen::Matrix3d Mi = M.inverse();
  Linearization out{MatrixXd::Zero(6, 6), MatrixXd::Zero(6, 2), VectorXd::Zero(6)};
  const int pos[3] = {0, 2, 4};
  const int vel[3] = {1, 3, 5};
  for (int i = 0; i < 3; ++i) {
    out.Ac(pos[i], vel[i]) = 1.0;
    out.Ac(vel[i], 4) = -Mi(i, 2) * k_;
    out.Ac(vel[i], 5) = -Mi(i, 2) * beta_d * k_;
    out.Bc(vel[i], 0) = Mi(i, 0);
    out.Bc(vel[i], 1) = Mi(i, 1);
  }
  return out;
}

SchedulingBox crane_default_box() {
  SchedulingBox box;
  box.lo = Eigen::Vector3d(0.04, 0.0, 0.005);
  box.hi = Eigen::Vector3d(1.5, 1.9, 0.02);
  box.names = {"m_l", "y_l", "beta_d"};
  return box;
}

PolytopicLPV crane_lpv(const CraneSurrogate& crane, const CraneLpvOptions& opt) {
  if (opt.box.dim() != 3) throw std::invalid_argument("crane_lpv: scheduling box must be 3D");
  std::vector<LinearVertex> verts;
  for (int j = 0; j < opt.box.corners(); ++j) {
    const VectorXd p = opt.box.corner(j);
    const auto lin = crane.rest_linearization(p(0), p(1), p(2));
    auto [A, B] = discretize_euler(lin.Ac, lin.Bc, opt.Ts);
    verts.push_back({A, B});
  }
  return PolytopicLPV(std::move(verts), opt.box, opt.Ts, opt.X, opt.U, opt.W);
}

DiscreteDynamics crane_euler_map(const CraneSurrogate& crane, double Ts) {
  return [crane, Ts](const VectorXd& x, const VectorXd& u, const VectorXd& p) -> VectorXd {
    return x + Ts * crane.f(x, u, p(0), p(2));
  };
}

std::vector<DisturbanceSample> crane_disturbance_grid(const SchedulingBox& box,
                                                      const VectorXd& x_half,
                                                      const VectorXd& u_half, int density) {
  if (density < 2) throw std::invalid_argument("crane_disturbance_grid: density must be >= 2");
  auto axis = [density](double lo, double hi) {
    std::vector<double> v(density);
    for (int i = 0; i < density; ++i) v[i] = lo + (hi - lo) * i / (density - 1);
    return v;
  };
  const auto ml = axis(box.lo(0), box.hi(0));
  const auto yl = axis(box.lo(1), box.hi(1));
  const auto bd = axis(box.lo(2), box.hi(2));
  // State coordinates other than y_l, then the two inputs.
  const int free_idx[5] = {0, 1, 3, 4, 5};
  std::vector<std::vector<double>> xs(5), us(2);
  for (int k = 0; k < 5; ++k) xs[k] = axis(-x_half(free_idx[k]), x_half(free_idx[k]));
  for (int k = 0; k < 2; ++k) us[k] = axis(-u_half(k), u_half(k));

  std::vector<DisturbanceSample> out;
  std::vector<int> c(7, 0);
  for (double a : ml)
    for (double y : yl)
      for (double b : bd) {
        std::fill(c.begin(), c.end(), 0);
        while (true) {
          DisturbanceSample s;
          s.x = VectorXd::Zero(6);
          for (int k = 0; k < 5; ++k) s.x(free_idx[k]) = xs[k][c[k]];
          s.x(2) = y;
          s.u = Eigen::Vector2d(us[0][c[5]], us[1][c[6]]);
          s.p = Eigen::Vector3d(a, y, b);
          out.push_back(std::move(s));
          int k = 0;
          while (k < 7 && ++c[k] == density) c[k++] = 0;
          if (k == 7) break;
        }
      }
  return out;
}

}  // namespace tubempc
