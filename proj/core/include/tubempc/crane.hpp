#pragma once

#include <cmath>
#include <complex>

#include "tubempc/lpv_model.hpp"

namespace tubempc {

// Stacker crane with a flexible mast, reduced to one bending mode.
//
// State  x = [x_c, dx_c, y_l, dy_l, w_t, dw_t]  (carriage, lift, tip deflection)
// Input  u = [F1, F2]  (carriage force; lift force net of gravity)
//
// The mast deflection is w(y, t) = psi_hat(y) w_t(t), with psi_hat the
// clamped-free first mode shape normalized to 1 at the tip. Generalized
// coordinates q = (x_c, y_l, w_t). Kinetic energy
//   T = 1/2 m_r dx^2 + a_t dx dw + 1/2 b_t dw^2 + 1/2 (m_l + m_d) dy^2
//       + 1/2 m_l (J'dq)^2,         J = [1, psi_hat'(y) w, psi_hat(y)],
// potential 1/2 k w^2 and Rayleigh damping beta_d k dw on the modal
// coordinate. m_d is the lift drive mass moving vertically with the lift.
struct CraneParams {
  double m_c = 2.888;   // carriage (kg)
  double m_t = 2.0;     // tip mass (kg)
  double L = 1.9;       // mast length (m)
  double area = 3.2e-4; // mast cross-section (m^2)
  double rho = 2700.0;  // density (kg/m^3)
  double EI = 119.4;    // bending stiffness (N m^2)
  double m_d = 10.0;    // lift drive mass (kg)
};

inline constexpr double kClampedFreeRoot = 1.8751040687119611;

class CraneSurrogate {
 public:
  explicit CraneSurrogate(CraneParams params = {});

  const CraneParams& params() const { return p_; }
  double beta() const { return beta_; }
  double kappa() const { return kappa_; }
  double modal_a() const { return a_; }  // rho A int psi_hat
  double modal_b() const { return b_; }  // rho A int psi_hat^2
  double modal_k() const { return k_; }  // EI int psi_hat''^2

  // psi(y) unnormalized (psi(L) = 2) and derivatives of psi_hat = psi / psi(L).
  template <class T>
  T psi(const T& y) const {
    using std::cos;
    using std::cosh;
    using std::sin;
    using std::sinh;
    const T z = beta_ * y;
    return cosh(z) - cos(z) - kappa_ * (sinh(z) - sin(z));
  }
  template <class T>
  T psi_hat(const T& y) const { return psi(y) / psi_L_; }
  template <class T>
  T dpsi_hat(const T& y) const {
    using std::cos;
    using std::cosh;
    using std::sin;
    using std::sinh;
    const T z = beta_ * y;
    return beta_ * (sinh(z) + sin(z) - kappa_ * (cosh(z) - cos(z))) / psi_L_;
  }
  template <class T>
  T ddpsi_hat(const T& y) const {
    using std::cos;
    using std::cosh;
    using std::sin;
    using std::sinh;
    const T z = beta_ * y;
    return beta_ * beta_ * (cosh(z) + cos(z) - kappa_ * (sinh(z) + sin(z))) / psi_L_;
  }

  template <class T>
  Eigen::Matrix<T, 6, 1> dynamics(const Eigen::Matrix<T, 6, 1>& x, const Eigen::Matrix<T, 2, 1>& u,
                                  double m_l, double beta_d) const;

  VectorXd f(const VectorXd& x, const VectorXd& u, double m_l, double beta_d) const;
  VectorXd rk4_step(const VectorXd& x, const VectorXd& u, double m_l, double beta_d,
                    double Ts) const;
  // Kinetic plus modal strain energy.
  double energy(const VectorXd& x, double m_l) const;

  // First bending frequency of the mast clamped at the carriage (rad/s):
  // w1^2 = 1.875^4 EI / ((rho A L + psi(y)^2 m_l + psi(L)^2 m_t) L^3).
  double clamped_frequency(double y_l, double m_l) const;

  // Continuous-time linearization at rest at height y_l (closed form).
  Linearization rest_linearization(double m_l, double y_l, double beta_d) const;

 private:
  CraneParams p_;
  double beta_ = 0.0;
  double kappa_ = 0.0;
  double psi_L_ = 2.0;
  double a_ = 0.0, b_ = 0.0, k_ = 0.0;
  double m_r_ = 0.0;
};

template <class T>
Eigen::Matrix<T, 6, 1> CraneSurrogate::dynamics(const Eigen::Matrix<T, 6, 1>& x,
                                                const Eigen::Matrix<T, 2, 1>& u, double m_l,
                                                double beta_d) const {
  using M3 = Eigen::Matrix<T, 3, 3>;
  using V3 = Eigen::Matrix<T, 3, 1>;
  const T y = x(2);
  const T w = x(4);
  const T g = psi_hat(y);
  const T g1 = dpsi_hat(y);
  const T g2 = ddpsi_hat(y);
  const V3 qd(x(1), x(3), x(5));
  const V3 J(T(1.0), g1 * w, g);

  const double at = a_ + p_.m_t;
  const double bt = b_ + p_.m_t;
  M3 M;
  M << T(m_r_), T(0.0), T(at), T(0.0), T(m_l + p_.m_d), T(0.0), T(at), T(0.0), T(bt);
  M += m_l * J * J.transpose();

  M3 D = M3::Zero();
  D(1, 1) = g2 * w;
  D(2, 1) = g1;
  D(1, 2) = g1;
  // Plain bilinear products: Eigen's dot() conjugates complex operands.
  const T V = J.cwiseProduct(qd).sum();
  const V3 Dqd = D * qd;
  const V3 h = m_l * (V * Dqd + J * Dqd.cwiseProduct(qd).sum() - V * (D.transpose() * qd));

  V3 rhs(u(0), u(1), T(0.0));
  rhs -= h;
  rhs(2) -= k_ * w + beta_d * k_ * x(5);

  // Cramer's rule keeps the expression valid for complex scalars.
  const T det = M.determinant();
  V3 qdd;
  for (int c = 0; c < 3; ++c) {
    M3 Mc = M;
    Mc.col(c) = rhs;
    qdd(c) = Mc.determinant() / det;
  }
  Eigen::Matrix<T, 6, 1> out;
  out << qd(0), qdd(0), qd(1), qdd(1), qd(2), qdd(2);
  return out;
}

struct CraneLpvOptions {
  SchedulingBox box;  // (m_l, y_l, beta_d)
  double Ts = 0.03;
  HPolytope X, U, W;
};

// Default scheduling box: m_l in [0.04, 1.5], y_l in [0, 1.9], beta_d in [0.005, 0.02].
SchedulingBox crane_default_box();

// Vertices are the Euler-discretized rest linearizations at the box corners.
PolytopicLPV crane_lpv(const CraneSurrogate& crane, const CraneLpvOptions& opt);

// Discrete nonlinear map x+ = x + Ts f(x, u) with p = (m_l, y_l, beta_d);
// the state's own y_l is used by f, p only selects the LPV prediction.
DiscreteDynamics crane_euler_map(const CraneSurrogate& crane, double Ts);

// Grid of (x, u, p) over the scheduling box and a state/input grid scaled
// to the given bounds; density is the number of points per axis (>= 2).
std::vector<DisturbanceSample> crane_disturbance_grid(const SchedulingBox& box,
                                                      const VectorXd& x_half,
                                                      const VectorXd& u_half, int density);

}  // namespace tubempc
