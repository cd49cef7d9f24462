#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tubempc/geometry.hpp"

namespace tubempc {

// Axis-aligned scheduling box. Corner j has coordinate i at its upper bound
// iff bit i of j is set, so the last corner is the all-upper one.
struct SchedulingBox {
  VectorXd lo;
  VectorXd hi;
  std::vector<std::string> names;

  int dim() const { return static_cast<int>(lo.size()); }
  int corners() const { return 1 << dim(); }
  VectorXd corner(int j) const;
  VectorXd center() const { return 0.5 * (lo + hi); }
};

struct SchedulingWeights {
  VectorXd sigma;
  bool clamped = false;
};

// Multilinear interpolation weights over the box corners.
SchedulingWeights scheduling_weights(const SchedulingBox& box, const VectorXd& p);

struct LinearVertex {
  MatrixXd A;
  MatrixXd B;
};

class PolytopicLPV {
 public:
  PolytopicLPV() = default;
  PolytopicLPV(std::vector<LinearVertex> vertices, SchedulingBox box, double Ts, HPolytope X,
               HPolytope U, HPolytope W);

  int n() const { return static_cast<int>(vertices_.front().A.rows()); }
  int m() const { return static_cast<int>(vertices_.front().B.cols()); }
  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  const std::vector<LinearVertex>& vertices() const { return vertices_; }
  const SchedulingBox& box() const { return box_; }
  double Ts() const { return Ts_; }
  const HPolytope& X() const { return X_; }
  const HPolytope& U() const { return U_; }
  const HPolytope& W() const { return W_; }

  // Sum_j sigma_j(p) (A_j, B_j); clamped reports whether p had to be moved
  // into the box.
  LinearVertex evaluate(const VectorXd& p, bool* clamped = nullptr) const;
  LinearVertex combine(const VectorXd& sigma) const;
  LinearVertex nominal() const;

  PolytopicLPV with_sets(HPolytope X, HPolytope U, HPolytope W) const;

 private:
  std::vector<LinearVertex> vertices_;
  SchedulingBox box_;
  double Ts_ = 0.0;
  HPolytope X_, U_, W_;
};

using ContinuousDynamics = std::function<VectorXd(const VectorXd& x, const VectorXd& u)>;

struct Linearization {
  MatrixXd Ac;
  MatrixXd Bc;
  VectorXd R;  // f(x_r, u_r) - xdot_r
};

// Central differences with step 1e-6 * max(1, |coordinate|).
Linearization linearize(const ContinuousDynamics& f, const VectorXd& x_r, const VectorXd& u_r,
                        const VectorXd& xdot_r = VectorXd());

std::pair<MatrixXd, MatrixXd> discretize_euler(const MatrixXd& Ac, const MatrixXd& Bc, double Ts);

// One sample of the nonlinear discrete map together with the scheduling
// point used for the LPV prediction.
struct DisturbanceSample {
  VectorXd x;
  VectorXd u;
  VectorXd p;
};
using DiscreteDynamics =
    std::function<VectorXd(const VectorXd& x, const VectorXd& u, const VectorXd& p)>;

struct DisturbanceEstimate {
  HPolytope W;          // max(1.1 * raw, floor), symmetric box
  VectorXd raw;         // per-coordinate max |f_d - A(p)x - B(p)u|
  VectorXd half_width;  // box half widths of W
};

DisturbanceEstimate estimate_disturbance_set(const PolytopicLPV& model, const DiscreteDynamics& f,
                                             const std::vector<DisturbanceSample>& samples,
                                             const VectorXd& floor);

}  // namespace tubempc
