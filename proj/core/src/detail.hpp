#pragma once

#include "tubempc/geometry.hpp"

namespace tubempc::detail {

struct RawLp {
  LPStatus status = LPStatus::infeasible;
  double value = 0.0;
  VectorXd point;
  VectorXd dual;
};

// max c'x s.t. Cx <= d on raw (unchecked) data. "unbounded" here means
// unbounded or infeasible; callers know emptiness separately.
RawLp lp_max_raw(const MatrixXd& C, const VectorXd& d, const VectorXd& c);

struct FeasibilityLp {
  VectorXd x;
  double t = 0.0;  // min over x of max_i (c_i'x - d_i), floored at -1
};
FeasibilityLp feasibility_lp(const MatrixXd& C, const VectorXd& d);

}  // namespace tubempc::detail
