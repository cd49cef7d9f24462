#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace tubempc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Absolute tolerance for row redundancy. Rows are unit-normalized, so this is
// a distance.
inline constexpr double kRedundancyTol = 1e-9;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LPStatus { optimal, infeasible, unbounded };
enum class Sense { min, max };

struct LPResult {
  LPStatus status = LPStatus::infeasible;
  double value = 0.0;
  VectorXd point;
};

// {x : C x <= d}. Rows are scaled to unit norm on construction; all-zero rows
// are dropped (or make the set empty when their offset is negative). Emptiness
// and boundedness are decided once, at construction.
class HPolytope {
 public:
  HPolytope() = default;
  HPolytope(MatrixXd C, VectorXd d);

  static HPolytope box(const VectorXd& lo, const VectorXd& hi);
  static HPolytope symmetric_box(const VectorXd& half_width);
  static HPolytope empty_set(int dim);
  // Whole space: no rows, unbounded.
  static HPolytope universe(int dim);

  const MatrixXd& C() const { return C_; }
  const VectorXd& d() const { return d_; }
  int dim() const { return static_cast<int>(C_.cols()); }
  int rows() const { return static_cast<int>(C_.rows()); }
  bool is_empty() const { return empty_; }
  bool is_bounded() const { return bounded_; }

  // Set when the rows are exactly an axis-aligned box (+e_i and -e_i for
  // each coordinate). Support and LPs then have closed forms.
  const std::optional<std::pair<VectorXd, VectorXd>>& axis_box() const { return box_; }

  // A strictly interior point with its Chebyshev-type margin (rows are unit
  // norm, margin capped at 1). Margin <= 0 means no interior.
  const VectorXd& center() const { return center_; }
  double margin() const { return margin_; }

 private:
  struct Raw {};
  HPolytope(Raw, MatrixXd C, VectorXd d, bool known_empty);
  void classify();
  void detect_box();

  MatrixXd C_;
  VectorXd d_;
  bool empty_ = false;
  bool bounded_ = false;
  std::optional<std::pair<VectorXd, VectorXd>> box_;
  VectorXd center_;
  double margin_ = 0.0;
};

// Implicit convex set known through its support function. Cheap to copy;
// contents are shared and immutable.
class SupportSet {
 public:
  enum class Kind { polytope, minkowski_chain, hull_of_union, linear_image, scaled };

  SupportSet() = default;
  static SupportSet polytope(HPolytope P);
  // s * (M_0 W (+) M_1 W (+) ... (+) M_{k-1} W)
  static SupportSet minkowski_chain(HPolytope W, std::vector<MatrixXd> mats, double scale = 1.0);
  static SupportSet hull_of_union(std::vector<SupportSet> members);
  static SupportSet linear_image(MatrixXd M, SupportSet S);
  static SupportSet scaled(double factor, SupportSet S);

  Kind kind() const;
  int dim() const;

  double support(const VectorXd& l) const;
  // A maximizer of l'x over the set.
  VectorXd support_point(const VectorXd& l) const;

  const HPolytope& base() const;                 // polytope, minkowski_chain
  const std::vector<MatrixXd>& matrices() const;  // minkowski_chain
  double scale() const;                           // minkowski_chain, scaled
  const std::vector<SupportSet>& members() const; // hull_of_union
  const MatrixXd& map() const;                    // linear_image
  const SupportSet& inner() const;                // linear_image, scaled

  struct Node;

 private:
  explicit SupportSet(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  const Node& node() const;
  std::shared_ptr<const Node> node_;
};

LPResult lp_solve(const VectorXd& cost, const HPolytope& P, Sense sense);

// Support value; +inf when P is unbounded in direction l, -inf when empty.
double support(const HPolytope& P, const VectorXd& l);
double support(const SupportSet& S, const VectorXd& l);

HPolytope pontryagin_diff(const HPolytope& P, const SupportSet& S);
HPolytope pontryagin_diff(const HPolytope& P, const HPolytope& S);

// Drops redundant rows (row i redundant iff max c_i'x over the remaining rows
// is <= d_i + kRedundancyTol).
HPolytope reduce(const HPolytope& P);
HPolytope intersect_reduce(const HPolytope& P, const HPolytope& Q);
// Stacks rows without reduction.
HPolytope intersect(const HPolytope& P, const HPolytope& Q);

HPolytope pre_set(const HPolytope& P, const MatrixXd& A_cl);

// Fourier-Motzkin elimination of every coordinate not listed in keep (output
// coordinates follow the order of keep). Throws GeometryError when an
// intermediate system would exceed max_rows.
HPolytope project_fm(const HPolytope& P, const std::vector<int>& keep,
                     std::size_t max_rows = 200000);

bool contains_point(const HPolytope& P, const VectorXd& x, double tol = 1e-9);
// Membership in a support set, decided through the gauge of S at x:
// x is a member iff gauge(x) <= 1 + tol. Requires 0 in S.
bool contains_point(const SupportSet& S, const VectorXd& x, double tol = 1e-9);

struct GaugeBounds {
  double lower = 0.0;
  double upper = 0.0;
};
// Bracket on the gauge min{t >= 0 : x in t S} by cutting planes on the polar.
// Stops once the bracket decides against the threshold or is tighter than
// rel_gap; otherwise the exact value comes from an LP over a lifting of S.
GaugeBounds gauge(const SupportSet& S, const VectorXd& x, double threshold = 1.0,
                  double rel_gap = 1e-10);

// True when P is contained in Q (every row of Q checked by support on P).
bool is_subset(const HPolytope& P, const HPolytope& Q, double tol = 1e-8);
bool is_subset(const SupportSet& P, const HPolytope& Q, double tol = 1e-8);

struct BoundarySample {
  VectorXd direction;
  VectorXd point;  // maximizer
  double h = 0.0;  // support value
};

std::vector<BoundarySample> sample_boundary(const SupportSet& S,
                                            const std::vector<VectorXd>& directions);
std::vector<BoundarySample> sample_boundary(const HPolytope& P,
                                            const std::vector<VectorXd>& directions);

// count unit vectors at uniform angles, starting at angle 0.
std::vector<VectorXd> circle_directions(int count);
// Deterministic pseudo-random unit vectors in R^dim.
std::vector<VectorXd> sphere_directions(int dim, int count, unsigned long long seed = 1);

// Vertices of the outer polygon {y : l_k'y <= h_k} for 2D samples ordered by
// angle. Consecutive support lines are intersected.
std::vector<Eigen::Vector2d> outer_polygon(const std::vector<BoundarySample>& samples);
double polygon_area(const std::vector<Eigen::Vector2d>& vertices);

}  // namespace tubempc
