#include "tubempc/geometry_io.hpp"

#include <cstdio>
#include <ostream>

namespace tubempc {

nlohmann::json matrix_to_json(const MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

nlohmann::json vector_to_json(const VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j.at(i).size()) != cols)
      throw GeometryError("matrix_from_json: ragged rows");
    for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = j.at(i).at(k).get<double>();
  }
  return M;
}

VectorXd vector_from_json(const nlohmann::json& j) {
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

nlohmann::json polytope_to_json(const HPolytope& P) {
  return {{"C", matrix_to_json(P.C())},
          {"d", vector_to_json(P.d())},
          {"bounded", P.is_bounded()},
          {"dim", P.dim()},
          {"empty", P.is_empty()}};
}

HPolytope polytope_from_json(const nlohmann::json& j) {
  MatrixXd C = matrix_from_json(j.at("C"));
  const int dim = j.contains("dim") ? j.at("dim").get<int>() : static_cast<int>(C.cols());
  if (j.value("empty", false)) return HPolytope::empty_set(dim);
  if (C.rows() == 0) return HPolytope::universe(dim);
  return HPolytope(std::move(C), vector_from_json(j.at("d")));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_boundary_csv(std::ostream& os, const std::vector<BoundarySample>& samples) {
  const int n = samples.empty() ? 2 : static_cast<int>(samples.front().direction.size());
  if (n == 2) {
    os << "lx,ly,h\n";
  } else if (n == 3) {
    os << "lx,ly,lz,h\n";
  } else {
    for (int i = 0; i < n; ++i) os << 'l' << (i + 1) << ',';
    os << "h\n";
  }
  for (const auto& s : samples) {
    for (int i = 0; i < n; ++i) os << format_double(s.direction(i)) << ',';
    os << format_double(s.h) << '\n';
  }
}

}  // namespace tubempc
