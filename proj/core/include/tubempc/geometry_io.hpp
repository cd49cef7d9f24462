#pragma once

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

#include "tubempc/geometry.hpp"

namespace tubempc {

nlohmann::json matrix_to_json(const MatrixXd& M);
nlohmann::json vector_to_json(const VectorXd& v);
MatrixXd matrix_from_json(const nlohmann::json& j);
VectorXd vector_from_json(const nlohmann::json& j);

// {"C": [[...]], "d": [...], "bounded": bool}
nlohmann::json polytope_to_json(const HPolytope& P);
HPolytope polytope_from_json(const nlohmann::json& j);

// Header "lx,ly,h" in 2D, "lx,ly,lz,h" in 3D, "l1,...,ln,h" otherwise.
void write_boundary_csv(std::ostream& os, const std::vector<BoundarySample>& samples);

// printf("%.17g") formatting, which round-trips doubles exactly.
std::string format_double(double v);

}  // namespace tubempc
