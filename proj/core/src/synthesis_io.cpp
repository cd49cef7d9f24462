#include "tubempc/synthesis_io.hpp"

#include <fstream>
#include <stdexcept>

#include "tubempc/geometry_io.hpp"

namespace tubempc {

nlohmann::json support_set_to_json(const SupportSet& S) {
  using K = SupportSet::Kind;
  switch (S.kind()) {
    case K::polytope:
      return {{"kind", "polytope"}, {"P", polytope_to_json(S.base())}};
    case K::minkowski_chain: {
      nlohmann::json mats = nlohmann::json::array();
      for (const auto& M : S.matrices()) mats.push_back(matrix_to_json(M));
      return {{"kind", "minkowski_chain"},
              {"W", polytope_to_json(S.base())},
              {"scale", S.scale()},
              {"matrices", std::move(mats)}};
    }
    case K::hull_of_union: {
      nlohmann::json mem = nlohmann::json::array();
      for (const auto& m : S.members()) mem.push_back(support_set_to_json(m));
      return {{"kind", "hull_of_union"}, {"members", std::move(mem)}};
    }
    case K::linear_image:
      return {{"kind", "linear_image"},
              {"M", matrix_to_json(S.map())},
              {"S", support_set_to_json(S.inner())}};
    case K::scaled:
      return {{"kind", "scaled"}, {"factor", S.scale()}, {"S", support_set_to_json(S.inner())}};
  }
  return {};
}

SupportSet support_set_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "polytope") return SupportSet::polytope(polytope_from_json(j.at("P")));
  if (kind == "minkowski_chain") {
    std::vector<MatrixXd> mats;
    for (const auto& m : j.at("matrices")) mats.push_back(matrix_from_json(m));
    return SupportSet::minkowski_chain(polytope_from_json(j.at("W")), std::move(mats),
                                       j.at("scale").get<double>());
  }
  if (kind == "hull_of_union") {
    std::vector<SupportSet> mem;
    for (const auto& m : j.at("members")) mem.push_back(support_set_from_json(m));
    return SupportSet::hull_of_union(std::move(mem));
  }
  if (kind == "linear_image")
    return SupportSet::linear_image(matrix_from_json(j.at("M")), support_set_from_json(j.at("S")));
  if (kind == "scaled")
    return SupportSet::scaled(j.at("factor").get<double>(), support_set_from_json(j.at("S")));
  throw std::runtime_error("unknown support set kind: " + kind);
}

nlohmann::json mixed_to_json(const MixedConstraints& M) {
  return {{"Cx", matrix_to_json(M.Cx)}, {"Du", matrix_to_json(M.Du)}, {"E", vector_to_json(M.E)}};
}

MixedConstraints mixed_from_json(const nlohmann::json& j) {
  return {matrix_from_json(j.at("Cx")), matrix_from_json(j.at("Du")), vector_from_json(j.at("E"))};
}

nlohmann::json synthesis_to_json(const TubeSynthesis& s) {
  nlohmann::json kv = nlohmann::json::array();
  for (const auto& K : s.K_vertex) kv.push_back(matrix_to_json(K));
  nlohmann::json zv = nlohmann::json::array();
  for (const auto& Z : s.Z_vertex) zv.push_back(support_set_to_json(Z));
  return {{"A0", matrix_to_json(s.A0)},
          {"B0", matrix_to_json(s.B0)},
          {"K_vertex", std::move(kv)},
          {"i_vertex", s.i_vertex},
          {"alpha_vertex", s.alpha_vertex},
          {"Z_vertex", std::move(zv)},
          {"K", matrix_to_json(s.K)},
          {"P", matrix_to_json(s.P)},
          {"K_f", matrix_to_json(s.K_f)},
          {"terminal_pair", s.terminal_pair == TerminalPair::nominal ? "nominal" : "last_vertex"},
          {"W", polytope_to_json(s.W)},
          {"M", mixed_to_json(s.M)},
          {"M_bar", mixed_to_json(s.M_bar)},
          {"X_bar", polytope_to_json(s.X_bar)},
          {"U_bar", polytope_to_json(s.U_bar)},
          {"X_f_bar", polytope_to_json(s.X_f_bar)},
          {"terminal_iterations", s.terminal_iterations}};
}

TubeSynthesis synthesis_from_json(const nlohmann::json& j) {
  TubeSynthesis s;
  s.A0 = matrix_from_json(j.at("A0"));
  s.B0 = matrix_from_json(j.at("B0"));
  for (const auto& K : j.at("K_vertex")) s.K_vertex.push_back(matrix_from_json(K));
  s.i_vertex = j.at("i_vertex").get<std::vector<int>>();
  s.alpha_vertex = j.at("alpha_vertex").get<std::vector<double>>();
  for (const auto& Z : j.at("Z_vertex")) s.Z_vertex.push_back(support_set_from_json(Z));
  s.K = matrix_from_json(j.at("K"));
  s.P = matrix_from_json(j.at("P"));
  s.K_f = matrix_from_json(j.at("K_f"));
  s.terminal_pair =
      j.at("terminal_pair").get<std::string>() == "nominal" ? TerminalPair::nominal
                                                             : TerminalPair::last_vertex;
  s.Z = tube_cross_section(s.Z_vertex);
  s.KZ = SupportSet::linear_image(s.K, s.Z);
  s.W = polytope_from_json(j.at("W"));
  s.M = mixed_from_json(j.at("M"));
  s.M_bar = mixed_from_json(j.at("M_bar"));
  s.X_bar = polytope_from_json(j.at("X_bar"));
  s.U_bar = polytope_from_json(j.at("U_bar"));
  s.X_f_bar = polytope_from_json(j.at("X_f_bar"));
  s.terminal_iterations = j.value("terminal_iterations", 0);
  s.terminal_converged = true;
  return s;
}

void save_synthesis(const TubeSynthesis& s, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << synthesis_to_json(s).dump(1) << '\n';
  if (!os) throw std::runtime_error("write failed: " + path);
}

TubeSynthesis load_synthesis(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return synthesis_from_json(j);
}

}  // namespace tubempc
