#include "tubempc/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>


namespace tubempc {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"model",
       {"Ts", "m_c", "m_t", "L", "area", "rho", "EI", "m_d", "m_l_range", "y_l_range",
        "beta_d_range"}},
      {"constraints", {"x_bounds", "u_bounds", "w_bounds", "delta_A", "delta_B"}},
      {"mpc",
       {"N", "Q", "R", "slack_weight", "optimize_z0", "band", "band_mode", "Q_tube", "R_tube",
        "alpha_target", "i_max", "terminal_pair", "terminal_cap"}},
      {"scenario",
       {"x0", "m_l", "beta_d", "seed", "steps", "controller", "plant", "delta_mode", "runs",
        "mode2_stop", "disturbances"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(trim(s), &used);
    if (used != trim(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + ": not a number: '" + s + "'");
  }
}

VectorXd to_vector(const std::string& key, const std::string& s) {
  std::vector<double> vals;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) vals.push_back(to_double(key, item));
  if (vals.empty()) throw ConfigError("config: " + key + ": empty list");
  return Eigen::Map<VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

bool to_bool(const std::string& key, const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("config: " + key + ": not a boolean: '" + s + "'");
}

// Scalar means a multiple of the identity, a list gives the diagonal.
MatrixXd to_weight(const std::string& key, const std::string& s, int dim) {
  const VectorXd v = to_vector(key, s);
  if (v.size() == 1) return v(0) * MatrixXd::Identity(dim, dim);
  if (v.size() != dim) throw ConfigError("config: " + key + ": expected 1 or " + std::to_string(dim) + " values");
  return v.asDiagonal();
}

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string join(const VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += num(v(i));
  }
  return out;
}

std::string weight_text(const MatrixXd& M) {
  const VectorXd d = M.diagonal();
  if ((d.array() == d(0)).all()) return num(d(0));
  return join(d);
}

void check_range(const std::string& key, const VectorXd& r) {
  if (r.size() != 2 || !(r(0) <= r(1))) throw ConfigError("config: " + key + ": expected lo,hi with lo <= hi");
}

}  // namespace

RunConfig default_config() {
  RunConfig c;
  c.constraints.x_bounds.resize(6);
  c.constraints.x_bounds << 1.25, 4.0, 2.0, 4.0, 4.0, 4.0;
  c.constraints.u_bounds = VectorXd::Constant(2, 50.0);
  c.constraints.w_bounds.resize(6);
  c.constraints.w_bounds << 0.002, 0.01, 0.002, 0.01, 0.002, 0.01;
  c.synthesis.Q_tube = 100.0 * MatrixXd::Identity(6, 6);
  c.synthesis.R_tube = 0.01 * MatrixXd::Identity(2, 2);
  c.synthesis.Q = 2.5 * MatrixXd::Identity(6, 6);
  c.synthesis.R = MatrixXd::Identity(2, 2);
  c.mpc.N = 15;
  c.mpc.Q = c.synthesis.Q;
  c.mpc.R = c.synthesis.R;
  c.mpc.slack_weight = 1e5;
  c.scenario.x0.resize(6);
  c.scenario.x0 << 1.0, 0.0, 1.9, 0.0, 0.5, 0.0;
  return c;
}

RunConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& kv : body)
      if (!it->second.count(kv.first))
        throw ConfigError("config: unknown key '" + kv.first + "' in [" + section + "]");
  }
  RunConfig c = default_config();
  auto get = [&tree](const std::string& path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '/'))) return trim(*v);
    return std::nullopt;
  };

  auto& cr = c.model.crane;
  const std::pair<const char*, double*> crane_keys[] = {
      {"m_c", &cr.m_c}, {"m_t", &cr.m_t}, {"L", &cr.L},     {"area", &cr.area},
      {"rho", &cr.rho}, {"EI", &cr.EI},   {"m_d", &cr.m_d}, {"Ts", &c.model.Ts}};
  for (const auto& [k, dst] : crane_keys)
    if (auto v = get(std::string("model/") + k)) *dst = to_double(k, *v);
  const char* ranges[] = {"m_l_range", "y_l_range", "beta_d_range"};
  for (int i = 0; i < 3; ++i)
    if (auto v = get(std::string("model/") + ranges[i])) {
      const VectorXd r = to_vector(ranges[i], *v);
      check_range(ranges[i], r);
      c.model.box.lo(i) = r(0);
      c.model.box.hi(i) = r(1);
    }
  if (!(c.model.Ts > 0.0)) throw ConfigError("config: Ts must be positive");

  auto& k = c.constraints;
  if (auto v = get("constraints/x_bounds")) k.x_bounds = to_vector("x_bounds", *v);
  if (auto v = get("constraints/u_bounds")) k.u_bounds = to_vector("u_bounds", *v);
  if (auto v = get("constraints/w_bounds")) k.w_bounds = to_vector("w_bounds", *v);
  if (auto v = get("constraints/delta_A")) k.delta_A = to_double("delta_A", *v);
  if (auto v = get("constraints/delta_B")) k.delta_B = to_double("delta_B", *v);
  if (k.x_bounds.size() != 6 || k.w_bounds.size() != 6 || k.u_bounds.size() != 2)
    throw ConfigError("config: crane bounds need 6 state, 6 disturbance and 2 input values");
  if ((k.x_bounds.array() <= 0).any() || (k.u_bounds.array() <= 0).any() ||
      (k.w_bounds.array() < 0).any() || k.delta_A < 0 || k.delta_B < 0)
    throw ConfigError("config: bounds must be positive");

  auto& m = c.mpc;
  auto& s = c.synthesis;
  if (auto v = get("mpc/N")) m.N = static_cast<int>(to_double("N", *v));
  if (auto v = get("mpc/Q")) s.Q = m.Q = to_weight("Q", *v, 6);
  if (auto v = get("mpc/R")) s.R = m.R = to_weight("R", *v, 2);
  if (auto v = get("mpc/Q_tube")) s.Q_tube = to_weight("Q_tube", *v, 6);
  if (auto v = get("mpc/R_tube")) s.R_tube = to_weight("R_tube", *v, 2);
  if (auto v = get("mpc/slack_weight")) m.slack_weight = to_double("slack_weight", *v);
  if (auto v = get("mpc/optimize_z0")) m.optimize_z0 = to_bool("optimize_z0", *v);
  if (auto v = get("mpc/alpha_target")) s.alpha_target = to_double("alpha_target", *v);
  if (auto v = get("mpc/i_max")) s.i_max = static_cast<int>(to_double("i_max", *v));
  if (auto v = get("mpc/terminal_cap")) s.terminal_cap = static_cast<int>(to_double("terminal_cap", *v));
  if (auto v = get("mpc/terminal_pair")) {
    if (*v == "nominal") s.terminal_pair = TerminalPair::nominal;
    else if (*v == "last_vertex") s.terminal_pair = TerminalPair::last_vertex;
    else throw ConfigError("config: terminal_pair must be nominal or last_vertex");
  }
  if (auto v = get("mpc/band_mode")) {
    if (*v == "excluded") m.band_mode = BandMode::excluded;
    else if (*v == "corridor") m.band_mode = BandMode::corridor;
    else throw ConfigError("config: band_mode must be excluded or corridor");
  }
  if (auto v = get("mpc/band")) {
    if (*v == "auto") {
      c.auto_band = true;
    } else if (*v == "none") {
      c.auto_band = false;
      m.band.reset();
    } else {
      const VectorXd b = to_vector("band", *v);
      if (b.size() != 2 || !(b(0) < b(1))) throw ConfigError("config: band must be lo,hi with lo < hi");
      c.auto_band = false;
      m.band = Band{b(0), b(1)};
    }
  }
  if (m.N < 1) throw ConfigError("config: N must be at least 1");
  if (!(m.slack_weight > 0.0)) throw ConfigError("config: slack_weight must be positive");

  auto& sc = c.scenario;
  if (auto v = get("scenario/x0")) sc.x0 = to_vector("x0", *v);
  if (sc.x0.size() != 6) throw ConfigError("config: x0 needs 6 values");
  if (auto v = get("scenario/m_l")) sc.m_l = to_double("m_l", *v);
  if (auto v = get("scenario/beta_d")) sc.beta_d = to_double("beta_d", *v);
  if (auto v = get("scenario/seed")) {
    try {
      sc.seed = std::stoull(*v);
    } catch (const std::exception&) {
      throw ConfigError("config: seed must be a non-negative integer");
    }
  }
  if (auto v = get("scenario/steps")) sc.steps = static_cast<int>(to_double("steps", *v));
  if (auto v = get("scenario/runs")) sc.runs = static_cast<int>(to_double("runs", *v));
  if (auto v = get("scenario/mode2_stop")) sc.mode2_stop = static_cast<int>(to_double("mode2_stop", *v));
  if (auto v = get("scenario/disturbances")) sc.disturbances = to_bool("disturbances", *v);
  if (auto v = get("scenario/controller")) {
    if (*v == "tmpc") sc.controller = ControllerKind::tmpc;
    else if (*v == "nmpc") sc.controller = ControllerKind::nmpc;
    else throw ConfigError("config: controller must be tmpc or nmpc");
  }
  if (auto v = get("scenario/plant")) {
    if (*v == "lpv") sc.plant = PlantKind::lpv;
    else if (*v == "nonlinear") sc.plant = PlantKind::nonlinear;
    else throw ConfigError("config: plant must be lpv or nonlinear");
  }
  if (auto v = get("scenario/delta_mode")) {
    if (*v == "per_step") sc.delta_mode = DeltaMode::per_step;
    else if (*v == "per_run") sc.delta_mode = DeltaMode::per_run;
    else throw ConfigError("config: delta_mode must be per_step or per_run");
  }
  if (sc.steps < 1 || sc.runs < 1) throw ConfigError("config: steps and runs must be positive");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  return parse_config(in);
}

void write_config(std::ostream& out, const RunConfig& c) {
  const auto& cr = c.model.crane;
  const auto& b = c.model.box;
  out << "[model]\n"
      << "Ts = " << num(c.model.Ts) << "\n"
      << "m_c = " << num(cr.m_c) << "\n"
      << "m_t = " << num(cr.m_t) << "\n"
      << "L = " << num(cr.L) << "\n"
      << "area = " << num(cr.area) << "\n"
      << "rho = " << num(cr.rho) << "\n"
      << "EI = " << num(cr.EI) << "\n"
      << "m_d = " << num(cr.m_d) << "\n"
      << "m_l_range = " << num(b.lo(0)) << "," << num(b.hi(0)) << "\n"
      << "y_l_range = " << num(b.lo(1)) << "," << num(b.hi(1)) << "\n"
      << "beta_d_range = " << num(b.lo(2)) << "," << num(b.hi(2)) << "\n\n";
  const auto& k = c.constraints;
  out << "[constraints]\n"
      << "x_bounds = " << join(k.x_bounds) << "\n"
      << "u_bounds = " << join(k.u_bounds) << "\n"
      << "w_bounds = " << join(k.w_bounds) << "\n"
      << "delta_A = " << num(k.delta_A) << "\n"
      << "delta_B = " << num(k.delta_B) << "\n\n";
  const auto& m = c.mpc;
  const auto& s = c.synthesis;
  std::string band = "none";
  if (c.auto_band) band = "auto";
  else if (m.band) band = num(m.band->lo) + "," + num(m.band->hi);
  out << "[mpc]\n"
      << "N = " << m.N << "\n"
      << "Q = " << weight_text(m.Q) << "\n"
      << "R = " << weight_text(m.R) << "\n"
      << "slack_weight = " << num(m.slack_weight) << "\n"
      << "optimize_z0 = " << (m.optimize_z0 ? "true" : "false") << "\n"
      << "band = " << band << "\n"
      << "band_mode = " << (m.band_mode == BandMode::excluded ? "excluded" : "corridor") << "\n"
      << "Q_tube = " << weight_text(s.Q_tube) << "\n"
      << "R_tube = " << weight_text(s.R_tube) << "\n"
      << "alpha_target = " << num(s.alpha_target) << "\n"
      << "i_max = " << s.i_max << "\n"
      << "terminal_pair = " << (s.terminal_pair == TerminalPair::nominal ? "nominal" : "last_vertex") << "\n"
      << "terminal_cap = " << s.terminal_cap << "\n\n";
  const auto& sc = c.scenario;
  out << "[scenario]\n"
      << "x0 = " << join(sc.x0) << "\n"
      << "m_l = " << num(sc.m_l) << "\n"
      << "beta_d = " << num(sc.beta_d) << "\n"
      << "seed = " << sc.seed << "\n"
      << "steps = " << sc.steps << "\n"
      << "controller = " << (sc.controller == ControllerKind::tmpc ? "tmpc" : "nmpc") << "\n"
      << "plant = " << (sc.plant == PlantKind::lpv ? "lpv" : "nonlinear") << "\n"
      << "delta_mode = " << (sc.delta_mode == DeltaMode::per_step ? "per_step" : "per_run") << "\n"
      << "runs = " << sc.runs << "\n"
      << "mode2_stop = " << sc.mode2_stop << "\n"
      << "disturbances = " << (sc.disturbances ? "true" : "false") << "\n";
}

PolytopicLPV build_model(const RunConfig& cfg) {
  const CraneSurrogate crane(cfg.model.crane);
  CraneLpvOptions o;
  o.box = cfg.model.box;
  o.Ts = cfg.model.Ts;
  o.X = HPolytope::symmetric_box(cfg.constraints.x_bounds);
  o.U = HPolytope::symmetric_box(cfg.constraints.u_bounds);
  o.W = HPolytope::symmetric_box(cfg.constraints.w_bounds);
  return crane_lpv(crane, o);
}

Band default_band(const PolytopicLPV& model) {
  const auto f = frequency_predict(model, {model.box().center()});
  const double w = f.front().omega;
  if (f.front().overdamped || !(w > 0.0))
    throw ConfigError("config: no resonance at mid-schedule; set the band explicitly");
  return {0.85 * w, 1.15 * w};
}

MpcConfig resolve_mpc(const RunConfig& cfg, const PolytopicLPV& model) {
  MpcConfig m = cfg.mpc;
  if (cfg.auto_band) m.band = default_band(model);
  return m;
}

VectorXd scheduling_point(const RunConfig& cfg, const VectorXd& x) {
  const auto& b = cfg.model.box;
  VectorXd p(3);
  p << cfg.scenario.m_l, std::clamp(x(2), b.lo(1), b.hi(1)), cfg.scenario.beta_d;
  return p;
}

}  // namespace tubempc
