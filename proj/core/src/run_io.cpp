#include "tubempc/run_io.hpp"

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tubempc/geometry_io.hpp"
#include "tubempc/synthesis_io.hpp"

namespace tubempc {

std::string run_csv_header(int n, int m) {
  std::string h = "step,mode,feasible,tube_member,fallback,qp,slack_total,cost,stage_cost";
  for (int i = 0; i < n; ++i) h += ",x" + std::to_string(i);
  for (int i = 0; i < n; ++i) h += ",z" + std::to_string(i);
  for (int i = 0; i < m; ++i) h += ",u" + std::to_string(i);
  return h;
}

void write_run_csv(std::ostream& os, const RunLog& log, int n, int m) {
  if (!log.steps.empty()) {
    n = static_cast<int>(log.steps.front().x.size());
    m = static_cast<int>(log.steps.front().u.size());
  }
  os << run_csv_header(n, m) << '\n';
  for (const auto& s : log.steps) {
    os << s.step << ',' << s.mode << ',' << s.feasible << ',' << s.tube_member << ','
       << s.fallback << ',' << s.qp << ',' << format_double(s.slack_total) << ','
       << format_double(s.cost) << ',' << format_double(s.stage_cost);
    for (const VectorXd* v : {&s.x, &s.z0, &s.u})
      for (Eigen::Index i = 0; i < v->size(); ++i) os << ',' << format_double((*v)(i));
    os << '\n';
  }
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_real(const std::string& s, int line) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE)
    throw std::runtime_error("run CSV line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

std::vector<StepRecord> read_run_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("run CSV: missing header");
  const auto head = split(line);
  int n = 0, m = 0;
  for (const auto& h : head) {
    if (h.size() > 1 && h[0] == 'x') ++n;
    if (h.size() > 1 && h[0] == 'u') ++m;
  }
  if (line != run_csv_header(n, m)) throw std::runtime_error("run CSV: unexpected header");
  std::vector<StepRecord> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != head.size())
      throw std::runtime_error("run CSV line " + std::to_string(lineno) + ": expected " +
                               std::to_string(head.size()) + " fields");
    StepRecord s;
    s.step = static_cast<int>(parse_real(c[0], lineno));
    s.mode = static_cast<int>(parse_real(c[1], lineno));
    s.feasible = parse_real(c[2], lineno) != 0.0;
    s.tube_member = parse_real(c[3], lineno) != 0.0;
    s.fallback = parse_real(c[4], lineno) != 0.0;
    s.qp = parse_real(c[5], lineno) != 0.0;
    s.slack_total = parse_real(c[6], lineno);
    s.cost = parse_real(c[7], lineno);
    s.stage_cost = parse_real(c[8], lineno);
    std::size_t k = 9;
    s.x.resize(n);
    s.z0.resize(n);
    s.u.resize(m);
    for (int i = 0; i < n; ++i) s.x(i) = parse_real(c[k++], lineno);
    for (int i = 0; i < n; ++i) s.z0(i) = parse_real(c[k++], lineno);
    for (int i = 0; i < m; ++i) s.u(i) = parse_real(c[k++], lineno);
    out.push_back(std::move(s));
  }
  return out;
}

nlohmann::json run_summary_json(const RunLog& log) {
  const CostCheck c = check_cost_decrease(log);
  return {
      {"seed", log.seed},
      {"steps", log.steps.size()},
      {"stop_reason", log.stop_reason},
      {"violations", log.violations},
      {"steps_to_terminal", log.steps_to_terminal},
      {"fallbacks", log.fallbacks},
      {"infeasible_steps", log.infeasible_steps},
      {"infeasible_at_start", log.infeasible_at_start},
      {"all_tube_member", log.all_tube()},
      {"x_final", vector_to_json(log.x_final)},
      {"cost_pairs", c.pairs},
      {"cost_increases", c.failures},
  };
}

nlohmann::json summary_json(const MonteCarloSummary& s) {
  nlohmann::json j = {
      {"runs", s.runs},
      {"containment_rate", s.containment_rate},
      {"violation_rate", s.violation_rate},
      {"feasibility_rate", s.feasibility_rate},
      {"terminal_rate", s.terminal_rate},
      {"mean_steps_to_terminal", s.mean_steps_to_terminal},
      {"total_violations", s.total_violations},
      {"total_fallbacks", s.total_fallbacks},
      {"cost_pairs", s.cost.pairs},
      {"cost_zero_slack_pairs", s.cost.zero_slack_pairs},
      {"cost_increases", s.cost.failures},
  };
  j["cost_worst_excess"] = s.cost.pairs ? nlohmann::json(s.cost.worst_excess) : nlohmann::json();
  return j;
}

namespace {

nlohmann::json polygon_json(const std::vector<Eigen::Vector2d>& poly) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& v : poly) a.push_back({v.x(), v.y()});
  return a;
}

nlohmann::json plan_json(const std::vector<VectorXd>& z) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& v : z) a.push_back(vector_to_json(v));
  return a;
}

}  // namespace

nlohmann::json damping_json(const std::vector<DampingSet>& sets) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& d : sets) {
    a.push_back({
        {"beta_d", d.beta_d},
        {"coords", d.coords},
        {"mpi_converged", d.mpi_converged},
        {"mcpi_converged", d.mcpi_converged},
        {"mpi_iterations", d.mpi_iterations},
        {"mcpi_iterations", d.mcpi_iterations},
        {"mpi_rows", d.mpi.rows()},
        {"mcpi_rows", d.mcpi.rows()},
        {"mpi_in_mcpi", d.mpi_in_mcpi},
        {"mpi_area", d.mpi_area},
        {"mcpi_area", d.mcpi_area},
        {"mpi_polygon", polygon_json(d.mpi_polygon)},
        {"mcpi_polygon", polygon_json(d.mcpi_polygon)},
        {"diagnostic", d.diagnostic},
    });
  }
  return a;
}

nlohmann::json compare_json(const CompareResult& c) {
  return {
      {"initial_plan_gap", c.initial_plan_gap},
      {"closed_loop_gap", c.closed_loop_gap},
      {"complete_tol", c.complete_tol},
      {"tmpc", run_summary_json(c.tmpc)},
      {"nmpc", run_summary_json(c.nmpc)},
      {"tmpc_complete", c.tmpc_complete},
      {"nmpc_complete", c.nmpc_complete},
      {"tmpc_plan0", plan_json(c.tmpc.plan0)},
      {"nmpc_plan0", plan_json(c.nmpc.plan0)},
  };
}

void write_tube_projection(std::ostream& os, const RunLog& log, const SupportSet& Z, int i, int j,
                           int directions) {
  const auto dirs = circle_directions(directions);
  std::vector<double> h;
  for (const auto& l : dirs) {
    VectorXd full = VectorXd::Zero(Z.dim());
    full(i) = l(0);
    full(j) = l(1);
    h.push_back(Z.support(full));
  }
  os << "step,k,lx,ly,offset,vx,vy,px,py\n";
  for (const auto& s : log.steps) {
    const Eigen::Vector2d c(s.z0(i), s.z0(j));
    std::vector<BoundarySample> samples;
    for (std::size_t k = 0; k < dirs.size(); ++k) {
      BoundarySample b;
      b.direction = dirs[k];
      b.h = dirs[k].dot(c) + h[k];
      samples.push_back(std::move(b));
    }
    const auto poly = outer_polygon(samples);
    if (poly.size() != dirs.size()) throw std::logic_error("tube projection: degenerate directions");
    for (std::size_t k = 0; k < dirs.size(); ++k) {
      os << s.step << ',' << k << ',' << format_double(dirs[k](0)) << ','
         << format_double(dirs[k](1)) << ',' << format_double(samples[k].h) << ','
         << format_double(poly[k].x()) << ',' << format_double(poly[k].y()) << ','
         << format_double(s.x(i)) << ',' << format_double(s.x(j)) << '\n';
    }
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing: " + std::strerror(errno));
  f << text;
  f.flush();
  if (!f) throw std::runtime_error("write failed for " + path);
}

void export_run(const RunLog& log, const SupportSet& Z, const std::string& dir,
                const std::string& stem, int tube_i, int tube_j) {
  const std::string base = dir.empty() ? stem : dir + "/" + stem;
  std::ostringstream csv, tube;
  write_run_csv(csv, log);
  write_text_file(base + ".csv", csv.str());
  write_text_file(base + ".json", run_summary_json(log).dump(2) + "\n");
  write_tube_projection(tube, log, Z, tube_i, tube_j);
  write_text_file(base + "_tube.csv", tube.str());
}

}  // namespace tubempc
