#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tubempc/harness.hpp"

namespace tubempc {

// Run CSV, one row per step:
//   step,mode,feasible,tube_member,fallback,qp,slack_total,cost,stage_cost,
//   x0..x{n-1},z0..z{n-1},u0..u{m-1}
// Flags are 0/1, reals use %.17g so a reload is exact.
std::string run_csv_header(int n, int m);
void write_run_csv(std::ostream& os, const RunLog& log, int n = 6, int m = 2);
std::vector<StepRecord> read_run_csv(std::istream& is);

nlohmann::json run_summary_json(const RunLog& log);
nlohmann::json summary_json(const MonteCarloSummary& s);
nlohmann::json damping_json(const std::vector<DampingSet>& sets);
nlohmann::json compare_json(const CompareResult& c);

// Tube cross-sections projected onto coordinates (i, j): for every step and
// direction l_k, the half-plane l_k'y <= offset with offset = l_k'z0 + h_Z(l_k),
// plus the vertex of the outer polygon between lines k and k+1.
//   step,k,lx,ly,offset,vx,vy,px,py
// (px, py) is the projected measured state.
void write_tube_projection(std::ostream& os, const RunLog& log, const SupportSet& Z, int i, int j,
                           int directions = 64);

// <dir>/<stem>.csv, <stem>.json and <stem>_tube.csv (projection onto
// (tube_i, tube_j)). Failures name the path.
void export_run(const RunLog& log, const SupportSet& Z, const std::string& dir,
                const std::string& stem, int tube_i = 0, int tube_j = 4);

// Opens for writing and throws std::runtime_error with the path on failure.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace tubempc
