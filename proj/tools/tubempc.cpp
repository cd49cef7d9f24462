// tubempc: offline synthesis, closed-loop runs and Monte-Carlo experiments
// for the stacker-crane tube MPC.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tubempc/config.hpp"
#include "tubempc/geometry_io.hpp"
#include "tubempc/harness.hpp"
#include "tubempc/run_io.hpp"
#include "tubempc/synthesis_io.hpp"

namespace {

using namespace tubempc;

constexpr int kExitError = 1;
constexpr int kExitSynthesis = 2;
constexpr int kExitInfeasible = 3;

struct Common {
  std::string config;
  std::string synthesis;  // load instead of synthesizing
};

RunConfig load(const Common& c) { return c.config.empty() ? default_config() : load_config(c.config); }

Experiment experiment(const Common& c, const RunConfig& cfg) {
  if (c.synthesis.empty()) return Experiment::build(cfg);
  TubeSynthesis syn;
  try {
    syn = load_synthesis(c.synthesis);
  } catch (const std::exception& e) {
    throw SynthesisError(std::string("cannot load synthesis: ") + e.what());
  }
  return Experiment::from_synthesis(cfg, std::move(syn));
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return dir.empty() ? name : (std::filesystem::path(dir) / name).string();
}

void emit(const std::string& path, const nlohmann::json& j) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_text_file(path, text);
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "INI run configuration (defaults when omitted)");
}

void add_synthesis(CLI::App* app, Common& c) {
  app->add_option("-s,--synthesis", c.synthesis, "synthesis JSON written by `synth`");
}

int cmd_synth(const Common& c, const std::string& out) {
  const RunConfig cfg = load(c);
  const TubeSynthesis syn = synthesize(build_model(cfg), cfg.synthesis);
  save_synthesis(syn, out);
  std::cout << "synthesis written to " << out << "\n";
  for (std::size_t j = 0; j < syn.i_vertex.size(); ++j)
    std::cout << "vertex " << j << ": i = " << syn.i_vertex[j]
              << ", alpha = " << format_double(syn.alpha_vertex[j]) << "\n";
  std::cout << "terminal set: " << syn.X_f_bar.rows() << " rows after "
            << syn.terminal_iterations << " iterations\n";
  return 0;
}

int cmd_mrpi(const Common& c, const std::string& out) {
  const RunConfig cfg = load(c);
  const PolytopicLPV model = build_model(cfg);
  nlohmann::json a = nlohmann::json::array();
  bool ok = true;
  for (int j = 0; j < model.num_vertices(); ++j) {
    const auto& v = model.vertices()[static_cast<std::size_t>(j)];
    const DareResult d = dare_solve(v.A, v.B, cfg.synthesis.Q_tube, cfg.synthesis.R_tube);
    const MatrixXd Acl = v.A + v.B * d.K;
    const MrpiResult r = mrpi_approx(Acl, d.K, model.W(), cfg.synthesis.alpha_target, cfg.synthesis.i_max);
    const bool rpi = r.converged && rpi_check(Acl, r.Z, model.W(), 128, 1e-6);
    ok = ok && d.converged && r.converged;
    std::cout << "vertex " << j << ": i = " << r.i << ", alpha = " << format_double(r.alpha)
              << ", rpi_check " << (rpi ? "ok" : "FAILED") << "\n";
    a.push_back({{"vertex", j}, {"i", r.i}, {"alpha", r.alpha}, {"converged", r.converged},
                 {"rpi_check", rpi}});
  }
  if (!out.empty()) emit(out, a);
  return ok ? 0 : kExitSynthesis;
}

int cmd_terminal(const Common& c, const std::string& out) {
  const RunConfig cfg = load(c);
  const Experiment ex = experiment(c, cfg);
  std::cout << "terminal set: " << ex.syn.X_f_bar.rows() << " rows after "
            << ex.syn.terminal_iterations << " iterations"
            << (ex.syn.terminal_converged ? "" : " (not converged)") << "\n";
  if (!out.empty()) emit(out, polytope_to_json(ex.syn.X_f_bar));
  return ex.syn.terminal_converged ? 0 : kExitSynthesis;
}

int cmd_sets(const Common& c, const std::vector<double>& betas, bool full, const std::string& out) {
  const RunConfig cfg = load(c);
  const auto sets = damping_sets(cfg, betas, full);
  for (const auto& d : sets) {
    std::cout << "beta_d " << format_double(d.beta_d) << ": MPI area " << d.mpi_area
              << ", MCPI area " << d.mcpi_area << ", MPI in MCPI " << (d.mpi_in_mcpi ? "yes" : "no")
              << ", " << d.seconds << " s";
    if (!d.diagnostic.empty()) std::cout << " [" << d.diagnostic << "]";
    std::cout << "\n";
  }
  if (!out.empty()) emit(out, damping_json(sets));
  return 0;
}

struct RunArgs {
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::string controller, plant;
  std::string out_dir = ".";
  int threads = 0;
  std::optional<int> runs;
};

RunOptions run_options(RunConfig& cfg, const RunArgs& a) {
  if (a.seed) cfg.scenario.seed = *a.seed;
  if (a.steps) cfg.scenario.steps = *a.steps;
  if (a.runs) cfg.scenario.runs = *a.runs;
  if (a.controller == "nmpc") cfg.scenario.controller = ControllerKind::nmpc;
  if (a.controller == "tmpc") cfg.scenario.controller = ControllerKind::tmpc;
  if (a.plant == "nonlinear") cfg.scenario.plant = PlantKind::nonlinear;
  if (a.plant == "lpv") cfg.scenario.plant = PlantKind::lpv;
  return RunOptions::from(cfg.scenario);
}

int cmd_run(const Common& c, const RunArgs& a) {
  RunConfig cfg = load(c);
  const RunOptions opt = run_options(cfg, a);
  const Experiment ex = experiment(c, cfg);
  const RunLog log = run_closed_loop(ex, cfg.scenario.x0, opt, cfg.scenario.seed);
  ensure_dir(a.out_dir);
  export_run(log, ex.syn.Z, a.out_dir, "run");
  std::cout << run_summary_json(log).dump(2) << "\n";
  return log.infeasible_at_start ? kExitInfeasible : 0;
}

int cmd_montecarlo(const Common& c, const RunArgs& a) {
  RunConfig cfg = load(c);
  const RunOptions opt = run_options(cfg, a);
  const Experiment ex = experiment(c, cfg);
  const MonteCarloResult mc =
      monte_carlo(ex, cfg.scenario.x0, opt, cfg.scenario.seed, cfg.scenario.runs, a.threads);
  ensure_dir(a.out_dir);
  for (std::size_t i = 0; i < mc.runs.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "run_%03zu", i);
    std::ostringstream csv;
    write_run_csv(csv, mc.runs[i]);
    write_text_file(join_path(a.out_dir, std::string(stem) + ".csv"), csv.str());
  }
  nlohmann::json j = summary_json(mc.summary);
  j["seed"] = cfg.scenario.seed;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : mc.runs) runs.push_back(run_summary_json(r));
  j["per_run"] = runs;
  write_text_file(join_path(a.out_dir, "summary.json"), j.dump(2) + "\n");
  std::cout << summary_json(mc.summary).dump(2) << "\n";
  const bool any_start_infeasible = std::any_of(
      mc.runs.begin(), mc.runs.end(), [](const RunLog& r) { return r.infeasible_at_start; });
  return any_start_infeasible ? kExitInfeasible : 0;
}

int cmd_compare(const Common& c, int steps, double tol, double settle, const std::string& out) {
  const RunConfig cfg = load(c);
  const Experiment ex = experiment(c, cfg);
  const CompareResult r = compare_controllers(ex, cfg.scenario.x0, steps, tol, settle);
  std::cout << "initial plan gap " << format_double(r.initial_plan_gap) << ", closed-loop gap "
            << format_double(r.closed_loop_gap) << "\n"
            << "tmpc: " << (r.tmpc_complete ? "complete" : "incomplete") << ", "
            << r.tmpc.violations << " violations, " << r.tmpc.steps.size() << " steps\n"
            << "nmpc: " << (r.nmpc_complete ? "complete" : "incomplete") << ", "
            << r.nmpc.violations << " violations, " << r.nmpc.steps.size() << " steps\n";
  if (!out.empty()) emit(out, compare_json(r));
  if (r.tmpc.infeasible_at_start || r.nmpc.infeasible_at_start) return kExitInfeasible;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tube MPC for polytopic quasi-LPV systems (stacker-crane surrogate)"};
  app.require_subcommand(1);
  Common common;
  RunArgs ra;
  std::string out;
  std::vector<double> betas{0.01, 0.5, 1.0};
  bool full = false;
  int steps = 3000;
  double tol = 0.02, settle = 1e-3;

  auto* synth = app.add_subcommand("synth", "run the offline synthesis and save it as JSON");
  add_common(synth, common);
  synth->add_option("-o,--out", out, "output JSON")->default_val("synthesis.json");

  auto* mrpi = app.add_subcommand("mrpi", "per-vertex mRPI approximations");
  add_common(mrpi, common);
  mrpi->add_option("-o,--out", out, "optional JSON report");

  auto* term = app.add_subcommand("terminal-set", "tightened terminal set");
  add_common(term, common);
  add_synthesis(term, common);
  term->add_option("-o,--out", out, "optional JSON polytope");

  auto* sets = app.add_subcommand("sets", "MPI and MCPI sets over damping values");
  add_common(sets, common);
  sets->add_option("--damping", betas, "damping values")->delimiter(',');
  sets->add_flag("--full", full, "six-state sets (slow; guarded by the row limit)");
  sets->add_option("-o,--out", out, "optional JSON with areas and polygons");

  auto add_run_opts = [&](CLI::App* s) {
    add_common(s, common);
    add_synthesis(s, common);
    s->add_option("--seed", ra.seed, "master seed");
    s->add_option("--steps", ra.steps, "step budget");
    s->add_option("--controller", ra.controller)->check(CLI::IsMember({"tmpc", "nmpc"}));
    s->add_option("--plant", ra.plant)->check(CLI::IsMember({"lpv", "nonlinear"}));
    s->add_option("-o,--out-dir", ra.out_dir, "output directory");
  };
  auto* run = app.add_subcommand("run", "one closed-loop run");
  add_run_opts(run);

  auto* mc = app.add_subcommand("montecarlo", "seeded Monte-Carlo runs");
  add_run_opts(mc);
  mc->add_option("--runs", ra.runs, "number of runs");
  mc->add_option("--threads", ra.threads, "worker threads (0: all cores)");

  auto* cmp = app.add_subcommand("compare", "tube MPC against nonlinear MPC on the nonlinear plant");
  add_common(cmp, common);
  add_synthesis(cmp, common);
  cmp->add_option("--steps", steps, "step budget")->default_val(3000);
  cmp->add_option("--tol", tol, "completion tolerance on |x_c|, |y_l|, |w_t|")->default_val(0.02);
  cmp->add_option("--settle", settle, "stop once ||x||_inf is below this")->default_val(1e-3);
  cmp->add_option("-o,--out", out, "optional JSON report");

  auto* pc = app.add_subcommand("print-config", "write the effective configuration");
  add_common(pc, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(common, out);
    if (*mrpi) return cmd_mrpi(common, out);
    if (*term) return cmd_terminal(common, out);
    if (*sets) return cmd_sets(common, betas, full, out);
    if (*run) return cmd_run(common, ra);
    if (*mc) return cmd_montecarlo(common, ra);
    if (*cmp) return cmd_compare(common, steps, tol, settle, out);
    if (*pc) {
      write_config(std::cout, load(common));
      return 0;
    }
  } catch (const SynthesisError& e) {
    std::cerr << "synthesis failed: " << e.what() << "\n";
    return kExitSynthesis;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
