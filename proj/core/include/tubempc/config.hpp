#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "tubempc/crane.hpp"
#include "tubempc/synthesis.hpp"
#include "tubempc/tube_mpc.hpp"

namespace tubempc {

enum class ControllerKind { tmpc, nmpc };
enum class PlantKind { lpv, nonlinear };
enum class DeltaMode { per_step, per_run };

struct ModelConfig {
  CraneParams crane;
  double Ts = 0.03;
  SchedulingBox box = crane_default_box();
};

struct ConstraintConfig {
  VectorXd x_bounds;  // symmetric state box
  VectorXd u_bounds;  // symmetric input box
  VectorXd w_bounds;  // symmetric additive disturbance box
  double delta_A = 0.1174;  // ||Delta_A||_inf bound
  double delta_B = 0.0032;
};

struct ScenarioConfig {
  VectorXd x0;
  double m_l = 1.5;
  double beta_d = 0.01;
  std::uint64_t seed = 1;
  int steps = 400;
  ControllerKind controller = ControllerKind::tmpc;
  PlantKind plant = PlantKind::lpv;
  DeltaMode delta_mode = DeltaMode::per_step;
  int runs = 35;
  int mode2_stop = 50;  // consecutive Mode-2 steps that end a run; 0 disables
  bool disturbances = true;
};

struct RunConfig {
  ModelConfig model;
  ConstraintConfig constraints;
  SynthesisConfig synthesis;
  MpcConfig mpc;
  bool auto_band = true;  // band edges +/-15% around the mid-schedule resonance
  ScenarioConfig scenario;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Crane defaults used throughout the examples and tests.
RunConfig default_config();

// INI text with sections [model], [constraints], [mpc], [scenario]; keys
// not present keep their defaults. Unknown keys are rejected.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);
void write_config(std::ostream& out, const RunConfig& cfg);

// LPV model with the configured sets.
PolytopicLPV build_model(const RunConfig& cfg);

// +/-15% around the first resonance at the centre of the scheduling box.
Band default_band(const PolytopicLPV& model);

// MpcConfig with the band filled in when auto_band is set.
MpcConfig resolve_mpc(const RunConfig& cfg, const PolytopicLPV& model);

// Scheduling point (m_l, clamp(y_l), beta_d) for a state.
VectorXd scheduling_point(const RunConfig& cfg, const VectorXd& x);

}  // namespace tubempc
