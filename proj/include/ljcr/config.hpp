#pragma once

// Scenario configuration: a YAML subset with nested sections. Pressures are
// written in kPa and converted to Pa here; angles in the analysis block are
// in degrees. The grammar is documented in configs/README.md.

#include "ljcr/analysis.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ljcr {

struct IntegratorConfig {
  double dt = 1e-4;
  std::optional<double> t_end;  // defaults to the summed phase durations, else 1 s
  int record_stride = 10;
};

struct AnalysisConfig {
  std::string mode = "stiffness";                 // sweep: stiffness | shape-lock
  std::vector<double> pressures;                  // Pa
  std::vector<double> lock_pressures;             // Pa
  double bend_target = 3.14159265358979323846 / 3;  // rad
  double tip_force = 0.01;                        // N
  double probe_displacement = 1e-3;               // rad, largest |dq| of the joint probe
  int repeats = 3;
  ProbeOptions probe;
  ShapeLockTimings shape_lock;
  bool attraction = false;
  AttractionOptions attraction_options;

  AnalysisConfig();
};

struct ScenarioConfig {
  Params robot;
  Friction friction;
  State initial;  // resolved to zeros of the robot's dimension when absent
  std::vector<Phase> phases;
  IntegratorConfig integrator;
  AnalysisConfig analysis;
  std::string output_dir = "out";

  /// End time of `simulate` and `audit`.
  double t_end() const;
  InputProfile profile() const;
};

/// Parses and validates a configuration. Throws ConfigError (with a line
/// number when the offending node has one).
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);

/// Fully resolved configuration in the same grammar; parse_config of the
/// result yields an equal config.
std::string echo_config(const ScenarioConfig& config);

/// Whole-config checks shared by parse_config and command-line overrides.
void validate_config(const ScenarioConfig& config);

}  // namespace ljcr
