#pragma once

#include "ljcr/interconnect.hpp"

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ljcr {

using Params = RobotParams<double>;
using Friction = LuGreParams<double>;
using State = FullState<double>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Vector-valued piecewise-linear schedule, held constant outside its breakpoints.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  PiecewiseLinear(std::vector<double> times, std::vector<VectorXd> values);
  static PiecewiseLinear constant(const VectorXd& value);

  VectorXd operator()(double t) const;
  const std::vector<double>& times() const { return times_; }
  const std::vector<VectorXd>& values() const { return values_; }
  Index dimension() const { return values_.empty() ? 0 : values_.front().size(); }

 private:
  std::vector<double> times_;
  std::vector<VectorXd> values_;
};

/// Scalar piecewise-constant schedule: value k applies on [times[k], times[k+1]).
class PiecewiseConstant {
 public:
  PiecewiseConstant() = default;
  PiecewiseConstant(std::vector<double> times, std::vector<double> values);
  static PiecewiseConstant constant(double value);

  double operator()(double t) const;
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

/// One segment of a phased input schedule. Tension and torque ramp linearly
/// from the previous phase's end values over `ramp` seconds, then hold;
/// pressure steps at the start of the phase.
struct Phase {
  std::string name;
  double duration = 1.0;
  std::optional<double> ramp;  // defaults to the full duration
  VectorXd tension;            // N
  double pressure = 0.0;       // Pa
  VectorXd torque;             // N.m
};

struct InputProfile {
  PiecewiseLinear tension;   // N, length m
  PiecewiseConstant pressure;  // Pa
  PiecewiseLinear torque;    // N.m, length n

  static InputProfile constant(const VectorXd& u, double u_p, const VectorXd& tau_ext);
  /// Phases start at t = 0 from zero tension and torque.
  static InputProfile from_phases(const std::vector<Phase>& phases, Index links, Index tendons);

  InputSample<double> sample(double t) const { return {tension(t), pressure(t), torque(t)}; }
  /// True if the pressure schedule has no breakpoint in (t0, t1].
  bool pressure_constant_on(double t0, double t1) const;
  void validate(Index links, Index tendons) const;
};

struct SettleCriterion {
  double velocity_tol = 1e-6;  // rad/s, infinity norm
  double dwell = 0.5;          // s
  double not_before = 0.0;     // absolute time from which detection is armed
};

struct SimulationOptions {
  double dt = 1e-4;
  int record_stride = 1;
  std::optional<SettleCriterion> settle;
  /// Joint box |q_i| < limit that defines the configuration set.
  double configuration_limit = 3.14159265358979323846;
};

struct PressureEvent {
  double t;
  double from;         // Pa
  double to;           // Pa
  double energy_jump;  // J, 1/2 sigma0 (to - from) |z|^2
};

struct Sample {
  double t;
  State x;
  VectorXd u;
  double u_p;
  VectorXd tau_ext;
  double total_energy;    // H + H_z
  double bristle_energy;  // H_z
  VectorXd v;
  VectorXd tau_f;
  double residual_momentum;  // |p|
  double residual_gradient;  // |grad U(q) + sigma0 u_P z|
  bool damping_ok;
};

struct Trajectory {
  std::vector<Sample> samples;
  std::vector<PressureEvent> events;
  std::vector<std::string> diagnostics;
  bool settled = false;
  double settle_time = 0.0;

  const Sample& front() const { return samples.front(); }
  const Sample& back() const { return samples.back(); }
  Index links() const { return samples.empty() ? 0 : samples.front().x.links(); }
};

/// Derived records of one state under the given inputs.
Sample make_sample(double t, const State& x, const InputSample<double>& in, const Params& robot,
                   const Friction& fric);

/// One RK4 step. Tension and torque are evaluated at every stage time;
/// pressure is held at its value at `t` for the whole step.
State step(const State& chi, const InputProfile& profile, double t, double dt, const Params& robot,
           const Friction& fric);

/// Fixed-step integration on the uniform grid t0 + k dt. Stops early when the
/// settle criterion (if any) is met. Throws NumericError on a non-finite state.
Trajectory simulate(const State& chi0, const InputProfile& profile, double t0, double t_end,
                    const SimulationOptions& options, const Params& robot, const Friction& fric);

struct EnergyAudit {
  std::vector<double> t;
  std::vector<double> residual;   // H(t) - H(t0) - int (input power - dissipation)
  std::vector<double> input_work; // int v^T (G u + tau_ext)
  std::vector<double> dissipated; // int grad(H)^T R grad(H)
  double max_abs_residual = 0.0;
  double quadrature_error = 0.0;  // Richardson estimate of the trapezoid error
  double max_increase = -std::numeric_limits<double>::infinity();  // max H(k+1) - H(k)
};

/// Energy balance over a trajectory with constant pressure. Throws
/// std::invalid_argument if the profile's pressure changes inside the span.
EnergyAudit energy_audit(const Trajectory& traj, const InputProfile& profile, const Params& robot,
                         const Friction& fric);

/// Splits a trajectory at its pressure events (pressure samples differ).
std::vector<Trajectory> constant_pressure_segments(const Trajectory& traj);

struct PassivityAudit {
  double supply = 0.0;         // int v^T tau_f dt
  double storage_delta = 0.0;  // H_z(end) - H_z(begin)
  double tolerance = 0.0;
  bool satisfied = true;
  bool condition_held = true;  // damping condition at every sample
};

/// Passivity of the friction port over samples [begin, end).
PassivityAudit passivity_audit(const Trajectory& traj, std::size_t begin, std::size_t end,
                               const Friction& fric);
PassivityAudit passivity_audit(const Trajectory& traj, const Friction& fric);

/// Stand-alone bristle integration under a prescribed joint velocity v(t).
template <typename VelocityFn>
VectorXd integrate_bristles(VectorXd z, const VelocityFn& velocity, double t_end, double dt,
                            const Friction& fric, double* max_abs = nullptr) {
  const auto f = [&](double t, const VectorXd& zz) -> VectorXd {
    return bristle_rate(zz, velocity(t), fric);
  };
  const long steps = static_cast<long>(std::ceil(t_end / dt - 1e-9));
  double peak = z.cwiseAbs().maxCoeff();
  for (long k = 0; k < steps; ++k) {
    z = rk4_step(f, k * dt, z, dt);
    peak = std::max(peak, z.cwiseAbs().maxCoeff());
  }
  if (max_abs) *max_abs = peak;
  return z;
}

/// CSV schema: t,q1..qn,p1..pn,z1..zn,H,Hz,tauf1..taufn,res_p,res_grad
std::string trajectory_csv_header(Index links);
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
CsvTable read_csv(std::istream& in);

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);

}  // namespace ljcr
