#include "ljcr/simulate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace ljcr {

PiecewiseLinear::PiecewiseLinear(std::vector<double> times, std::vector<VectorXd> values)
    : times_(std::move(times)), values_(std::move(values)) {
  detail::require(!times_.empty() && times_.size() == values_.size(),
                  "piecewise-linear schedule needs matching, non-empty breakpoints");
  for (std::size_t k = 1; k < times_.size(); ++k) {
    detail::require(times_[k] > times_[k - 1], "schedule breakpoints must be strictly increasing");
    detail::require(values_[k].size() == values_[0].size(), "schedule values must share a dimension");
  }
}

PiecewiseLinear PiecewiseLinear::constant(const VectorXd& value) { return {{0.0}, {value}}; }

VectorXd PiecewiseLinear::operator()(double t) const {
  if (t <= times_.front()) return values_.front();
  if (t >= times_.back()) return values_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times_.begin());
  const double w = (t - times_[k - 1]) / (times_[k] - times_[k - 1]);
  return (1.0 - w) * values_[k - 1] + w * values_[k];
}

PiecewiseConstant::PiecewiseConstant(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
  detail::require(!times_.empty() && times_.size() == values_.size(),
                  "piecewise-constant schedule needs matching, non-empty breakpoints");
  for (std::size_t k = 1; k < times_.size(); ++k)
    detail::require(times_[k] > times_[k - 1], "schedule breakpoints must be strictly increasing");
}

PiecewiseConstant PiecewiseConstant::constant(double value) { return {{0.0}, {value}}; }

double PiecewiseConstant::operator()(double t) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return values_.front();
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

InputProfile InputProfile::constant(const VectorXd& u, double u_p, const VectorXd& tau_ext) {
  return {PiecewiseLinear::constant(u), PiecewiseConstant::constant(u_p),
          PiecewiseLinear::constant(tau_ext)};
}

InputProfile InputProfile::from_phases(const std::vector<Phase>& phases, Index links, Index tendons) {
  detail::require(!phases.empty(), "input profile needs at least one phase");
  std::vector<double> tt{0.0}, pt, pv;
  std::vector<VectorXd> tu{VectorXd::Zero(tendons)}, tq{VectorXd::Zero(links)};
  double t = 0.0;
  VectorXd u = tu.front();
  VectorXd tau = tq.front();
  for (const auto& ph : phases) {
    detail::require(ph.duration > 0, "phase duration must be > 0");
    const double ramp = ph.ramp.value_or(ph.duration);
    detail::require(ramp > 0 && ramp <= ph.duration, "phase ramp must lie in (0, duration]");
    if (ph.tension.size() > 0) {
      detail::require(ph.tension.size() == tendons, "phase tension has the wrong length");
      u = ph.tension;
    }
    if (ph.torque.size() > 0) {
      detail::require(ph.torque.size() == links, "phase torque has the wrong length");
      tau = ph.torque;
    }
    pt.push_back(t);
    pv.push_back(ph.pressure);
    tt.push_back(t + ramp);
    tu.push_back(u);
    tq.push_back(tau);
    if (ramp < ph.duration) {
      tt.push_back(t + ph.duration);
      tu.push_back(u);
      tq.push_back(tau);
    }
    t += ph.duration;
  }
  return {PiecewiseLinear(tt, tu), PiecewiseConstant(pt, pv), PiecewiseLinear(tt, tq)};
}

bool InputProfile::pressure_constant_on(double t0, double t1) const {
  const double first = pressure(t0);
  const auto& times = pressure.times();
  for (std::size_t k = 0; k < times.size(); ++k)
    if (times[k] > t0 && times[k] <= t1 && pressure.values()[k] != first) return false;
  return true;
}

void InputProfile::validate(Index links, Index tendons) const {
  detail::require(tension.dimension() == tendons, "tension schedule has the wrong dimension");
  detail::require(torque.dimension() == links, "torque schedule has the wrong dimension");
  for (double p : pressure.values()) detail::require(p >= 0, "pressure schedule must be >= 0");
}

namespace {

// Tensions are clamped at zero; a negative breakpoint is reported once.
InputProfile clamp_tensions(const InputProfile& profile, std::vector<std::string>& diagnostics) {
  bool clamped = false;
  std::vector<VectorXd> values = profile.tension.values();
  for (auto& v : values) {
    if ((v.array() < 0).any()) {
      clamped = true;
      v = v.cwiseMax(0.0);
    }
  }
  if (!clamped) return profile;
  diagnostics.push_back("warning: negative tension breakpoints clamped to zero");
  InputProfile out = profile;
  out.tension = PiecewiseLinear(profile.tension.times(), values);
  return out;
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& f, std::size_t b,
                 std::size_t e, std::size_t stride = 1) {
  double acc = 0.0;
  std::size_t k = b;
  for (; k + stride < e; k += stride) acc += 0.5 * (t[k + stride] - t[k]) * (f[k] + f[k + stride]);
  if (k + 1 < e) acc += 0.5 * (t[e - 1] - t[k]) * (f[k] + f[e - 1]);
  return acc;
}

// Richardson estimate of the trapezoid error over [b, e).
double trapezoid_error(const std::vector<double>& t, const std::vector<double>& f, std::size_t b,
                       std::size_t e) {
  if (e - b < 3) return 0.0;
  return std::abs(trapezoid(t, f, b, e, 1) - trapezoid(t, f, b, e, 2)) / 3.0;
}

}  // namespace

Sample make_sample(double t, const State& x, const InputSample<double>& in, const Params& robot,
                   const Friction& fric) {
  Sample s;
  s.t = t;
  s.x = x;
  s.u = in.u;
  s.u_p = in.u_p;
  s.tau_ext = in.tau_ext;
  s.v = velocity(x.q, x.p, robot);
  const auto fs = friction_sample(x, s.v, in.u_p, fric);
  s.tau_f = fs.tau_f;
  s.bristle_energy = bristle_energy(x.z, in.u_p, fric);
  s.total_energy = 0.5 * x.p.dot(s.v) + potential_energy(x.q, robot) + s.bristle_energy;
  s.residual_momentum = x.p.norm();
  s.residual_gradient = (grad_potential(x.q, robot) + fric.sigma0 * in.u_p * x.z).norm();
  s.damping_ok = damping_condition_all(s.v, fric);
  return s;
}

State step(const State& chi, const InputProfile& profile, double t, double dt, const Params& robot,
           const Friction& fric) {
  detail::require(dt > 0, "step: dt must be > 0");
  const double u_p = profile.pressure(t);
  const auto field = [&](double s, const VectorXd& x) -> VectorXd {
    const InputSample<double> in{profile.tension(s), u_p, profile.torque(s)};
    return vector_field(State::unstack(x), in, robot, fric).stacked();
  };
  return State::unstack(rk4_step(field, t, chi.stacked(), dt));
}

Trajectory simulate(const State& chi0, const InputProfile& input, double t0, double t_end,
                    const SimulationOptions& options, const Params& robot, const Friction& fric) {
  robot.validate();
  fric.validate();
  detail::require(options.dt > 0, "simulate: dt must be > 0");
  detail::require(t_end >= t0, "simulate: t_end must be >= t0");
  detail::require(options.record_stride >= 1, "simulate: record_stride must be >= 1");
  detail::require(chi0.q.size() == robot.links && chi0.p.size() == robot.links &&
                      chi0.z.size() == robot.links,
                  "simulate: initial state dimension does not match robot links");
  input.validate(robot.links, robot.tendons);

  Trajectory traj;
  const InputProfile profile = clamp_tensions(input, traj.diagnostics);
  const double dt = options.dt;
  const long steps = std::lround((t_end - t0) / dt);

  bool warned_stiff = false;
  bool warned_outside = false;
  const auto inspect = [&](const Sample& s) {
    const double stiffness = dt * fric.sigma0 * s.v.cwiseAbs().maxCoeff() / fric.mu_c;
    if (!warned_stiff && stiffness > 1.0) {
      warned_stiff = true;
      std::ostringstream msg;
      msg << "warning: bristle dynamics stiff at t=" << s.t << " (dt*sigma0*|v|/mu_c=" << stiffness
          << "); reduce dt";
      traj.diagnostics.push_back(msg.str());
    }
    if (!warned_outside && (s.x.q.cwiseAbs().array() >= options.configuration_limit).any()) {
      warned_outside = true;
      std::ostringstream msg;
      msg << "warning: configuration left |q_i| < " << options.configuration_limit << " at t=" << s.t;
      traj.diagnostics.push_back(msg.str());
    }
  };

  State x = chi0;
  Sample current = make_sample(t0, x, profile.sample(t0), robot, fric);
  inspect(current);
  traj.samples.push_back(current);

  double prev_pressure = current.u_p;
  bool quiet = false;
  double quiet_since = t0;
  for (long k = 0; k < steps; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    x = step(x, profile, t, dt, robot, fric);
    const double tn = t0 + static_cast<double>(k + 1) * dt;
    if (!x.finite()) {
      std::ostringstream msg;
      msg << "non-finite state at t=" << tn << "; reduce dt";
      throw NumericError(msg.str());
    }
    current = make_sample(tn, x, profile.sample(tn), robot, fric);
    inspect(current);
    if (current.u_p != prev_pressure) {
      traj.events.push_back({tn, prev_pressure, current.u_p,
                             0.5 * fric.sigma0 * (current.u_p - prev_pressure) * x.z.squaredNorm()});
      prev_pressure = current.u_p;
    }

    bool stop = false;
    if (options.settle && tn >= options.settle->not_before) {
      if (current.v.cwiseAbs().maxCoeff() < options.settle->velocity_tol) {
        if (!quiet) {
          quiet = true;
          quiet_since = tn;
        }
        if (tn - quiet_since >= options.settle->dwell - 0.5 * dt) {
          traj.settled = true;
          traj.settle_time = tn;
          stop = true;
        }
      } else {
        quiet = false;
      }
    }
    if (stop || (k + 1) % options.record_stride == 0 || k + 1 == steps)
      traj.samples.push_back(current);
    if (stop) break;
  }
  return traj;
}

EnergyAudit energy_audit(const Trajectory& traj, const InputProfile& profile, const Params& robot,
                         const Friction& fric) {
  detail::require(traj.samples.size() >= 2, "energy_audit: need at least two samples");
  const double t0 = traj.front().t;
  const double t1 = traj.back().t;
  detail::require(profile.pressure_constant_on(t0, t1),
                  "energy_audit: pressure changes inside the audited span");
  for (const auto& s : traj.samples)
    detail::require(s.u_p == traj.front().u_p, "energy_audit: pressure changes inside the audited span");

  const std::size_t count = traj.samples.size();
  std::vector<double> t(count), net(count), power_in(count), power_d(count);
  for (std::size_t k = 0; k < count; ++k) {
    const Sample& s = traj.samples[k];
    t[k] = s.t;
    power_in[k] = s.v.dot(input_matrix(s.x.q, robot) * s.u + s.tau_ext);
    power_d[k] = dissipation_power(s.x, s.v, s.u_p, fric);
    net[k] = power_in[k] - power_d[k];
  }

  EnergyAudit audit;
  audit.t = t;
  audit.residual.resize(count);
  audit.input_work.resize(count);
  audit.dissipated.resize(count);
  double w_in = 0.0, w_d = 0.0;
  const double h0 = traj.front().total_energy;
  for (std::size_t k = 0; k < count; ++k) {
    if (k > 0) {
      const double h = t[k] - t[k - 1];
      w_in += 0.5 * h * (power_in[k] + power_in[k - 1]);
      w_d += 0.5 * h * (power_d[k] + power_d[k - 1]);
    }
    audit.input_work[k] = w_in;
    audit.dissipated[k] = w_d;
    audit.residual[k] = traj.samples[k].total_energy - h0 - (w_in - w_d);
    audit.max_abs_residual = std::max(audit.max_abs_residual, std::abs(audit.residual[k]));
    if (k > 0)
      audit.max_increase = std::max(audit.max_increase, traj.samples[k].total_energy -
                                                            traj.samples[k - 1].total_energy);
  }
  audit.quadrature_error = trapezoid_error(t, net, 0, count);
  return audit;
}

std::vector<Trajectory> constant_pressure_segments(const Trajectory& traj) {
  std::vector<Trajectory> out;
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    if (out.empty() || traj.samples[k].u_p != out.back().samples.back().u_p) out.emplace_back();
    out.back().samples.push_back(traj.samples[k]);
  }
  return out;
}

PassivityAudit passivity_audit(const Trajectory& traj, std::size_t begin, std::size_t end,
                               const Friction& fric) {
  (void)fric;
  detail::require(begin < end && end <= traj.samples.size(), "passivity_audit: bad sample window");
  const double u_p = traj.samples[begin].u_p;
  std::vector<double> t, supply_rate;
  PassivityAudit audit;
  for (std::size_t k = begin; k < end; ++k) {
    const Sample& s = traj.samples[k];
    detail::require(s.u_p == u_p, "passivity_audit: pressure changes inside the window");
    t.push_back(s.t);
    supply_rate.push_back(s.v.dot(s.tau_f));
    audit.condition_held = audit.condition_held && s.damping_ok;
  }
  const std::size_t count = t.size();
  audit.supply = trapezoid(t, supply_rate, 0, count);
  audit.storage_delta = traj.samples[end - 1].bristle_energy - traj.samples[begin].bristle_energy;
  const double scale = std::abs(audit.supply) + traj.samples[end - 1].bristle_energy +
                       traj.samples[begin].bristle_energy;
  audit.tolerance = 4.0 * trapezoid_error(t, supply_rate, 0, count) + 1e-12 * scale + 1e-300;
  audit.satisfied = audit.supply >= audit.storage_delta - audit.tolerance;
  return audit;
}

PassivityAudit passivity_audit(const Trajectory& traj, const Friction& fric) {
  return passivity_audit(traj, 0, traj.samples.size(), fric);
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string trajectory_csv_header(Index links) {
  std::ostringstream h;
  h << "t";
  for (const char* block : {"q", "p", "z"})
    for (Index i = 1; i <= links; ++i) h << ',' << block << i;
  h << ",H,Hz";
  for (Index i = 1; i <= links; ++i) h << ",tauf" << i;
  h << ",res_p,res_grad";
  return h.str();
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << trajectory_csv_header(traj.links()) << '\n';
  for (const auto& s : traj.samples) {
    out << format_double(s.t);
    for (const VectorXd* block : {&s.x.q, &s.x.p, &s.x.z})
      for (Index i = 0; i < block->size(); ++i) out << ',' << format_double((*block)(i));
    out << ',' << format_double(s.total_energy) << ',' << format_double(s.bristle_energy);
    for (Index i = 0; i < s.tau_f.size(); ++i) out << ',' << format_double(s.tau_f(i));
    out << ',' << format_double(s.residual_momentum) << ',' << format_double(s.residual_gradient)
        << '\n';
  }
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) return table;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) table.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t next = std::min(line.find(',', pos), line.size());
      double value = 0.0;
      const auto res = std::from_chars(line.data() + pos, line.data() + next, value);
      if (res.ec != std::errc()) throw std::invalid_argument("read_csv: bad number in '" + line + "'");
      row.push_back(value);
      pos = next + 1;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace ljcr
