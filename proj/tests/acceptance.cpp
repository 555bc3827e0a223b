// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned here.

#include "ljcr/analysis.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

using namespace ljcr;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget;  // s, 0 = no runtime limit
  std::function<Outcome()> check;
};

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

class Rng {
 public:
  explicit Rng(unsigned seed) : engine_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  VectorXd uniform(Index n, double lo, double hi) {
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
    return v;
  }

 private:
  std::mt19937_64 engine_;
};

double rel(double err, double scale) { return scale > 0 ? err / scale : err; }

// --- 1 -----------------------------------------------------------------------

Outcome gradient_correctness() {
  constexpr int kStates = 200;
  constexpr double kTol = 1e-6;
  const Params robot;
  const Friction fric;
  const Index n = robot.links;
  Rng rng(11);
  double worst = 0.0;
  for (int s = 0; s < kStates; ++s) {
    const double u_p = rng.uniform(1e3, 8e4);
    State chi{rng.uniform(n, -1.2, 1.2), rng.uniform(n, -5e-3, 5e-3),
              rng.uniform(n, -fric.bristle_bound(), fric.bristle_bound())};
    const VectorXd analytic = grad_total_hamiltonian(chi, u_p, robot, fric).stacked();
    const VectorXd x = chi.stacked();
    VectorXd fd(x.size());
    for (Index i = 0; i < x.size(); ++i) {
      const double h = 1e-6 * std::max(1e-3, std::abs(x(i)));
      VectorXd a = x, b = x;
      a(i) += h;
      b(i) -= h;
      fd(i) = (total_hamiltonian(State::unstack(a), u_p, robot, fric) -
               total_hamiltonian(State::unstack(b), u_p, robot, fric)) / (2 * h);
    }
    for (Index blk = 0; blk < 3; ++blk) {
      const VectorXd g = analytic.segment(blk * n, n);
      worst = std::max(worst, rel((fd.segment(blk * n, n) - g).norm(), g.norm()));
    }
  }
  return {worst < kTol, fmt("%d states, max blockwise rel err %.2e (tol %.0e)", kStates, worst, kTol)};
}

// --- 2 -----------------------------------------------------------------------

Outcome degeneration() {
  constexpr double kStateTol = 1e-10;
  constexpr double kDriftTol = 1e-8;  // per simulated second
  constexpr double kDt = 1e-4;
  const Params robot;
  const Friction fric;
  const Index n = robot.links;

  const InputProfile profile{
      PiecewiseLinear({0.0, 0.3, 0.6, 1.0},
                      {VectorXd::Zero(2), (VectorXd(2) << 4.0, 0.0).finished(),
                       (VectorXd(2) << 1.0, 2.5).finished(), (VectorXd(2) << 0.0, 1.0).finished()}),
      PiecewiseConstant::constant(0.0),
      PiecewiseLinear({0.0, 1.0}, {VectorXd::Zero(n), (VectorXd(3) << 0.0, 0.02, -0.01).finished()})};
  State chi0 = State::zero(n);
  chi0.q << 0.1, -0.05, 0.2;
  SimulationOptions options;
  options.dt = kDt;
  const Trajectory traj = simulate(chi0, profile, 0.0, 1.0, options, robot, fric);

  const auto free_field = [&](double t, const VectorXd& x) -> VectorXd {
    const RobotState<double> s{x.head(n), x.tail(n)};
    const InputSample<double> in = profile.sample(t);
    const RobotState<double> d = jamming_free_field(s, in.u, robot);
    VectorXd out(2 * n);
    out << d.q, d.p + in.tau_ext;
    return out;
  };
  VectorXd x(2 * n);
  x << chi0.q, chi0.p;
  double err = 0.0;
  for (std::size_t k = 1; k < traj.samples.size(); ++k) {
    x = rk4_step(free_field, (k - 1) * kDt, x, kDt);
    const Sample& s = traj.samples[k];
    err = std::max(err, std::max((s.x.q - x.head(n)).cwiseAbs().maxCoeff(),
                                 (s.x.p - x.tail(n)).cwiseAbs().maxCoeff()));
    err = std::max(err, s.tau_f.cwiseAbs().maxCoeff());
  }

  // Autonomous chain: the total energy is conserved up to the integrator.
  State chi1 = State::zero(n);
  chi1.q << 0.3, -0.2, 0.25;
  chi1.p << 1e-3, 0.0, -5e-4;
  const Trajectory free = simulate(chi1, InputProfile::constant(VectorXd::Zero(2), 0.0, VectorXd::Zero(n)),
                                   0.0, 1.0, options, robot, fric);
  double drift = 0.0;
  for (const Sample& s : free.samples)
    drift = std::max(drift, std::abs(s.total_energy - free.front().total_energy));
  const double duration = free.back().t - free.front().t;
  const double rate = drift / duration;
  return {err < kStateTol && rate < kDriftTol,
          fmt("state err %.2e (tol %.0e), energy drift %.2e J/s (tol %.0e)", err, kStateTol, rate,
              kDriftTol)};
}

// --- 3 -----------------------------------------------------------------------

Outcome friction_equivalence() {
  constexpr int kInputs = 1000;
  constexpr double kTol = 1e-12;
  const Friction fric;
  Rng rng(23);
  double worst = 0.0;
  for (int s = 0; s < kInputs; ++s) {
    const double u_p = rng.uniform(1.0, 1e5);
    VectorXd v = rng.uniform(3, -1.0, 1.0);
    for (Index i = 0; i < v.size(); ++i) v(i) *= std::pow(10.0, rng.uniform(-4.0, 1.0));
    const VectorXd z = rng.uniform(3, -fric.bristle_bound(), fric.bristle_bound());
    const VectorXd canonical = friction_torque(z, bristle_rate(z, v, fric), v, u_p, fric);
    const VectorXd ph = friction_torque_ph(z, v, u_p, fric);
    worst = std::max(worst, rel((canonical - ph).norm(), canonical.norm()));
  }
  return {worst < kTol, fmt("%d inputs, max rel err %.2e (tol %.0e)", kInputs, worst, kTol)};
}

// --- 4 -----------------------------------------------------------------------

Outcome steady_state_friction_check() {
  constexpr double kTol = 1e-3;
  const Friction fric;
  const double u_p = 3e4;
  const std::vector<double> speeds = {0.002, -0.005, 0.01, 0.03, -0.1, 1.0};
  double worst = 0.0;
  std::string per;
  for (double v : speeds) {
    const VectorXd vel = VectorXd::Constant(1, v);
    const double rate = fric.sigma0 * std::abs(v) / stribeck(v, fric);
    const double t_end = 12.0 / rate;
    const double dt = std::min(1e-2, 0.05 / rate);
    const VectorXd z = integrate_bristles(VectorXd::Zero(1), [&](double) { return vel; }, t_end, dt, fric);
    const VectorXd tau = friction_torque(z, bristle_rate(z, vel, fric), vel, u_p, fric);
    const double expected = steady_state_friction(vel, u_p, fric)(0);
    const double e = std::abs(tau(0) - expected) / std::abs(expected);
    worst = std::max(worst, e);
    per += fmt(" %g:%.1e", v, e);
  }
  return {worst < kTol && speeds.size() >= 5,
          fmt("%zu speeds, max rel err %.2e (tol %.0e) [v:err%s]", speeds.size(), worst, kTol, per.c_str())};
}

// --- 5, 6 --------------------------------------------------------------------

std::vector<Trajectory> random_trajectories() {
  constexpr int kCount = 20;
  const Params robot;
  const Friction fric;
  const Index n = robot.links;
  Rng rng(37);
  std::vector<Trajectory> out(kCount);
  std::vector<State> starts;
  std::vector<InputProfile> profiles;
  for (int k = 0; k < kCount; ++k) {
    State chi0{rng.uniform(n, -0.3, 0.3), VectorXd::Zero(n),
               rng.uniform(n, -0.99 * fric.bristle_bound(), 0.99 * fric.bristle_bound())};
    std::vector<double> tt = {0.0}, pt = {0.0}, pv;
    std::vector<VectorXd> uv = {VectorXd::Zero(2)}, tv = {VectorXd::Zero(n)};
    for (int j = 1; j <= 4; ++j) {
      tt.push_back(0.25 * j);
      uv.push_back(rng.uniform(2, 0.0, 8.0));
      tv.push_back(rng.uniform(n, -0.05, 0.05));
    }
    pv.push_back(rng.uniform(0.0, 8e4));
    for (int j = 1; j <= 2; ++j) {
      pt.push_back(j * 0.35 + rng.uniform(0.0, 0.1));
      pv.push_back(rng.uniform(0.0, 8e4));
    }
    starts.push_back(chi0);
    profiles.push_back({PiecewiseLinear(tt, uv), PiecewiseConstant(pt, pv), PiecewiseLinear(tt, tv)});
  }
  SimulationOptions options;
  options.dt = 1e-4;
  parallel_for(kCount, worker_count(), [&](std::size_t k) {
    out[k] = simulate(starts[k], profiles[k], 0.0, 1.0, options, robot, fric);
  });
  return out;
}

Outcome bristle_boundedness(const std::vector<Trajectory>& trajs) {
  const Friction fric;
  const double bound = fric.bristle_bound();
  double peak = 0.0;
  for (const Trajectory& t : trajs)
    for (const Sample& s : t.samples) peak = std::max(peak, s.x.z.cwiseAbs().maxCoeff());
  return {peak <= bound, fmt("%zu trajectories, max |z| %.6g, bound %.6g, margin %.3e (%.2f%%)",
                             trajs.size(), peak, bound, bound - peak, 100 * (bound - peak) / bound)};
}

Outcome passivity(const std::vector<Trajectory>& trajs) {
  constexpr std::size_t kWindow = 500;  // samples
  const Friction fric;
  int audited = 0, skipped = 0, failed = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  for (const Trajectory& traj : trajs) {
    for (const Trajectory& seg : constant_pressure_segments(traj)) {
      if (seg.front().u_p == 0.0) continue;
      for (std::size_t b = 0; b + 1 < seg.samples.size(); b += kWindow) {
        const std::size_t e = std::min(seg.samples.size(), b + kWindow + 1);
        const PassivityAudit a = passivity_audit(seg, b, e, fric);
        if (!a.condition_held) {
          ++skipped;
          continue;
        }
        ++audited;
        if (!a.satisfied) ++failed;
        worst_slack = std::min(worst_slack, a.supply - a.storage_delta + a.tolerance);
      }
    }
  }
  return {audited > 0 && failed == 0,
          fmt("%d windows audited, %d failed, %d skipped (condition violated), min slack %.3e J", audited,
              failed, skipped, worst_slack)};
}

// --- 7 -----------------------------------------------------------------------

Outcome equilibrium_family() {
  constexpr int kPoints = 50;
  constexpr double kTol = 1e-12;
  const Params robot;
  const Friction fric;
  const Index n = robot.links;
  Rng rng(41);
  double worst = 0.0;
  int count = 0;
  for (int k = 0; k < kPoints; ++k) {
    const VectorXd q_a = rng.uniform(n, -1.0, 1.0);
    for (double kpa : {10.0, 30.0, 80.0}) {
      const double u_p = 1e3 * kpa;
      const State chi{q_a, VectorXd::Zero(n), locked_bristle(q_a, u_p, robot, fric)};
      const InputSample<double> in{VectorXd::Zero(robot.tendons), u_p, VectorXd::Zero(n)};
      worst = std::max(worst, vector_field(chi, in, robot, fric).stacked().norm());
      ++count;
    }
  }
  return {worst < kTol, fmt("%d equilibria, max |field| %.2e (tol %.0e)", count, worst, kTol)};
}

// --- 8 -----------------------------------------------------------------------

Outcome stiffness_law() {
  constexpr double kHessTol = 1e-6;
  constexpr double kProbeTol = 0.02;
  constexpr double kR2 = 0.999;
  const Params robot;
  const Friction fric;

  std::vector<double> grid;
  for (int kpa = 0; kpa <= 80; kpa += 5) grid.push_back(1e3 * kpa);

  double hess = 0.0;
  for (double u_p : grid) {
    const MatrixXd k = analytic_stiffness(u_p, robot, fric);
    hess = std::max(hess, (numeric_stiffness_hessian(u_p, robot, fric) - k).norm() / k.norm());
  }

  double probe = 0.0, displacement = 0.0;
  for (double kpa : {10.0, 30.0, 80.0}) {
    const double u_p = 1e3 * kpa;
    const MatrixXd k = analytic_stiffness(u_p, robot, fric);
    const double torque = 1e-3 / k.inverse().colwise().norm().maxCoeff();
    const ProbeResult r = probe_stiffness(u_p, torque, robot, fric);
    probe = std::max(probe, (r.stiffness - k).norm() / k.norm());
    displacement = std::max(displacement, r.max_displacement);
  }

  const StiffnessReport sweep = stiffness_sweep(grid, 0.01, 3, robot, fric);
  int errors = 0;
  for (const auto& p : sweep.points) errors += !p.error.empty();
  const double r2 = sweep.fit.r2.value_or(0.0);
  const bool ok = hess < kHessTol && probe < kProbeTol && errors == 0 && !sweep.fit.degenerate &&
                  r2 > kR2 && sweep.fit.slope > 0;
  return {ok, fmt("Hessian rel err %.2e (tol %.0e); probe rel err %.2f%% at |dq| %.2e (tol 2%%); "
                  "K_T fit over %zu pressures: slope %.4e N/m/Pa, R^2 %.6f (min %.3f), %d failed points",
                  hess, kHessTol, 100 * probe, displacement, grid.size(), sweep.fit.slope, r2, kR2, errors)};
}

// --- 9 -----------------------------------------------------------------------

Outcome shape_locking() {
  const Params robot;
  const Friction fric;
  const ShapeLockTimings timings;
  const std::vector<double> pressures = {0.0, 3e4, 8e4};
  const std::vector<ShapeLockPoint> pts =
      shape_lock_sweep(pressures, kPi / 3, timings, robot, fric);
  const ShapeLockPoint& control = pts[0];
  const ShapeLockPoint& p30 = pts[1];
  const ShapeLockPoint& p80 = pts[2];
  const bool locked = p30.converged && p80.converged && p30.error.empty() && p80.error.empty();
  const bool ordered = p80.tip_displacement < p30.tip_displacement;
  const bool control_failed = !control.converged;
  return {locked && ordered && control_failed,
          fmt("30 kPa: tip %.3e m, residual %.1e/%.1e, %s; 80 kPa: tip %.3e m, residual %.1e/%.1e, %s; "
              "control: %s",
              p30.tip_displacement, p30.manifold.momentum, p30.manifold.gradient,
              p30.converged ? "locked" : "not locked", p80.tip_displacement, p80.manifold.momentum,
              p80.manifold.gradient, p80.converged ? "locked" : "not locked",
              control_failed ? (control.error.empty() ? "did not lock" : control.error.c_str())
                             : "locked (unexpected)")};
}

// --- 10 ----------------------------------------------------------------------

Outcome linear_stability() {
  const Params robot;
  const Friction fric;
  double worst = -std::numeric_limits<double>::infinity();
  int count = 0;
  for (double kpa : {0.01, 0.1, 1.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 100.0}) {
    const Eigen::VectorXcd ev = linearized_eigenvalues(1e3 * kpa, robot, fric);
    worst = std::max(worst, ev.real().maxCoeff());
    ++count;
  }
  return {worst < 0, fmt("%d pressures in [10 Pa, 100 kPa], max Re(lambda) %.4e", count, worst)};
}

// --- 11 ----------------------------------------------------------------------

Outcome integrator_order() {
  const Params robot;
  const Friction fric;
  const Index n = robot.links;
  State chi0 = State::zero(n);
  chi0.q << 0.2, -0.1, 0.15;
  const InputProfile profile =
      InputProfile::constant((VectorXd(2) << 2.0, 0.5).finished(), 0.0, VectorXd::Zero(n));
  const double t_end = 0.5;
  const auto end_state = [&](double dt) {
    SimulationOptions options;
    options.dt = dt;
    options.record_stride = 1 << 30;
    return simulate(chi0, profile, 0.0, t_end, options, robot, fric).back().x;
  };
  // fastest mode ~140 rad/s, so omega dt <= 0.14 on this ladder
  const State reference = end_state(1.25e-4 / 16);
  std::vector<double> errors;
  std::string list;
  for (double dt : {1e-3, 5e-4, 2.5e-4, 1.25e-4}) {
    const State x = end_state(dt);
    errors.push_back(std::max((x.q - reference.q).cwiseAbs().maxCoeff(),
                              (x.p - reference.p).cwiseAbs().maxCoeff()));
    list += fmt(" %.1e", errors.back());
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    lx.push_back(-static_cast<double>(i) * std::log(2.0));
    ly.push_back(std::log(errors[i]));
  }
  const double order = linear_fit(lx, ly).slope;
  return {order >= 3.8 && order <= 4.2, fmt("order %.3f (range [3.8, 4.2]), errors%s", order, list.c_str())};
}

}  // namespace

int main() {
  std::vector<Trajectory> random;
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", 10, gradient_correctness},
      {2, "degeneration to the jamming-free chain", 0, degeneration},
      {3, "friction output forms agree", 0, friction_equivalence},
      {4, "steady-state friction", 30, steady_state_friction_check},
      {5, "bristle boundedness", 0,
       [&] {
         random = random_trajectories();
         return bristle_boundedness(random);
       }},
      {6, "passivity of the friction port", 0, [&] { return passivity(random); }},
      {7, "equilibrium family", 0, equilibrium_family},
      {8, "stiffness law", 300, stiffness_law},
      {9, "shape locking", 120, shape_locking},
      {10, "linearized stability", 0, linear_stability},
      {11, "integrator order", 0, integrator_order},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget > 0 && seconds > c.budget) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", c.budget);
    }
    failures += !o.pass;
    std::printf("%s %2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
