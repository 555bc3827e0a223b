#include "ljcr/analysis.hpp"

#include <atomic>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

namespace ljcr {

MatrixXd numeric_stiffness_hessian(double u_p, const Params& robot, const Friction& fric, double step) {
  detail::require(step > 0, "numeric_stiffness_hessian: step must be > 0");
  const Index n = robot.links;
  MatrixXd h(n, n);
  for (Index j = 0; j < n; ++j) {
    const VectorXd e = VectorXd::Unit(n, j) * step;
    h.col(j) = (grad_potential(e, robot) - grad_potential((-e).eval(), robot)) / (2.0 * step);
  }
  MatrixXd k = 0.5 * (h + h.transpose());
  k.diagonal().array() += fric.sigma0 * u_p;
  return k;
}

MatrixXd linearized_dynamics(double u_p, const Params& robot, const Friction& fric) {
  const Index n = robot.links;
  const VectorXd origin = VectorXd::Zero(n);
  const Eigen::LLT<MatrixXd> mass(inertia_matrix(origin, robot));
  const MatrixXd k = hessian_potential(origin, robot) + fric.sigma0 * u_p * MatrixXd::Identity(n, n);
  const MatrixXd c = (fric.sigma1 + fric.sigma2) * u_p * MatrixXd::Identity(n, n);
  MatrixXd a = MatrixXd::Zero(2 * n, 2 * n);
  a.topRightCorner(n, n).setIdentity();
  a.bottomLeftCorner(n, n) = -mass.solve(k);
  a.bottomRightCorner(n, n) = -mass.solve(c);
  return a;
}

Eigen::VectorXcd linearized_eigenvalues(double u_p, const Params& robot, const Friction& fric) {
  return Eigen::EigenSolver<MatrixXd>(linearized_dynamics(u_p, robot, fric), false).eigenvalues();
}

namespace {

struct SettledLoad {
  State state;
  double balance_residual;
};

// Ramps tau_ext from zero to `torque` and waits for the chain to come to rest.
SettledLoad settle_under_load(double u_p, const VectorXd& torque, const Params& robot,
                              const Friction& fric, const ProbeOptions& options) {
  const Index n = robot.links;
  const VectorXd zero_u = VectorXd::Zero(robot.tendons);
  InputProfile profile{PiecewiseLinear::constant(zero_u), PiecewiseConstant::constant(u_p),
                       PiecewiseLinear({0.0, options.ramp}, {VectorXd::Zero(n), torque})};
  SimulationOptions sim;
  sim.dt = options.dt;
  sim.record_stride = 1 << 30;
  sim.settle = SettleCriterion{options.velocity_tol, options.dwell, options.ramp};
  const Trajectory traj = simulate(State::zero(n), profile, 0.0, options.max_time, sim, robot, fric);
  if (!traj.settled) {
    std::ostringstream msg;
    msg << "probe did not settle within " << options.max_time << " s at u_P=" << u_p
        << " Pa; reduce the probe load or raise the pressure";
    throw NonConvergenceError(msg.str());
  }
  const State& x = traj.back().x;
  const double residual =
      (torque - grad_potential(x.q, robot) - fric.sigma0 * u_p * x.z).norm();
  return {x, residual};
}

VectorXd static_balance(const VectorXd& torque, const Params& robot) {
  VectorXd q = VectorXd::Zero(robot.links);
  for (int it = 0; it < 50; ++it) {
    const VectorXd r = grad_potential(q, robot) - torque;
    if (r.lpNorm<Eigen::Infinity>() < 1e-15 * (1.0 + torque.norm())) return q;
    q -= hessian_potential(q, robot).ldlt().solve(r);
  }
  if ((grad_potential(q, robot) - torque).norm() > 1e-12 * (1.0 + torque.norm()))
    throw NonConvergenceError("static balance did not converge");
  return q;
}

// Quintic smoothstep from `from` to `to` over [t0, t0 + ramp], sampled finely
// enough that the piecewise-linear kinks excite almost nothing.
PiecewiseLinear smooth_ramp(double t0, double ramp, const VectorXd& from, const VectorXd& to) {
  constexpr int kSegments = 200;
  std::vector<double> times;
  std::vector<VectorXd> values;
  for (int k = 0; k <= kSegments; ++k) {
    const double s = static_cast<double>(k) / kSegments;
    const double w = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
    times.push_back(t0 + ramp * s);
    values.push_back(from + w * (to - from));
  }
  return PiecewiseLinear(std::move(times), std::move(values));
}

}  // namespace

ProbeResult probe_stiffness(double u_p, double torque, const Params& robot, const Friction& fric,
                            const ProbeOptions& options) {
  robot.validate();
  fric.validate();
  detail::require(u_p > 0, "probe_stiffness: pressure must be > 0");
  detail::require(torque > 0, "probe_stiffness: probe torque must be > 0");
  const Index n = robot.links;
  ProbeResult result;
  result.displacements.resize(n, n);
  for (Index j = 0; j < n; ++j) {
    const SettledLoad s = settle_under_load(u_p, VectorXd::Unit(n, j) * torque, robot, fric, options);
    result.displacements.col(j) = s.state.q;
    result.max_displacement = std::max(result.max_displacement, s.state.q.norm());
    result.max_balance_residual = std::max(result.max_balance_residual, s.balance_residual);
  }
  // tau_j = K dq_j for every column: K = torque * D^{-1}
  result.stiffness = torque * result.displacements.partialPivLu().inverse();
  return result;
}

TransverseProbe transverse_stiffness(double u_p, double tip_force, const Params& robot,
                                     const Friction& fric, const ProbeOptions& options) {
  robot.validate();
  fric.validate();
  detail::require(u_p >= 0, "transverse_stiffness: pressure must be >= 0");
  detail::require(tip_force > 0, "transverse_stiffness: tip force must be > 0");
  const VectorXd origin = VectorXd::Zero(robot.links);
  const VectorXd torque = tip_jacobian(origin, robot).row(0).transpose() * tip_force;

  TransverseProbe probe;
  if (u_p > 0) {
    probe.dq = settle_under_load(u_p, torque, robot, fric, options).state.q;
  } else {
    probe.dq = static_balance(torque, robot);
    probe.dynamic = false;
  }
  probe.tip_displacement = (forward_kinematics(probe.dq, robot) - forward_kinematics(origin, robot)).norm();
  probe.stiffness = tip_force / probe.tip_displacement;
  return probe;
}

double analytic_transverse_stiffness(double u_p, const Params& robot, const Friction& fric) {
  const VectorXd origin = VectorXd::Zero(robot.links);
  const VectorXd jx = tip_jacobian(origin, robot).row(0).transpose();
  const MatrixXd k = analytic_stiffness(u_p, robot, fric);
  return 1.0 / jx.dot(k.ldlt().solve(jx));
}

BendSolution bend_equilibrium(double target, const Params& robot) {
  robot.validate();
  const Index n = robot.links;
  const VectorXd origin = VectorXd::Zero(n);
  const MatrixXd g = input_matrix(origin, robot);

  // Unknowns (q, s): grad U(q) = s g_j, 1^T q = target.
  for (Index j = 0; j < g.cols(); ++j) {
    const VectorXd col = g.col(j);
    if (col.norm() == 0.0) continue;
    VectorXd q = VectorXd::Constant(n, target / static_cast<double>(n));
    double s = col.dot(grad_potential(q, robot)) / col.squaredNorm();
    bool ok = false;
    for (int it = 0; it < 60; ++it) {
      VectorXd r(n + 1);
      r.head(n) = grad_potential(q, robot) - s * col;
      r(n) = q.sum() - target;
      if (r.lpNorm<Eigen::Infinity>() < 1e-14) {
        ok = true;
        break;
      }
      MatrixXd jac = MatrixXd::Zero(n + 1, n + 1);
      jac.topLeftCorner(n, n) = hessian_potential(q, robot);
      jac.topRightCorner(n, 1) = -col;
      jac.bottomLeftCorner(1, n).setOnes();
      const VectorXd d = jac.fullPivLu().solve(r);
      q -= d.head(n);
      s -= d(n);
    }
    if (ok && s >= 0.0) {
      VectorXd u = VectorXd::Zero(robot.tendons);
      u(j) = s;
      return {q, u};
    }
  }
  throw NonConvergenceError("phase 2: no tendon can hold the requested bend");
}

ShapeLockResult shape_locking_scenario(double bend_target, double u_p_lock,
                                       const ShapeLockTimings& timings, const Params& robot,
                                       const Friction& fric) {
  robot.validate();
  fric.validate();
  detail::require(u_p_lock >= 0, "shape_locking_scenario: pressure must be >= 0");
  const Index n = robot.links;
  const Index m = robot.tendons;
  const VectorXd zero_n = VectorXd::Zero(n);
  const VectorXd zero_m = VectorXd::Zero(m);

  ShapeLockResult result;
  result.u_p = u_p_lock;
  const BendSolution bend = bend_equilibrium(bend_target, robot);
  result.tension = bend.tension;
  result.q_locked = bend.q;

  SimulationOptions sim;
  sim.dt = timings.dt;
  sim.record_stride = timings.record_stride;
  const auto torque_free = PiecewiseLinear::constant(zero_n);

  // Phase 1: rest at the origin.
  double t = 0.0;
  State x = State::zero(n);
  result.phases[0] = simulate(x, InputProfile::constant(zero_m, 0.0, zero_n), t, t + timings.settle,
                              sim, robot, fric);
  x = result.phases[0].back().x;
  t = result.phases[0].back().t;

  // Phase 2: tendon ramp to the static bend tension, no vacuum.
  {
    InputProfile profile{smooth_ramp(t, timings.bend_ramp, zero_m, bend.tension),
                         PiecewiseConstant::constant(0.0), torque_free};
    result.phases[1] = simulate(x, profile, t, t + timings.bend_ramp + timings.bend_hold, sim, robot, fric);
    x = result.phases[1].back().x;
    t = result.phases[1].back().t;
  }
  const double bend_reached = x.q.sum();
  if (std::abs(bend_reached - bend_target) > timings.bend_tolerance) {
    std::ostringstream msg;
    msg << "phase 2: bend " << bend_reached << " rad missed target " << bend_target
        << " rad by more than " << timings.bend_tolerance;
    throw NonConvergenceError(msg.str());
  }

  // Phase 3: vacuum on, tension held.
  {
    if (timings.reset_bristle_on_lock) x.z.setZero();
    InputProfile profile{PiecewiseLinear::constant(bend.tension), PiecewiseConstant::constant(u_p_lock),
                         torque_free};
    SimulationOptions lock = sim;
    if (u_p_lock > 0) lock.settle = SettleCriterion{timings.velocity_tol, timings.dwell, t};
    result.phases[2] = simulate(x, profile, t, t + timings.lock_max, lock, robot, fric);
    x = result.phases[2].back().x;
    t = result.phases[2].back().t;
  }

  result.q_release = x.q;
  result.bend_at_release = x.q.sum();

  // Phase 4: release the tendon with the vacuum held.
  {
    InputProfile profile{smooth_ramp(t, timings.release_ramp, bend.tension, zero_m),
                         PiecewiseConstant::constant(u_p_lock), torque_free};
    SimulationOptions release = sim;
    if (u_p_lock > 0)
      release.settle = SettleCriterion{timings.velocity_tol, timings.dwell, t + timings.release_ramp};
    result.phases[3] =
        simulate(x, profile, t, t + timings.release_ramp + timings.release_max, release, robot, fric);
    x = result.phases[3].back().x;
  }

  result.q_end = x.q;
  result.residual_angle = (result.q_end - result.q_release).norm();
  result.tip_displacement =
      (forward_kinematics(result.q_end, robot) - forward_kinematics(result.q_release, robot)).norm();
  if (u_p_lock > 0) {
    result.manifold = manifold_residual(x, u_p_lock, robot, fric);
    result.converged = result.phases[3].settled && result.manifold.momentum < timings.manifold_tol &&
                       result.manifold.gradient < timings.manifold_tol;
  } else {
    result.manifold = {x.p.norm(), grad_potential(x.q, robot).norm()};
  }
  return result;
}

double attraction_radius(const VectorXd& q_a, double u_p, const Params& robot, const Friction& fric,
                         const AttractionOptions& options) {
  detail::require(u_p > 0, "attraction_radius: pressure must be > 0");
  const Index n = robot.links;
  const State anchor{q_a, VectorXd::Zero(n), locked_bristle(q_a, u_p, robot, fric)};

  std::mt19937 rng(options.seed);
  std::normal_distribution<double> normal;
  VectorXd direction(3 * n);
  for (Index i = 0; i < direction.size(); ++i) direction(i) = normal(rng);
  direction.normalize();

  const InputProfile profile =
      InputProfile::constant(VectorXd::Zero(robot.tendons), u_p, VectorXd::Zero(n));
  SimulationOptions sim;
  sim.dt = options.dt;
  sim.record_stride = 1 << 30;
  sim.settle = SettleCriterion{1e-6, 0.2, 0.0};

  const auto attracted = [&](double radius) {
    const State start = State::unstack(anchor.stacked() + radius * direction);
    try {
      const Trajectory traj = simulate(start, profile, 0.0, options.max_time, sim, robot, fric);
      if (!traj.settled) return false;
      const auto res = manifold_residual(traj.back().x, u_p, robot, fric);
      return res.gradient < 1e-6 && (traj.back().x.q - q_a).lpNorm<Eigen::Infinity>() <= options.drift_tolerance;
    } catch (const NumericError&) {
      return false;
    }
  };

  if (attracted(options.max_radius)) return options.max_radius;
  double lo = 0.0, hi = options.max_radius;
  while (hi - lo > options.resolution) {
    const double mid = 0.5 * (lo + hi);
    (attracted(mid) ? lo : hi) = mid;
  }
  return lo;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  detail::require(x.size() == y.size(), "linear_fit: x and y differ in length");
  LinearFit fit;
  const std::size_t count = x.size();
  bool distinct = false;
  for (std::size_t k = 1; k < count; ++k) distinct = distinct || x[k] != x[0];
  if (count < 2 || !distinct) {
    fit.degenerate = true;
    if (count > 0) fit.intercept = Eigen::Map<const VectorXd>(y.data(), count).mean();
    return fit;
  }
  MatrixXd a(count, 2);
  const Eigen::Map<const VectorXd> yv(y.data(), count);
  for (std::size_t k = 0; k < count; ++k) a.row(k) << x[k], 1.0;
  const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(yv);
  fit.slope = coef(0);
  fit.intercept = coef(1);
  const double ss_res = (yv - a * coef).squaredNorm();
  const double ss_tot = (yv.array() - yv.mean()).matrix().squaredNorm();
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

unsigned worker_count() {
  if (const char* env = std::getenv("LJCR_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return static_cast<unsigned>(w);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs job(k) for k in [0, count) on a small pool; results are written by index.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& job) {
  if (workers == 0) workers = worker_count();
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  const auto run = [&] {
    for (std::size_t k = next++; k < count; k = next++) job(k);
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
}

namespace {

void require_ascending(const std::vector<double>& grid) {
  detail::require(!grid.empty(), "sweep: pressure grid must not be empty");
  for (std::size_t k = 1; k < grid.size(); ++k)
    detail::require(grid[k] > grid[k - 1], "sweep: pressure grid must be ascending");
}

}  // namespace

StiffnessReport stiffness_sweep(const std::vector<double>& u_p_grid, double tip_force, int repeats,
                                const Params& robot, const Friction& fric, const ProbeOptions& options,
                                unsigned workers) {
  require_ascending(u_p_grid);
  detail::require(repeats >= 1, "sweep: repeats must be >= 1");
  StiffnessReport report;
  report.points.resize(u_p_grid.size());
  const std::size_t jobs = u_p_grid.size() * static_cast<std::size_t>(repeats);
  for (std::size_t k = 0; k < u_p_grid.size(); ++k) {
    StiffnessPoint& pt = report.points[k];
    pt.u_p = u_p_grid[k];
    pt.analytic = analytic_stiffness(pt.u_p, robot, fric);
    pt.hessian = numeric_stiffness_hessian(pt.u_p, robot, fric);
    pt.kt_analytic = analytic_transverse_stiffness(pt.u_p, robot, fric);
    pt.kt_probe.assign(static_cast<std::size_t>(repeats), 0.0);
  }
  std::vector<std::string> errors(jobs);
  parallel_for(jobs, workers, [&](std::size_t job) {
    const std::size_t k = job / static_cast<std::size_t>(repeats);
    const std::size_t r = job % static_cast<std::size_t>(repeats);
    try {
      report.points[k].kt_probe[r] =
          transverse_stiffness(u_p_grid[k], tip_force, robot, fric, options).stiffness;
    } catch (const std::exception& e) {
      errors[job] = e.what();
    }
  });

  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < u_p_grid.size(); ++k) {
    StiffnessPoint& pt = report.points[k];
    for (std::size_t r = 0; r < pt.kt_probe.size(); ++r) {
      const std::string& err = errors[k * static_cast<std::size_t>(repeats) + r];
      if (!err.empty()) {
        if (pt.error.empty()) pt.error = err;
        continue;
      }
      xs.push_back(pt.u_p);
      ys.push_back(pt.kt_probe[r]);
    }
  }
  report.fit = linear_fit(xs, ys);
  return report;
}

std::vector<ShapeLockPoint> shape_lock_sweep(const std::vector<double>& u_p_grid, double bend_target,
                                             const ShapeLockTimings& timings, const Params& robot,
                                             const Friction& fric, unsigned workers) {
  require_ascending(u_p_grid);
  std::vector<ShapeLockPoint> out(u_p_grid.size());
  parallel_for(out.size(), workers, [&](std::size_t k) {
    ShapeLockPoint& pt = out[k];
    pt.u_p = u_p_grid[k];
    try {
      ShapeLockTimings lean = timings;
      lean.record_stride = 1 << 30;
      const ShapeLockResult r = shape_locking_scenario(bend_target, pt.u_p, lean, robot, fric);
      pt.tip_displacement = r.tip_displacement;
      pt.residual_angle = r.residual_angle;
      pt.manifold = r.manifold;
      pt.converged = r.converged;
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
  });
  return out;
}

}  // namespace ljcr
