#pragma once

// Shape locking and pressure-dependent stiffness of the jammed chain.

#include "ljcr/simulate.hpp"

#include <array>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ljcr {

// ---------------------------------------------------------------------------
// Kinematics

template <typename Derived, typename Scalar>
Eigen::Matrix<Scalar, 2, 1> forward_kinematics(const Eigen::MatrixBase<Derived>& q,
                                               const RobotParams<Scalar>& robot) {
  using std::cos;
  using std::sin;
  Eigen::Matrix<Scalar, 2, 1> tip = Eigen::Matrix<Scalar, 2, 1>::Zero();
  Scalar theta(0);
  for (Index k = 0; k < q.size(); ++k) {
    theta += q(k);
    tip(0) += robot.link_length * sin(theta);
    tip(1) += robot.link_length * cos(theta);
  }
  return tip;
}

/// d tip / d q, 2 x n.
template <typename Derived, typename Scalar>
Matrix<Scalar> tip_jacobian(const Eigen::MatrixBase<Derived>& q, const RobotParams<Scalar>& robot) {
  using std::cos;
  using std::sin;
  const Index n = q.size();
  const Vector<Scalar> theta = detail::cumulative(q);
  Matrix<Scalar> j(2, n);
  Scalar sx(0), sy(0);
  for (Index i = n - 1; i >= 0; --i) {
    sx += robot.link_length * cos(theta(i));
    sy -= robot.link_length * sin(theta(i));
    j(0, i) = sx;
    j(1, i) = sy;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Equilibria manifold

/// Bristle deflection that holds q_a at rest with zero tension:
/// z_a = -grad U(q_a) / (sigma0 u_P).
template <typename Derived, typename Scalar>
Vector<Scalar> locked_bristle(const Eigen::MatrixBase<Derived>& q_a, Scalar u_p,
                              const RobotParams<Scalar>& robot, const LuGreParams<Scalar>& fric) {
  detail::require(u_p > 0, "locked_bristle: pressure must be > 0");
  return -grad_potential(q_a, robot) / (fric.sigma0 * u_p);
}

template <typename Scalar = double>
struct ManifoldResidual {
  Scalar momentum;  // |p|
  Scalar gradient;  // |grad U(q) + sigma0 u_P z|
};

template <typename Scalar>
ManifoldResidual<Scalar> manifold_residual(const FullState<Scalar>& chi, Scalar u_p,
                                           const RobotParams<Scalar>& robot,
                                           const LuGreParams<Scalar>& fric) {
  detail::require(u_p > 0, "manifold_residual: pressure must be > 0");
  return {chi.p.norm(), (grad_potential(chi.q, robot) + fric.sigma0 * u_p * chi.z).norm()};
}

// ---------------------------------------------------------------------------
// Stiffness

/// K = alpha1 1 1^T + (alpha2 + sigma0 u_P) I.
template <typename Scalar>
Matrix<Scalar> analytic_stiffness(Scalar u_p, const RobotParams<Scalar>& robot,
                                  const LuGreParams<Scalar>& fric) {
  const Index n = robot.links;
  Matrix<Scalar> k = Matrix<Scalar>::Constant(n, n, robot.alpha1);
  k.diagonal().array() += robot.alpha2 + fric.sigma0 * u_p;
  return k;
}

/// Central-difference Hessian of U at the straight configuration, symmetrized,
/// plus the bristle stiffness sigma0 u_P I.
MatrixXd numeric_stiffness_hessian(double u_p, const Params& robot, const Friction& fric,
                                   double step = 1e-5);

/// State matrix of the linearization about the origin on (dq, dq_dot) with dz = dq:
///   M* dq'' + (sigma1 + sigma2) u_P dq' + (hess U(0) + sigma0 u_P I) dq = tau_ext.
MatrixXd linearized_dynamics(double u_p, const Params& robot, const Friction& fric);
Eigen::VectorXcd linearized_eigenvalues(double u_p, const Params& robot, const Friction& fric);

struct ProbeOptions {
  double dt = 1e-4;
  double ramp = 0.5;          // s, load ramp
  double max_time = 30.0;     // s
  double velocity_tol = 1e-7; // rad/s
  double dwell = 0.2;         // s
};

struct ProbeResult {
  MatrixXd stiffness;      // K_est with tau = K_est dq
  MatrixXd displacements;  // column j = settled dq under torque along e_j
  double max_displacement = 0.0;
  double max_balance_residual = 0.0;  // |tau - grad U(q) - sigma0 u_P z| at rest
};

/// Quasi-static probe: ramps a constant torque along each joint axis, lets the
/// damped, locked chain settle and inverts the collected displacements.
ProbeResult probe_stiffness(double u_p, double torque, const Params& robot, const Friction& fric,
                            const ProbeOptions& options = {});

struct TransverseProbe {
  double stiffness = 0.0;          // N/m
  double tip_displacement = 0.0;   // m
  VectorXd dq;
  bool dynamic = true;             // false when solved statically (u_P = 0)
};

/// Tip stiffness along the transverse (x) direction of the straight chain.
TransverseProbe transverse_stiffness(double u_p, double tip_force, const Params& robot,
                                     const Friction& fric, const ProbeOptions& options = {});

/// 1 / (J_x K^{-1} J_x^T) with the analytic K.
double analytic_transverse_stiffness(double u_p, const Params& robot, const Friction& fric);

// ---------------------------------------------------------------------------
// Shape locking

struct BendSolution {
  VectorXd q;        // static configuration with q_sum = target
  VectorXd tension;  // non-negative tendon tensions that hold it
};

/// Static tendon tension that holds a bend of total angle `target`.
/// Throws NonConvergenceError if no single tendon can produce it.
BendSolution bend_equilibrium(double target, const Params& robot);

struct ShapeLockTimings {
  double dt = 1e-4;
  double settle = 0.2;        // phase 1
  double bend_ramp = 2.0;     // phase 2
  double bend_hold = 1.0;
  double lock_max = 3.0;      // phase 3 budget
  double release_ramp = 2.0;  // phase 4
  double release_max = 4.0;   // phase 4 budget after the ramp
  double velocity_tol = 1e-6;
  double dwell = 0.5;
  double manifold_tol = 1e-6;
  double bend_tolerance = 0.05;  // rad on q_sum after the bend hold
  bool reset_bristle_on_lock = true;
  int record_stride = 10;
};

struct ShapeLockResult {
  std::array<Trajectory, 4> phases;
  double u_p = 0.0;
  VectorXd tension;    // held during phases 2 and 3
  VectorXd q_locked;   // static bend target (reference q_a)
  VectorXd q_release;  // configuration when the release starts
  VectorXd q_end;
  double residual_angle = 0.0;     // |q_end - q_release|, rad
  double tip_displacement = 0.0;   // |tip(q_end) - tip(q_release)|, m
  double bend_at_release = 0.0;    // q_sum, rad
  ManifoldResidual<double> manifold{0.0, 0.0};
  bool converged = false;
};

/// Four phases: rest, tendon bend, vacuum on with tension held, tension released.
ShapeLockResult shape_locking_scenario(double bend_target, double u_p_lock,
                                       const ShapeLockTimings& timings, const Params& robot,
                                       const Friction& fric);

struct AttractionOptions {
  double max_radius = 0.5;
  double resolution = 1e-3;
  double drift_tolerance = 0.05;  // rad, |q_end - q_a| infinity norm
  double max_time = 5.0;
  double dt = 1e-4;
  unsigned seed = 7;
};

/// Bisection estimate of the radius of perturbations of (q_a, 0, z_a) that
/// still settle onto the manifold near q_a.
double attraction_radius(const VectorXd& q_a, double u_p, const Params& robot, const Friction& fric,
                         const AttractionOptions& options = {});

// ---------------------------------------------------------------------------
// Sweeps

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::optional<double> r2;  // empty for a degenerate fit
  bool degenerate = false;
};

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

struct StiffnessPoint {
  double u_p = 0.0;
  MatrixXd analytic;
  MatrixXd hessian;
  std::vector<double> kt_probe;  // one per repeat
  double kt_analytic = 0.0;
  std::string error;
};

struct StiffnessReport {
  std::vector<StiffnessPoint> points;
  LinearFit fit;  // K_T (probe) against u_P over every repeat
};

/// Worker count from LJCR_WORKERS, else the hardware concurrency.
unsigned worker_count();

/// Runs job(k) for k in [0, count) on `workers` threads (0 = worker_count()).
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& job);

StiffnessReport stiffness_sweep(const std::vector<double>& u_p_grid, double tip_force, int repeats,
                                const Params& robot, const Friction& fric,
                                const ProbeOptions& options = {}, unsigned workers = 0);

struct ShapeLockPoint {
  double u_p = 0.0;
  double tip_displacement = 0.0;
  double residual_angle = 0.0;
  ManifoldResidual<double> manifold{0.0, 0.0};
  bool converged = false;
  std::string error;
};

std::vector<ShapeLockPoint> shape_lock_sweep(const std::vector<double>& u_p_grid, double bend_target,
                                             const ShapeLockTimings& timings, const Params& robot,
                                             const Friction& fric, unsigned workers = 0);

}  // namespace ljcr
