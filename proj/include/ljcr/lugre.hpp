#pragma once

// Pressure-modulated LuGre friction acting on each joint. The normal load of
// the jammed layers is proportional to the vacuum pressure u_P, so every
// friction coefficient here is a torque per pascal.

#include "ljcr/types.hpp"

#include <cmath>
#include <limits>

namespace ljcr {

template <typename Scalar = double>
struct LuGreParams {
  Scalar mu_s = 5e-5;     // stiction level, N.m/Pa
  Scalar mu_c = 3e-5;     // Coulomb level, N.m/Pa
  Scalar v_s = 0.01;      // Stribeck velocity, rad/s
  Scalar sigma0 = 5e-4;   // bristle stiffness, N.m/(rad.Pa)
  Scalar sigma1 = 1.2e-5; // bristle damping, N.m.s/(rad.Pa)
  Scalar sigma2 = 3e-6;   // viscous, N.m.s/(rad.Pa)
  Scalar sigma3 = 1.0;    // Stribeck exponent

  void validate() const {
    detail::require(mu_c > 0, "friction: mu_c must be > 0");
    detail::require(mu_s >= mu_c, "friction: mu_s must be >= mu_c");
    detail::require(v_s > 0, "friction: v_s must be > 0");
    detail::require(sigma0 > 0, "friction: sigma0 must be > 0");
    detail::require(sigma1 >= 0, "friction: sigma1 must be >= 0");
    detail::require(sigma2 >= 0, "friction: sigma2 must be >= 0");
    detail::require(sigma3 > 0, "friction: sigma3 must be > 0");
  }

  /// Componentwise bound on |z_i| that is forward invariant.
  Scalar bristle_bound() const { return mu_s / sigma0; }
};

/// Stribeck level rho(v) = mu_c + (mu_s - mu_c) exp(-|v / v_s|^sigma3).
template <typename Scalar>
Scalar stribeck(Scalar v, const LuGreParams<Scalar>& params) {
  using std::abs;
  using std::exp;
  using std::pow;
  return params.mu_c + (params.mu_s - params.mu_c) * exp(-pow(abs(v / params.v_s), params.sigma3));
}

template <typename Derived, typename Scalar>
Vector<Scalar> stribeck(const Eigen::MatrixBase<Derived>& v, const LuGreParams<Scalar>& params) {
  return v.unaryExpr([&](Scalar vi) { return stribeck(vi, params); });
}

/// Bristle dynamics z_dot_i = v_i - sigma0 |v_i| z_i / rho(v_i). Pressure
/// cancels out of this form, so it is valid for u_P = 0 as well.
template <typename DerivedZ, typename DerivedV, typename Scalar>
Vector<Scalar> bristle_rate(const Eigen::MatrixBase<DerivedZ>& z, const Eigen::MatrixBase<DerivedV>& v,
                            const LuGreParams<Scalar>& params) {
  using std::abs;
  Vector<Scalar> zdot(z.size());
  for (Index i = 0; i < z.size(); ++i)
    zdot(i) = v(i) - params.sigma0 * abs(v(i)) * z(i) / stribeck(Scalar(v(i)), params);
  return zdot;
}

/// tau_f = u_P (sigma0 z + sigma1 z_dot + sigma2 v).
template <typename DerivedZ, typename DerivedZd, typename DerivedV, typename Scalar>
Vector<Scalar> friction_torque(const Eigen::MatrixBase<DerivedZ>& z,
                               const Eigen::MatrixBase<DerivedZd>& z_dot,
                               const Eigen::MatrixBase<DerivedV>& v, Scalar u_p,
                               const LuGreParams<Scalar>& params) {
  detail::require(u_p >= 0, "friction: pressure must be >= 0");
  return u_p * (params.sigma0 * z + params.sigma1 * z_dot + params.sigma2 * v);
}

/// Output map of the port-Hamiltonian LuGre block,
///   tau_f = [N(v) + P(v)]^T grad H_z(z) + S v,
/// with R_z = diag(|v_i| / (u_P rho(v_i))), N = I - 1/2 sigma1 u_P R_z,
/// P = -1/2 sigma1 u_P R_z and S = (sigma1 + sigma2) u_P I.
/// Needs u_P > 0; use friction_torque for the unjammed case.
template <typename DerivedZ, typename DerivedV, typename Scalar>
Vector<Scalar> friction_torque_ph(const Eigen::MatrixBase<DerivedZ>& z,
                                  const Eigen::MatrixBase<DerivedV>& v, Scalar u_p,
                                  const LuGreParams<Scalar>& params) {
  using std::abs;
  detail::require(u_p > 0, "friction_torque_ph: pressure must be > 0");
  const Index n = z.size();
  Vector<Scalar> beta(n);
  for (Index i = 0; i < n; ++i) beta(i) = abs(v(i)) / (u_p * stribeck(Scalar(v(i)), params));
  const Vector<Scalar> grad_hz = params.sigma0 * u_p * z;
  const Vector<Scalar> n_plus_p = Vector<Scalar>::Ones(n) - params.sigma1 * u_p * beta;
  return n_plus_p.asDiagonal() * grad_hz + (params.sigma1 + params.sigma2) * u_p * v;
}

/// Constant-velocity limit [diag(rho(v_i)) sign(v) + sigma2 v] u_P, with sign(0) = 0.
template <typename Derived, typename Scalar>
Vector<Scalar> steady_state_friction(const Eigen::MatrixBase<Derived>& v, Scalar u_p,
                                     const LuGreParams<Scalar>& params) {
  detail::require(u_p >= 0, "friction: pressure must be >= 0");
  Vector<Scalar> tau(v.size());
  for (Index i = 0; i < v.size(); ++i)
    tau(i) = (stribeck(Scalar(v(i)), params) * detail::sign(Scalar(v(i))) + params.sigma2 * v(i)) * u_p;
  return tau;
}

/// Per-joint condition for the dissipation matrix to be positive semidefinite:
///   sigma1 + sigma2 - sigma1^2 |v_i| / (4 rho(v_i)) >= 0.
template <typename Scalar>
bool damping_condition(Scalar v_i, const LuGreParams<Scalar>& params) {
  using std::abs;
  return params.sigma1 + params.sigma2 -
             params.sigma1 * params.sigma1 * abs(v_i) / (Scalar(4) * stribeck(v_i, params)) >=
         Scalar(0);
}

template <typename Derived, typename Scalar>
Eigen::Array<bool, Eigen::Dynamic, 1> damping_condition(const Eigen::MatrixBase<Derived>& v,
                                                        const LuGreParams<Scalar>& params) {
  Eigen::Array<bool, Eigen::Dynamic, 1> ok(v.size());
  for (Index i = 0; i < v.size(); ++i) ok(i) = damping_condition(Scalar(v(i)), params);
  return ok;
}

template <typename Derived, typename Scalar>
bool damping_condition_all(const Eigen::MatrixBase<Derived>& v, const LuGreParams<Scalar>& params) {
  return damping_condition(v, params).all();
}

/// Largest |v| satisfying the damping condition when rho is frozen at `rho`.
template <typename Scalar>
Scalar damping_velocity_limit(Scalar rho, const LuGreParams<Scalar>& params) {
  if (params.sigma1 == Scalar(0)) return std::numeric_limits<Scalar>::infinity();
  return Scalar(4) * rho * (params.sigma1 + params.sigma2) / (params.sigma1 * params.sigma1);
}

/// H_z = 1/2 sigma0 u_P |z|^2
template <typename Derived, typename Scalar>
Scalar bristle_energy(const Eigen::MatrixBase<Derived>& z, Scalar u_p, const LuGreParams<Scalar>& params) {
  detail::require(u_p >= 0, "friction: pressure must be >= 0");
  return Scalar(0.5) * params.sigma0 * u_p * z.squaredNorm();
}

}  // namespace ljcr
