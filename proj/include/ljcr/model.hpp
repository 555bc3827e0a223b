#pragma once

// Jamming-free robot subsystem: a planar serial chain of n uniform rods with
// relative joint angles q, generalized momenta p, tendon inputs u and the
// lumped gravity/elastic potential
//
//   U(q) = alpha1 [1 - cos(q_sum)] + 1/2 alpha2 |q|^2 + u0.
//
// Absolute link angle theta_k = q_1 + ... + q_k is measured from the +y axis,
// so the straight configuration q = 0 points the tip at (0, n l).

#include "ljcr/types.hpp"

#include <cmath>
#include <optional>

namespace ljcr {

template <typename Scalar = double>
struct RobotParams {
  int links = 3;
  int tendons = 2;
  Scalar link_length = 0.1;  // m
  Scalar link_mass = 0.2;    // kg
  Scalar alpha1 = 0.5;       // J
  Scalar alpha2 = 1.0;       // J/rad^2
  Scalar u0 = 0.0;           // J
  Scalar moment_arm = 0.02;  // m
  // Replaces the default antagonistic routing when set; must be links x tendons.
  std::optional<Matrix<Scalar>> routing;

  void validate() const {
    detail::require(links >= 1, "robot: links must be >= 1");
    detail::require(tendons >= 1, "robot: tendons must be >= 1");
    detail::require(link_length > 0, "robot: link_length must be > 0");
    detail::require(link_mass > 0, "robot: link_mass must be > 0");
    detail::require(alpha1 >= 0, "robot: alpha1 must be >= 0");
    detail::require(alpha2 > 0, "robot: alpha2 must be > 0");
    if (routing) {
      detail::require(routing->rows() == links && routing->cols() == tendons,
                      "robot: routing matrix must be links x tendons");
    }
  }
};

template <typename Scalar = double>
struct RobotState {
  Vector<Scalar> q;
  Vector<Scalar> p;
};

namespace detail {

// Coupling coefficients C_ab = m sum_k w_ka w_kb of the rod centre velocities,
// where w_ka = l for a < k and l/2 for a = k.
template <typename Scalar>
Matrix<Scalar> rod_coupling(const RobotParams<Scalar>& params) {
  const int n = params.links;
  const Scalar ml2 = params.link_mass * params.link_length * params.link_length;
  Matrix<Scalar> c(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const int hi = std::max(a, b);
      const Scalar first = (a == b) ? Scalar(0.25) : Scalar(0.5);
      c(a, b) = ml2 * (first + Scalar(n - 1 - hi));
    }
  }
  return c;
}

template <typename Derived>
auto cumulative(const Eigen::MatrixBase<Derived>& q) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> out(q.size());
  Scalar acc(0);
  for (Index i = 0; i < q.size(); ++i) out(i) = acc += q(i);
  return out;
}

}  // namespace detail

/// Inertia matrix M(q) = L^T B(theta) L of the rod chain, where L maps relative
/// to absolute angles and B is the absolute-angle kinetic metric.
template <typename Derived, typename Scalar>
Matrix<Scalar> inertia_matrix(const Eigen::MatrixBase<Derived>& q,
                              const RobotParams<Scalar>& params) {
  using std::cos;
  const int n = params.links;
  const Vector<Scalar> theta = detail::cumulative(q);
  const Matrix<Scalar> c = detail::rod_coupling(params);
  const Scalar rod_inertia =
      params.link_mass * params.link_length * params.link_length / Scalar(12);

  Matrix<Scalar> b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = c(i, j) * cos(theta(i) - theta(j));
  b.diagonal().array() += rod_inertia;

  // M = L^T B L with L lower-triangular ones: M_ij = sum_{a>=i, b>=j} B_ab.
  for (int a = n - 2; a >= 0; --a) b.row(a) += b.row(a + 1);
  for (int j = n - 2; j >= 0; --j) b.col(j) += b.col(j + 1);
  return b;
}

/// Returns k with k_i = v^T (dM/dq_i) v, evaluated analytically.
template <typename DerivedQ, typename DerivedV, typename Scalar>
Vector<Scalar> inertia_quadratic_derivative(const Eigen::MatrixBase<DerivedQ>& q,
                                            const Eigen::MatrixBase<DerivedV>& v,
                                            const RobotParams<Scalar>& params) {
  using std::sin;
  const int n = params.links;
  const Vector<Scalar> theta = detail::cumulative(q);
  const Vector<Scalar> omega = detail::cumulative(v);
  const Matrix<Scalar> c = detail::rod_coupling(params);

  // g_c = omega^T (dB/dtheta_c) omega
  Vector<Scalar> g(n);
  for (int a = 0; a < n; ++a) {
    Scalar acc(0);
    for (int b = 0; b < n; ++b) acc += c(a, b) * sin(theta(a) - theta(b)) * omega(b);
    g(a) = Scalar(-2) * omega(a) * acc;
  }
  // dtheta_c/dq_i = [c >= i]
  Vector<Scalar> k(n);
  Scalar acc(0);
  for (int i = n - 1; i >= 0; --i) k(i) = acc += g(i);
  return k;
}

template <typename Derived, typename Scalar>
Scalar potential_energy(const Eigen::MatrixBase<Derived>& q, const RobotParams<Scalar>& params) {
  using std::cos;
  return params.alpha1 * (Scalar(1) - cos(q.sum())) + Scalar(0.5) * params.alpha2 * q.squaredNorm() +
         params.u0;
}

template <typename Derived, typename Scalar>
Vector<Scalar> grad_potential(const Eigen::MatrixBase<Derived>& q, const RobotParams<Scalar>& params) {
  using std::sin;
  Vector<Scalar> g = params.alpha2 * q;
  g.array() += params.alpha1 * sin(q.sum());
  return g;
}

template <typename Derived, typename Scalar>
Matrix<Scalar> hessian_potential(const Eigen::MatrixBase<Derived>& q,
                                 const RobotParams<Scalar>& params) {
  using std::cos;
  const Index n = q.size();
  Matrix<Scalar> h = Matrix<Scalar>::Constant(n, n, params.alpha1 * cos(q.sum()));
  h.diagonal().array() += params.alpha2;
  return h;
}

/// v = M(q)^{-1} p via Cholesky; throws NumericError if M is not SPD.
template <typename DerivedQ, typename DerivedP, typename Scalar>
Vector<Scalar> velocity(const Eigen::MatrixBase<DerivedQ>& q, const Eigen::MatrixBase<DerivedP>& p,
                        const RobotParams<Scalar>& params) {
  const Eigen::LLT<Matrix<Scalar>> llt(inertia_matrix(q, params));
  if (llt.info() != Eigen::Success)
    throw NumericError("inertia matrix is not positive definite");
  return llt.solve(p);
}

template <typename Scalar>
Vector<Scalar> velocity(const RobotState<Scalar>& state, const RobotParams<Scalar>& params) {
  return velocity(state.q, state.p, params);
}

template <typename Scalar>
Scalar hamiltonian(const RobotState<Scalar>& state, const RobotParams<Scalar>& params) {
  const Vector<Scalar> v = velocity(state, params);
  return Scalar(0.5) * state.p.dot(v) + potential_energy(state.q, params);
}

template <typename Scalar>
struct HamiltonianGradient {
  Vector<Scalar> dq;
  Vector<Scalar> dp;
};

template <typename Scalar>
HamiltonianGradient<Scalar> grad_hamiltonian(const RobotState<Scalar>& state,
                                             const RobotParams<Scalar>& params) {
  HamiltonianGradient<Scalar> g;
  g.dp = velocity(state, params);
  // d/dq (1/2 p^T M^{-1} p) = -1/2 v^T (dM/dq) v
  g.dq = grad_potential(state.q, params) -
         Scalar(0.5) * inertia_quadratic_derivative(state.q, g.dp, params);
  return g;
}

/// Tendon routing G(q). The default is a constant alternating routing
/// r [1, -1, 1, ...], i.e. r [1_n, -1_n] for the usual antagonistic pair.
template <typename Derived, typename Scalar>
Matrix<Scalar> input_matrix(const Eigen::MatrixBase<Derived>& /*q*/,
                            const RobotParams<Scalar>& params) {
  if (params.routing) return *params.routing;
  Matrix<Scalar> g(params.links, params.tendons);
  for (int j = 0; j < params.tendons; ++j)
    g.col(j).setConstant((j % 2 == 0 ? Scalar(1) : Scalar(-1)) * params.moment_arm);
  return g;
}

/// Right-hand side of the frictionless, undamped chain (q_dot, p_dot).
template <typename Scalar>
RobotState<Scalar> jamming_free_field(const RobotState<Scalar>& state, const Vector<Scalar>& u,
                                      const RobotParams<Scalar>& params) {
  const auto g = grad_hamiltonian(state, params);
  return {g.dp, -g.dq + input_matrix(state.q, params) * u};
}

}  // namespace ljcr
