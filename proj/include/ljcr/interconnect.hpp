#pragma once

// Negative feedback interconnection of the chain and the LuGre block, written
// on the 3n-dimensional state chi = (q, p, z).

#include "ljcr/lugre.hpp"
#include "ljcr/model.hpp"

namespace ljcr {

template <typename Scalar = double>
struct FullState {
  Vector<Scalar> q;
  Vector<Scalar> p;
  Vector<Scalar> z;

  static FullState zero(Index n) {
    return {Vector<Scalar>::Zero(n), Vector<Scalar>::Zero(n), Vector<Scalar>::Zero(n)};
  }

  static FullState unstack(const Vector<Scalar>& chi) {
    const Index n = chi.size() / 3;
    return {chi.head(n), chi.segment(n, n), chi.tail(n)};
  }

  Index links() const { return q.size(); }

  Vector<Scalar> stacked() const {
    Vector<Scalar> chi(3 * q.size());
    chi << q, p, z;
    return chi;
  }

  RobotState<Scalar> robot() const { return {q, p}; }

  bool finite() const { return q.allFinite() && p.allFinite() && z.allFinite(); }
};

/// Inputs held during one vector-field evaluation.
template <typename Scalar = double>
struct InputSample {
  Vector<Scalar> u;        // tendon tensions, N
  Scalar u_p = 0;          // vacuum pressure, Pa
  Vector<Scalar> tau_ext;  // external joint torque, N.m
};

template <typename Scalar>
void check_dimensions(const FullState<Scalar>& chi, const InputSample<Scalar>& in,
                      const RobotParams<Scalar>& robot) {
  const Index n = robot.links;
  detail::require(chi.q.size() == n && chi.p.size() == n && chi.z.size() == n,
                  "state dimension does not match robot links");
  detail::require(in.u.size() == robot.tendons, "tension dimension does not match robot tendons");
  detail::require(in.tau_ext.size() == n, "external torque dimension does not match robot links");
  detail::require(in.u_p >= 0, "pressure must be >= 0");
  detail::require((in.u.array() >= 0).all(), "tensions must be >= 0");
}

/// Joint-side friction quantities at a state, shared by the field and the records.
template <typename Scalar>
struct FrictionSample {
  Vector<Scalar> v;
  Vector<Scalar> z_dot;
  Vector<Scalar> tau_f;
};

template <typename Scalar>
FrictionSample<Scalar> friction_sample(const FullState<Scalar>& chi, const Vector<Scalar>& v, Scalar u_p,
                                       const LuGreParams<Scalar>& fric) {
  FrictionSample<Scalar> s;
  s.v = v;
  s.z_dot = bristle_rate(chi.z, v, fric);
  s.tau_f = friction_torque(chi.z, s.z_dot, v, u_p, fric);
  return s;
}

/// chi_dot in the composed form
///   q_dot = grad_p H
///   p_dot = -grad_q H + G u + tau_ext - tau_f(z, z_dot, v, u_P)
///   z_dot = v - sigma0 diag(|v_i| / rho(v_i)) z
template <typename Scalar>
FullState<Scalar> vector_field(const FullState<Scalar>& chi, const InputSample<Scalar>& in,
                               const RobotParams<Scalar>& robot, const LuGreParams<Scalar>& fric) {
  check_dimensions(chi, in, robot);
  const auto grad = grad_hamiltonian(chi.robot(), robot);
  const auto fs = friction_sample(chi, grad.dp, in.u_p, fric);
  FullState<Scalar> d;
  d.q = grad.dp;
  d.p = -grad.dq + input_matrix(chi.q, robot) * in.u + in.tau_ext - fs.tau_f;
  d.z = fs.z_dot;
  return d;
}

/// Total energy H(q, p) + 1/2 sigma0 u_P |z|^2.
template <typename Scalar>
Scalar total_hamiltonian(const FullState<Scalar>& chi, Scalar u_p, const RobotParams<Scalar>& robot,
                         const LuGreParams<Scalar>& fric) {
  return hamiltonian(chi.robot(), robot) + bristle_energy(chi.z, u_p, fric);
}

template <typename Scalar>
FullState<Scalar> grad_total_hamiltonian(const FullState<Scalar>& chi, Scalar u_p,
                                         const RobotParams<Scalar>& robot,
                                         const LuGreParams<Scalar>& fric) {
  const auto g = grad_hamiltonian(chi.robot(), robot);
  return {g.dq, g.dp, fric.sigma0 * u_p * chi.z};
}

/// Rate of energy dissipated, grad(H)^T R grad(H), from the state alone. It
/// stays finite (and zero) at u_P = 0 where R itself is undefined.
template <typename Scalar>
Scalar dissipation_power(const FullState<Scalar>& chi, const Vector<Scalar>& v, Scalar u_p,
                         const LuGreParams<Scalar>& fric) {
  using std::abs;
  Scalar acc(0);
  for (Index i = 0; i < v.size(); ++i) {
    const Scalar rho = stribeck(Scalar(v(i)), fric);
    const Scalar vi = v(i);
    const Scalar zi = chi.z(i);
    acc += (fric.sigma1 + fric.sigma2) * vi * vi -
           fric.sigma1 * fric.sigma0 * abs(vi) * vi * zi / rho +
           fric.sigma0 * fric.sigma0 * abs(vi) * zi * zi / rho;
  }
  return u_p * acc;
}

/// Literal port-Hamiltonian structure chi_dot = [J - R] grad H + G u + G0 tau_ext.
template <typename Scalar>
struct PortHamiltonianForm {
  Matrix<Scalar> interconnection;  // J, skew-symmetric, 3n x 3n
  Matrix<Scalar> dissipation;      // R, symmetric, 3n x 3n
  Matrix<Scalar> input;            // [G_r; 0], 3n x m
  Matrix<Scalar> disturbance;      // G0 = col(0, I, 0), 3n x n
  Vector<Scalar> gradient;         // grad H, length 3n

  Vector<Scalar> field(const Vector<Scalar>& u, const Vector<Scalar>& tau_ext) const {
    return (interconnection - dissipation) * gradient + input * u + disturbance * tau_ext;
  }
};

/// Assembles J, R and grad H blockwise; requires u_P > 0 because R_z carries
/// u_P in its denominator.
template <typename Scalar>
PortHamiltonianForm<Scalar> port_hamiltonian_form(const FullState<Scalar>& chi, Scalar u_p,
                                                  const RobotParams<Scalar>& robot,
                                                  const LuGreParams<Scalar>& fric) {
  using std::abs;
  detail::require(u_p > 0, "port_hamiltonian_form: pressure must be > 0");
  const Index n = robot.links;
  const Index m = robot.tendons;
  const auto grad = grad_total_hamiltonian(chi, u_p, robot, fric);
  const Vector<Scalar>& v = grad.p;

  Vector<Scalar> beta(n);
  for (Index i = 0; i < n; ++i) beta(i) = abs(v(i)) / (u_p * stribeck(Scalar(v(i)), fric));
  const Matrix<Scalar> rz = beta.asDiagonal();
  const Matrix<Scalar> eye = Matrix<Scalar>::Identity(n, n);
  const Matrix<Scalar> n_mat = eye - Scalar(0.5) * fric.sigma1 * u_p * rz;
  const Matrix<Scalar> p_mat = Scalar(-0.5) * fric.sigma1 * u_p * rz;
  const Matrix<Scalar> s_mat = (fric.sigma1 + fric.sigma2) * u_p * eye;

  PortHamiltonianForm<Scalar> f;
  f.interconnection = Matrix<Scalar>::Zero(3 * n, 3 * n);
  f.interconnection.block(0, n, n, n) = eye;
  f.interconnection.block(n, 0, n, n) = -eye;
  f.interconnection.block(n, 2 * n, n, n) = -n_mat.transpose();
  f.interconnection.block(2 * n, n, n, n) = n_mat;

  f.dissipation = Matrix<Scalar>::Zero(3 * n, 3 * n);
  f.dissipation.block(n, n, n, n) = s_mat;
  f.dissipation.block(n, 2 * n, n, n) = p_mat.transpose();
  f.dissipation.block(2 * n, n, n, n) = p_mat.transpose();
  f.dissipation.block(2 * n, 2 * n, n, n) = rz;

  f.input = Matrix<Scalar>::Zero(3 * n, m);
  f.input.block(n, 0, n, m) = input_matrix(chi.q, robot);
  f.disturbance = Matrix<Scalar>::Zero(3 * n, n);
  f.disturbance.block(n, 0, n, n) = eye;

  f.gradient = grad.stacked();
  return f;
}

/// One classical RK4 step for any field f(t, x) on Eigen vectors.
template <typename Field, typename Scalar>
Vector<Scalar> rk4_step(const Field& f, Scalar t, const Vector<Scalar>& x, Scalar dt) {
  const Vector<Scalar> k1 = f(t, x);
  const Vector<Scalar> k2 = f(t + dt / 2, (x + dt / 2 * k1).eval());
  const Vector<Scalar> k3 = f(t + dt / 2, (x + dt / 2 * k2).eval());
  const Vector<Scalar> k4 = f(t + dt, (x + dt * k3).eval());
  return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
}

}  // namespace ljcr
