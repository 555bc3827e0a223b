#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace ljcr;
using ljcr::test::rel_err;

namespace {

// Kinetic metric assembled from the rod centre Jacobians and rotational
// inertias, without the relative/absolute angle factorization used by the
// library.
Eigen::MatrixXd jacobian_inertia(const Eigen::VectorXd& q, const Params& p) {
  const Index n = q.size();
  Eigen::VectorXd theta(n);
  double acc = 0.0;
  for (Index k = 0; k < n; ++k) theta(k) = acc += q(k);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Index k = 0; k < n; ++k) {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2, n);
    for (Index i = 0; i <= k; ++i)
      for (Index a = i; a <= k; ++a) {
        const double arm = a < k ? p.link_length : 0.5 * p.link_length;
        j(0, i) += arm * std::cos(theta(a));
        j(1, i) -= arm * std::sin(theta(a));
      }
    Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(n);
    w.head(k + 1).setOnes();
    m += p.link_mass * j.transpose() * j +
         p.link_mass * p.link_length * p.link_length / 12.0 * w.transpose() * w;
  }
  return m;
}

Params chain(int n) {
  Params p;
  p.links = n;
  return p;
}

}  // namespace

TEST_CASE("single rod inertia about its end") {
  const Params p = chain(1);
  const auto m = inertia_matrix(Eigen::VectorXd::Zero(1), p);
  CHECK(m(0, 0) == doctest::Approx(p.link_mass * p.link_length * p.link_length / 3.0).epsilon(1e-14));
}

TEST_CASE("two-link inertia against kinetic-energy integration") {
  const Params p = chain(2);
  Eigen::Matrix2d straight, bent;
  straight << 0.00533333333333333, 0.00166666666666667, 0.00166666666666667, 0.00066666666666667;
  bent << 0.00524400631158455, 0.00162200315579227, 0.00162200315579227, 0.00066666666666667;
  CHECK(rel_err(inertia_matrix(Eigen::Vector2d(0, 0), p), straight) < 1e-13);
  const Eigen::MatrixXd m_bent = inertia_matrix(Eigen::Vector2d(0.3, -0.3), p);
  CHECK(rel_err(m_bent, bent) < 1e-13);
  // only the cos(q2) coupling changes
  CHECK(m_bent(1, 1) == doctest::Approx(straight(1, 1)).epsilon(1e-15));
  CHECK(m_bent(0, 1) - straight(0, 1) == doctest::Approx(0.5 * (m_bent(0, 0) - straight(0, 0))));
}

TEST_CASE("three-link inertia against kinetic-energy integration") {
  Eigen::Matrix3d expected;
  expected << 0.0169667233168375, 0.00858153717903657, 0.00238684534307676,  //
      0.00858153717903657, 0.00486301770790231, 0.00143150885395116,        //
      0.00238684534307676, 0.00143150885395116, 0.00066666666666667;
  CHECK(rel_err(inertia_matrix(Eigen::Vector3d(0.2, -0.4, 0.7), chain(3)), expected) < 1e-13);
}

TEST_CASE("inertia matches the link-Jacobian assembly and is SPD") {
  std::mt19937 rng(11);
  for (int n : {1, 2, 3, 5}) {
    const Params p = chain(n);
    double lo = 1e300, hi = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::VectorXd q = test::uniform(rng, n, -3.1, 3.1);
      const Eigen::MatrixXd m = inertia_matrix(q, p);
      CHECK(rel_err(m, jacobian_inertia(q, p)) < 1e-13);
      CHECK((m - m.transpose()).norm() <= 1e-15 * m.norm());
      const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues();
      lo = std::min(lo, eig.minCoeff());
      hi = std::max(hi, eig.maxCoeff());
    }
    CHECK(lo > 0.0);
    CHECK(hi / lo < 1e6);
  }
}

TEST_CASE("potential energy") {
  Params p = chain(3);
  p.alpha1 = 2.0;
  p.alpha2 = 5.0;
  p.u0 = 1.0;
  CHECK(potential_energy(Eigen::Vector3d::Zero(), p) == 1.0);
  CHECK(potential_energy(Eigen::Vector3d(0.1, 0.1, 0.1), p) == doctest::Approx(1.164327021748788).epsilon(1e-14));
  const Eigen::Vector3d half_turn(1.0, 2.0, 3.14159265358979323846 - 3.0);
  CHECK(potential_energy(half_turn, p) ==
        doctest::Approx(2 * p.alpha1 + 0.5 * p.alpha2 * half_turn.squaredNorm() + p.u0).epsilon(1e-14));

  std::mt19937 rng(3);
  for (int k = 0; k < 1000; ++k)
    CHECK(potential_energy(test::uniform(rng, 3, -3.0, 3.0), p) - p.u0 >= 0.0);
}

TEST_CASE("potential gradient and Hessian") {
  Params p2 = chain(2);
  p2.alpha1 = 1.0;
  p2.alpha2 = 0.0;  // the gradient itself does not validate
  const auto g = grad_potential(Eigen::Vector2d(3.14159265358979323846 / 2, 0), p2);
  CHECK(g(0) == doctest::Approx(1.0));
  CHECK(g(1) == doctest::Approx(1.0));

  const Params p = chain(3);
  CHECK(grad_potential(Eigen::Vector3d::Zero(), p).norm() == 0.0);
  std::mt19937 rng(5);
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd q = test::uniform(rng, 3, -2.0, 2.0);
    Eigen::VectorXd fd(3);
    for (Index i = 0; i < 3; ++i) {
      const Eigen::VectorXd e = Eigen::VectorXd::Unit(3, i) * 1e-6;
      fd(i) = (potential_energy((q + e).eval(), p) - potential_energy((q - e).eval(), p)) / 2e-6;
    }
    CHECK(rel_err(grad_potential(q, p), fd) < 1e-6);
  }
  Eigen::Matrix3d expected = Eigen::Matrix3d::Constant(p.alpha1);
  expected.diagonal().array() += p.alpha2;
  CHECK(rel_err(hessian_potential(Eigen::Vector3d::Zero(), p), expected) < 1e-15);
}

TEST_CASE("Hamiltonian, gradient and velocity") {
  const Params p = chain(3);
  std::mt19937 rng(7);
  const RobotState<double> origin{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)};
  CHECK(hamiltonian(origin, p) == p.u0);
  const auto g0 = grad_hamiltonian(origin, p);
  CHECK(g0.dq.norm() == 0.0);
  CHECK(g0.dp.norm() == 0.0);

  double min_h = 1e300;
  for (int k = 0; k < 10000; ++k) {
    const RobotState<double> s{test::uniform(rng, 3, -3.0, 3.0), test::uniform(rng, 3, -1.0, 1.0)};
    min_h = std::min(min_h, hamiltonian(s, p));
  }
  CHECK(min_h >= p.u0);

  for (int k = 0; k < 100; ++k) {
    const RobotState<double> s{test::uniform(rng, 3, -1.5, 1.5), test::uniform(rng, 3, -1e-2, 1e-2)};
    const auto g = grad_hamiltonian(s, p);
    Eigen::VectorXd fq(3), fp(3);
    for (Index i = 0; i < 3; ++i) {
      const Eigen::VectorXd eq = Eigen::VectorXd::Unit(3, i) * 1e-6;
      const Eigen::VectorXd ep = Eigen::VectorXd::Unit(3, i) * 1e-8;
      fq(i) = (hamiltonian({s.q + eq, s.p}, p) - hamiltonian({s.q - eq, s.p}, p)) / 2e-6;
      fp(i) = (hamiltonian({s.q, s.p + ep}, p) - hamiltonian({s.q, s.p - ep}, p)) / 2e-8;
    }
    CHECK(rel_err(g.dq, fq) < 1e-6);
    CHECK(rel_err(g.dp, fp) < 1e-6);
    const Eigen::VectorXd v = velocity(s, p);
    CHECK((v - g.dp).norm() == 0.0);
    CHECK((inertia_matrix(s.q, p) * v - s.p).norm() <= 1e-12 * s.p.norm());
  }

  const RobotState<double> still{Eigen::Vector3d(0.3, -0.2, 0.5), Eigen::VectorXd::Zero(3)};
  CHECK(hamiltonian(still, p) == doctest::Approx(potential_energy(still.q, p)));
  CHECK((grad_hamiltonian(still, p).dq - grad_potential(still.q, p)).norm() == 0.0);
  CHECK(velocity(still, p).norm() == 0.0);
}

TEST_CASE("input matrix routing") {
  Params p = chain(3);
  const auto g = input_matrix(Eigen::Vector3d::Zero(), p);
  Eigen::Matrix<double, 3, 2> expected;
  expected << 0.02, -0.02, 0.02, -0.02, 0.02, -0.02;
  CHECK((g - expected).norm() == 0.0);
  CHECK((g * Eigen::Vector2d(4.0, 4.0)).norm() == 0.0);

  Eigen::MatrixXd custom(3, 2);
  custom << 0.01, 0.0, 0.02, -0.01, 0.03, -0.02;
  p.routing = custom;
  CHECK((input_matrix(Eigen::Vector3d(0.4, 0.1, 0.2), p) - custom).norm() == 0.0);
  p.routing = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("parameter validation") {
  Params p;
  p.alpha2 = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = Params{};
  p.links = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = Params{};
  p.alpha1 = -0.1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("templated on the scalar type") {
  RobotParams<long double> p;
  const Eigen::Matrix<long double, Eigen::Dynamic, 1> q = Eigen::Matrix<long double, 3, 1>(0.1L, 0.2L, -0.3L);
  const auto m = inertia_matrix(q, p);
  const auto md = inertia_matrix(q.cast<double>().eval(), Params{});
  CHECK(rel_err(m.cast<double>(), md) < 1e-15);
}
