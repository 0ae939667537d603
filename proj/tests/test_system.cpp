#include <catch_amalgamated.hpp>

#include "shockforge/system.hpp"

#include <cmath>
#include <random>

using namespace shockforge;
using Catch::Approx;

namespace {
Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<int>(v.size()));
  int k = 0;
  for (double x : v) out[k++] = x;
  return out;
}
}  // namespace

TEST_CASE("burgers eigenstructure is the scalar embedding") {
  const auto m = make_burgers();
  const auto es = eigen_decompose(m, vec({0.3}));
  REQUIRE(es.lambdas[0] == Approx(0.3).margin(1e-15));
  REQUIRE(es.left(0, 0) == 1.0);
  REQUIRE(es.right(0, 0) == 1.0);
  REQUIRE(genuine_nonlinearity(m, 0, vec({0.0})) == Approx(1.0).margin(1e-9));
}

TEST_CASE("p-system eigenvalues match the characteristic polynomial") {
  const auto m = make_p_system(2.0);
  const Vec u = vec({0.0, 0.0});
  const auto es = eigen_decompose(m, u);
  // independent oracle: roots of x^2 - tr x + det
  const Mat F = m.jac(u);
  const double tr = F.trace(), det = F.determinant();
  const double s = std::sqrt(tr * tr / 4 - det);
  REQUIRE(es.lambdas[0] == Approx(tr / 2 - s).margin(1e-14));
  REQUIRE(es.lambdas[1] == Approx(tr / 2 + s).margin(1e-14));
  REQUIRE(es.lambdas[0] == Approx(-std::sqrt(2.0)).margin(1e-14));
  REQUIRE(es.lambdas[1] == Approx(std::sqrt(2.0)).margin(1e-14));
}

TEST_CASE("p-system genuine nonlinearity matches the closed form") {
  const double g = 2.0;
  const auto m = make_p_system(g);
  for (double dv : {0.0, 0.1, -0.15}) {
    const double v = 1.0 + dv;
    const double s = std::sqrt(g * std::pow(v, -g - 1));
    const double dlam = g * (g + 1) * std::pow(v, -g - 2) / (2 * s);  // d lambda_1 / dv
    // r_1 proportional to (1, s), oriented with the largest component positive
    const double r1v = 1.0 / std::sqrt(1 + s * s);
    const double expected = dlam * r1v;
    REQUIRE(genuine_nonlinearity(m, 0, vec({dv, 0.02})) == Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("synthetic_3 at the origin is diagonal") {
  const auto m = make_synthetic(3, 7);
  const auto es = eigen_decompose(m, Vec::Zero(3));
  REQUIRE(es.lambdas[0] == Approx(-1.0).margin(1e-14));
  REQUIRE(es.lambdas[1] == Approx(0.0).margin(1e-14));
  REQUIRE(es.lambdas[2] == Approx(1.0).margin(1e-14));
  REQUIRE((es.right - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE((es.left - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("linear system has zero genuine nonlinearity") {
  Mat C(2, 2);
  C << 1.0, 0.5, 0.0, -2.0;
  const auto m = make_linear(C);
  for (int j = 0; j < 2; ++j) REQUIRE(std::abs(genuine_nonlinearity(m, j, vec({0.1, -0.2}))) < 1e-8);
}

TEST_CASE("eigenstructure invariants on random euler3 states") {
  const auto m = make_euler3();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-0.2, 0.2);
  for (int s = 0; s < 100; ++s) {
    const Vec u = vec({U(rng), U(rng), U(rng)});
    const auto es = eigen_decompose(m, u);
    const Mat F = m.jac(u);
    REQUIRE((es.left * es.right - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
    const double scale = F.cwiseAbs().maxCoeff();
    for (int j = 0; j < 3; ++j) {
      REQUIRE((F * es.r(j) - es.lambdas[j] * es.r(j)).cwiseAbs().maxCoeff() < 1e-8 * scale);
      REQUIRE((es.l(j) * F - es.lambdas[j] * es.l(j)).cwiseAbs().maxCoeff() < 1e-8 * scale);
    }
    REQUIRE(es.lambdas.sum() == Approx(F.trace()).epsilon(1e-8).margin(1e-12));
    REQUIRE(es.lambdas[0] < es.lambdas[1]);
    REQUIRE(es.lambdas[1] < es.lambdas[2]);
  }
}

TEST_CASE("eigenvectors stay oriented along a path") {
  const auto m = make_euler3();
  const auto anchor = eigen_decompose(m, Vec::Zero(3));
  EigenStructure prev = anchor;
  for (int s = 1; s <= 200; ++s) {
    const double t = s / 200.0;
    const Vec u = vec({0.3 * t, -0.25 * std::sin(3 * t), 0.2 * t * t});
    const auto es = eigen_decompose(m, u, &prev);
    for (int j = 0; j < 3; ++j) REQUIRE(es.r(j).dot(prev.r(j)) > 0.0);
    prev = es;
  }
}

TEST_CASE("complex spectrum is rejected") {
  Mat F(2, 2);
  F << 0.0, 1.0, -1.0, 0.0;
  REQUIRE_THROWS_AS(eigen_decompose(F), Error);
  Mat G = Mat::Identity(3, 3);
  try {
    eigen_decompose(G);
    FAIL("expected NonStrictHyperbolicity");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::NonStrictHyperbolicity);
  }
}

TEST_CASE("analytic jacobians agree with finite differences") {
  REQUIRE(validate_jacobian(make_burgers(), {vec({0.0}), vec({0.5}), vec({-0.5})}).max_rel_dev < 1e-9);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-0.2, 0.2);
  std::vector<Vec> samples;
  for (int s = 0; s < 100; ++s) samples.push_back(vec({U(rng), U(rng), U(rng)}));
  const auto rep = validate_jacobian(make_euler3(), samples);
  REQUIRE(rep.pass);
  REQUIRE(validate_jacobian(make_p_system(), {vec({0.1, 0.2})}).pass);
  REQUIRE(validate_jacobian(make_synthetic(4, 5), {vec({0.1, 0.2, -0.1, 0.05})}).pass);
}

TEST_CASE("an injected jacobian fault is located") {
  auto m = make_euler3();
  const auto good = m.jacobian;
  m.jacobian = [good](const Vec& u) {
    Mat J = good(u);
    J(2, 1) += 1e-3;
    return J;
  };
  const auto rep = validate_jacobian(m, {vec({0.01, 0.02, 0.03})});
  REQUIRE_FALSE(rep.pass);
  REQUIRE(rep.row == 2);
  REQUIRE(rep.col == 1);
}

TEST_CASE("polynomial flux reproduces burgers") {
  const auto m = make_polynomial(1, {Monomial{0, 0.5, {2}}});
  REQUIRE(m.f(vec({0.4}))[0] == Approx(0.08));
  REQUIRE(m.jac(vec({0.4}))(0, 0) == Approx(0.4));
  REQUIRE(validate_jacobian(m, {vec({0.3})}).pass);
}

TEST_CASE("profiles vanish outside the support") {
  ScalarProfile p;
  p.kind = "hann";
  const auto d = make_wave_data(p, vec({1.0}), 0.1);
  REQUIRE(initial_data_valid(d));
  REQUIRE(p.dg(0.0) == Approx(-1.0));
  ScalarProfile s;
  REQUIRE(s.dg(0.0) == Approx(-1.0));
}
