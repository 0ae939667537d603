#include <catch_amalgamated.hpp>

#include "shockforge/normalize.hpp"

#include <cmath>
#include <cstdio>
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

Vec random_vec(std::mt19937_64& rng, int n, double r) {
  std::uniform_real_distribution<double> U(-r, r);
  Vec v(n);
  for (int k = 0; k < n; ++k) v[k] = U(rng);
  return v;
}

// Decoupled system already in normal form: f_k = d_k u_k + u_k^2 / 2.
FluxModel decoupled3() {
  std::vector<Monomial> t;
  const double d[3] = {-1.0, 0.0, 1.0};
  for (int k = 0; k < 3; ++k) {
    std::vector<int> p1(3, 0), p2(3, 0);
    p1[k] = 1;
    p2[k] = 2;
    t.push_back({k, d[k], p1});
    t.push_back({k, 0.5, p2});
  }
  return make_polynomial(3, t, "decoupled3");
}
}  // namespace

TEST_CASE("constant r_i gives linear riemann invariants") {
  Mat C(3, 3);
  C << -1.0, 0.3, 0.1, 0.0, 0.5, 0.2, 0.0, 0.0, 2.0;
  const auto m = make_linear(C);
  NormalizeOptions o;
  o.use_chart = false;
  const auto ns = build_transform(m, 1, o);
  std::mt19937_64 rng(1);
  for (int s = 0; s < 20; ++s) {
    const Vec u = random_vec(rng, 3, 0.2);
    const Vec q = ns.riemann_invariants(u);
    for (int j = 0; j < 2; ++j) REQUIRE(q[j] == Approx(ns.zeta[j].dot(u.transpose())).margin(1e-13));
  }
}

TEST_CASE("p-system riemann invariant level sets match the classical invariant") {
  // For the first family m - 2 sqrt(2) (1 - v^{-1/2}) is constant along r_1 curves (gamma = 2).
  const auto m = make_p_system(2.0);
  const auto q = riemann_invariants(m, 0);
  auto z = [](double v, double mom) { return mom - 2.0 * std::sqrt(2.0) * (1.0 - 1.0 / std::sqrt(v)); };
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-0.15, 0.15);
  for (int s = 0; s < 20; ++s) {
    const double dv1 = U(rng), m1 = U(rng), dv2 = U(rng);
    const double level = z(1.0 + dv1, m1);
    const double m2 = level + 2.0 * std::sqrt(2.0) * (1.0 - 1.0 / std::sqrt(1.0 + dv2));
    REQUIRE(q(vec({dv1, m1}))[0] == Approx(q(vec({dv2, m2}))[0]).margin(1e-6));
  }
}

TEST_CASE("riemann invariants annihilate r_i on synthetic_3") {
  const auto m = make_synthetic(3, 7);
  const auto ns = build_transform(m, 1);
  REQUIRE(ns.has_chart());
  std::mt19937_64 rng(9);
  double worst = 0.0;
  for (int s = 0; s < 200; ++s) {
    const Vec u = random_vec(rng, 3, 0.15);
    const Vec r = eigen_decompose(m, u, &ns.at0).r(1);
    const double h = 1e-6;
    const Vec dq = (ns.riemann_invariants(u + h * r) - ns.riemann_invariants(u - h * r)) / (2 * h);
    worst = std::max(worst, dq.cwiseAbs().maxCoeff());
  }
  REQUIRE(worst < 1e-7);
}

TEST_CASE("a model in normal form maps to itself") {
  const auto ns = build_transform(decoupled3(), 1);
  std::mt19937_64 rng(2);
  for (int s = 0; s < 50; ++s) {
    const Vec u = random_vec(rng, 3, 0.15);
    REQUIRE((ns.to_w(u) - u).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("synthetic_3 normal form properties hold") {
  const auto ns = build_transform(make_synthetic(3, 7), 1);
  std::mt19937_64 rng(4);
  std::vector<Vec> samples;
  for (int s = 0; s < 100; ++s) samples.push_back(random_vec(rng, 3, 0.5 * ns.w_box));
  const auto rep = verify_normal_form(ns, samples);
  INFO("col " << rep.col_i_offdiag << " aii " << rep.a_ii_dev << " angle " << rep.r_i_angle << " rt "
              << rep.roundtrip << " a0 " << rep.a0_offdiag);
  REQUIRE(rep.pass);
}

TEST_CASE("p-system A(0) is diagonal") {
  const auto ns = build_transform(make_p_system(2.0), 0);
  const Mat A0 = ns.A(Vec::Zero(2));
  REQUIRE(A0(0, 0) == Approx(-std::sqrt(2.0)).margin(1e-8));
  REQUIRE(A0(1, 1) == Approx(std::sqrt(2.0)).margin(1e-8));
  REQUIRE(std::abs(A0(0, 1)) < 1e-8);
  REQUIRE(std::abs(A0(1, 0)) < 1e-8);
}

TEST_CASE("euler3 normal form self-check and injected fault") {
  const auto ns = build_transform(make_euler3(), 2);
  std::mt19937_64 rng(8);
  std::vector<Vec> samples;
  for (int s = 0; s < 40; ++s) samples.push_back(random_vec(rng, 3, 0.5 * ns.w_box));
  const auto rep = verify_normal_form(ns, samples);
  INFO("col " << rep.col_i_offdiag << " aii " << rep.a_ii_dev << " angle " << rep.r_i_angle << " rt "
              << rep.roundtrip);
  REQUIRE(rep.pass);

  const auto bad = verify_normal_form(ns, samples, [&](const Vec& w) {
    Mat A = ns.A(w);
    A(0, 2) += 1e-3;
    return A;
  });
  REQUIRE_FALSE(bad.pass);
  REQUIRE(bad.col_i_offdiag > 1e-4);
}

TEST_CASE("round trip u -> w -> u") {
  const auto ns = build_transform(make_euler3(), 2);
  std::mt19937_64 rng(12);
  double worst = 0.0;
  for (int s = 0; s < 500; ++s) {
    const Vec u = random_vec(rng, 3, 0.12);
    worst = std::max(worst, (ns.to_u(ns.to_w(u)) - u).cwiseAbs().maxCoeff() / (1 + u.norm()));
  }
  REQUIRE(worst < 1e-9);
}

TEST_CASE("transform cache round trip") {
  const auto ns = build_transform(make_p_system(2.0), 0);
  const std::string path = "normalize_cache_test.bin";
  save_transform_cache(ns, path);
  NormalizeOptions o;
  o.use_chart = false;
  auto ns2 = build_transform(make_p_system(2.0), 0, o);
  ns2.opts = ns.opts;
  REQUIRE(load_transform_cache(ns2, path));
  const Vec u = vec({0.05, -0.03});
  REQUIRE((ns2.to_w(u) - ns.to_w(u)).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("burgers lifespan from the sine profile") {
  const auto ns = build_transform(make_burgers(), 0);
  ScalarProfile p;  // -sin on [-pi, pi]
  const auto data = make_wave_data(p, vec({1.0}), 0.1);
  const auto ls = lifespan_estimate(ns, data);
  // exact crossing time: -1 / min(eps u0') with u0' = -cos
  REQUIRE(ls.seed.N[0] == Approx(-1.0).margin(1e-9));
  REQUIRE(std::abs(ls.seed.x0) < 1e-9);
  REQUIRE(ls.T_hat == Approx(10.0).epsilon(1e-9));
  REQUIRE(ls.seed.Hpp > 0.0);
}

TEST_CASE("lifespan scaling properties") {
  const auto ns = build_transform(make_p_system(2.0), 0);
  ScalarProfile p;
  p.kind = "hann";
  const auto d1 = make_wave_data(p, ns.ri0, 0.1);
  const auto d2 = make_wave_data(p, 2.5 * ns.ri0, 0.1);
  const auto d3 = make_wave_data(p, ns.ri0, 0.03);
  const auto l1 = lifespan_estimate(ns, d1), l2 = lifespan_estimate(ns, d2), l3 = lifespan_estimate(ns, d3);
  REQUIRE(l2.seed.N[0] == Approx(2.5 * l1.seed.N[0]).epsilon(1e-12));
  REQUIRE(l2.seed.x0 == Approx(l1.seed.x0).margin(1e-12));
  REQUIRE(l1.T_hat * 0.1 == Approx(l3.T_hat * 0.03).epsilon(1e-12));
}

TEST_CASE("lifespan error cases") {
  Mat C(2, 2);
  C << -1.0, 0.0, 0.0, 1.0;
  const auto lin = build_transform(make_linear(C), 0);
  ScalarProfile p;
  const auto d = make_wave_data(p, vec({1.0, 0.0}), 0.1);
  try {
    lifespan_estimate(lin, d);
    FAIL("expected NoBlowup");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::NoBlowup);
  }
  const auto bur = build_transform(make_burgers(), 0);
  ScalarProfile two;
  two.kind = "double";
  try {
    lifespan_estimate(bur, make_wave_data(two, vec({1.0}), 0.1));
    FAIL("expected DegenerateMinimum");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::DegenerateMinimum);
  }
}
