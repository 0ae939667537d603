#include <catch_amalgamated.hpp>

#include "shockforge/charsolve.hpp"
#include "shockforge/numerics.hpp"

#include <cmath>
#include <cstdio>

using namespace shockforge;
using Catch::Approx;

namespace {
Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<int>(v.size()));
  int k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

// u = eps g(x - (d + u) t) by Newton, the scalar characteristic oracle for
// f = d u + u^2 / 2.
double scalar_oracle(double x, double t, double eps, double d, double amp, bool hann = false) {
  const double pi = 3.141592653589793;
  auto g = [&](double s) {
    if (std::abs(s) > pi) return 0.0;
    return hann ? -amp * 0.5 * (std::sin(s) + 0.5 * std::sin(2 * s)) : -amp * std::sin(s);
  };
  auto dg = [&](double s) {
    if (std::abs(s) > pi) return 0.0;
    return hann ? -amp * 0.5 * (std::cos(s) + std::cos(2 * s)) : -amp * std::cos(s);
  };
  // bracket on the foot xi: x = xi + (d + eps g(xi)) t, monotone before crossing
  auto F = [&](double xi, double& df) {
    df = 1.0 + eps * dg(xi) * t;
    return xi + (d + eps * g(xi)) * t - x;
  };
  const double span = (std::abs(d) + eps * amp) * t + 1.0;
  const double xi = solve_bracketed(F, x - span, x + span, 1e-15);
  return eps * g(xi);
}

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

InitialData decoupled_data(double eps) {
  ScalarProfile p;
  p.kind = "hann";
  InitialData d;
  d.epsilon = eps;
  d.a = -p.half_width;
  d.b = p.half_width;
  d.profile = [p](double x) { return vec({0.5 * p.g(x), p.g(x), 0.7 * p.g(x)}); };
  d.dprofile = [p](double x) { return vec({0.5 * p.dg(x), p.dg(x), 0.7 * p.dg(x)}); };
  return d;
}
}  // namespace

TEST_CASE("smooth phase reproduces the implicit burgers solution") {
  const auto ns = build_transform(make_burgers(), 0);
  const auto data = make_wave_data(ScalarProfile{}, vec({1.0}), 0.1);
  const auto sp = smooth_evolve(ns, data, 5.0);
  double worst = 0.0;
  for (std::size_t k = 0; k < sp.x.size(); ++k)
    worst = std::max(worst, std::abs(sp.u[k][0] - scalar_oracle(sp.x[k], 5.0, 0.1, 0.0, 1.0)));
  REQUIRE(worst < 1e-6);
  REQUIRE(sp.min_K == Approx(0.5).margin(1e-6));
}

TEST_CASE("smooth phase on a decoupled system matches each scalar oracle") {
  const auto ns = build_transform(decoupled3(), 1);
  const auto data = decoupled_data(0.1);
  const auto sp = smooth_evolve(ns, data, 3.0);
  const double amp[3] = {0.5, 1.0, 0.7}, d[3] = {-1.0, 0.0, 1.0};
  double worst = 0.0;
  for (double x = -6.0; x <= 6.0; x += 0.013) {
    const Vec u = sp.state(x);
    for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(u[k] - scalar_oracle(x, 3.0, 0.1, d[k], amp[k], true)));
  }
  REQUIRE(worst < 1e-6);
}

TEST_CASE("zero data stays zero with a linear characteristic map") {
  const auto ns = build_transform(make_p_system(), 0);
  InitialData d = make_wave_data(ScalarProfile{}, ns.ri0, 0.0);
  const auto sp = smooth_evolve(ns, d, 2.0);
  REQUIRE(sp.sup_u == 0.0);
  CharsolveOptions o;
  o.ny = 65;
  o.nt_fine = 20;
  const auto g = solve_blowup_system(ns, sp, 4.0, o);
  for (int l = 0; l < g.nt(); ++l)
    for (int k = 0; k < g.ny(); ++k) {
      const std::size_t id = static_cast<std::size_t>(l) * g.ny() + k;
      REQUIRE(g.phi[id] == Approx(g.y[k] - std::sqrt(2.0) * (g.t[l] - g.t0)).margin(1e-12));
    }
}

TEST_CASE("burgers characteristic map is exact") {
  const auto ns = build_transform(make_burgers(), 0);
  const auto data = make_wave_data(ScalarProfile{}, vec({1.0}), 0.1);
  const auto sp = smooth_evolve(ns, data, 5.0);
  const auto g = solve_blowup_system(ns, sp, 10.0);
  REQUIRE(g.t.back() >= 10.0 + 1.0);
  double worst_phi = 0.0, worst_K = 0.0;
  for (int l = 0; l < g.nt(); l += 7)
    for (int k = 3; k < g.ny() - 3; ++k) {
      const double y = g.y[k], u = scalar_oracle(y, 5.0, 0.1, 0.0, 1.0);
      if (std::abs(std::abs(y) - M_PI) < 4 * g.dy()) continue;  // profile kink at the support edge
      const double tau = g.t[l] - 5.0;
      const std::size_t id = static_cast<std::size_t>(l) * g.ny() + k;
      worst_phi = std::max(worst_phi, std::abs(g.phi[id] - (y + u * tau)));
      // u_y from the oracle by central differences
      const double h = 1e-4;
      const double uy = (scalar_oracle(y + h, 5.0, 0.1, 0.0, 1.0) - scalar_oracle(y - h, 5.0, 0.1, 0.0, 1.0)) / (2 * h);
      worst_K = std::max(worst_K, std::abs(g.K[id] - (1.0 + uy * tau)));
    }
  REQUIRE(worst_phi < 1e-12);
  REQUIRE(worst_K < 1e-5);
}

TEST_CASE("grid invariants hold on p_system") {
  const auto ns = build_transform(make_p_system(), 0);
  ScalarProfile p;
  p.kind = "hann";
  const auto data = make_wave_data(p, ns.ri0, 0.1);
  const auto ls = lifespan_estimate(ns, data);
  const auto sp = smooth_evolve(ns, data, 0.5 * ls.T_hat);
  CharsolveOptions o;
  o.ny = 257;
  const auto g = solve_blowup_system(ns, sp, ls.T_hat, o);
  for (int k = 0; k < g.ny(); ++k) REQUIRE(g.phi[k] == g.y[k]);
  for (int l = 1; l < g.nt(); ++l) REQUIRE(g.t[l] > g.t[l - 1]);
  // K against central differences of phi, and phi_t against lambda_i
  double worst_K = 0.0, worst_t = 0.0;
  const int NY = g.ny();
  for (int l = 2; l < g.nt() - 2; l += 5)
    for (int k = 4; k < NY - 4; k += 3) {
      const std::size_t id = static_cast<std::size_t>(l) * NY + k;
      const double cd = (g.phi[id - 2] - 8 * g.phi[id - 1] + 8 * g.phi[id + 1] - g.phi[id + 2]) / (12 * g.dy());
      worst_K = std::max(worst_K, std::abs(g.K[id] - cd) / (1.0 + std::abs(g.K[id])));
      const double lam = eigen_decompose(ns.model, g.u_node(l, k), &ns.at0).lambdas[0];
      worst_t = std::max(worst_t, std::abs(g.sample(g.y[k], g.t[l]).phi_t - lam));
    }
  INFO("K " << worst_K << " phi_t " << worst_t);
  REQUIRE(worst_K < 1e-6);
  REQUIRE(worst_t < 1e-6);
  REQUIRE(g.min_K(0) > 0.0);
  REQUIRE(g.min_K(g.nt() - 1) < 0.0);
}

TEST_CASE("decoupled system keeps the i-component constant along columns") {
  const auto ns = build_transform(decoupled3(), 1);
  const auto data = decoupled_data(0.1);
  const auto sp = smooth_evolve(ns, data, 3.0);
  CharsolveOptions o;
  o.ny = 257;
  const auto g = solve_blowup_system(ns, sp, 10.0, o);
  double worst = 0.0;
  for (int k = 0; k < g.ny(); ++k) {
    const double v0 = g.u_node(0, k)[1];
    for (int l = 1; l < g.nt(); ++l) worst = std::max(worst, std::abs(g.u_node(l, k)[1] - v0));
  }
  REQUIRE(worst < 1e-13);
}

TEST_CASE("small amplitude limit of K") {
  // K(y, t) (1 + c eps g'(xi) t0) = 1 + c eps g'(xi) t, xi the label at t = 0
  const double eps = 1e-4;
  const auto ns = build_transform(make_synthetic(3, 7), 1);
  ScalarProfile p;
  p.kind = "hann";
  const auto data = make_wave_data(p, ns.ri0, eps);
  const auto ls = lifespan_estimate(ns, data);
  const auto sp = smooth_evolve(ns, data, 0.5 * ls.T_hat);
  const auto g = solve_blowup_system(ns, sp, ls.T_hat);
  const double c = ls.dlambda[1];
  double worst = 0.0;
  for (double frac : {0.6, 0.9, 1.0, 1.05}) {
    const double t = frac * ls.T_hat;
    for (double y = -2.5; y <= 2.5; y += 0.1) {
      const double xi = sp.label(y);
      const double wp = leading_w0_prime(ns, data, xi)[1];
      const double expected = (1.0 + c * eps * wp * t) / (1.0 + c * eps * wp * sp.t0);
      worst = std::max(worst, std::abs(g.K_at(y, t) - expected));
    }
  }
  REQUIRE(worst < 1e-5);
}

TEST_CASE("physical sampling counts branches") {
  const auto ns = build_transform(make_burgers(), 0);
  const auto data = make_wave_data(ScalarProfile{}, vec({1.0}), 0.1);
  const auto sp = smooth_evolve(ns, data, 5.0);
  const auto g = solve_blowup_system(ns, sp, 10.0);
  for (double x = -3.0; x <= 3.0; x += 0.25) REQUIRE(sample_physical(g, x, 9.5).size() == 1);
  // after the crossing, x = 0 lies inside the fold for t = 10.5
  const auto br = sample_physical(g, 0.0, 10.5);
  REQUIRE(br.size() == 3);
  REQUIRE(br[0].y < br[1].y);
  REQUIRE(br[1].y < br[2].y);
  for (const auto& b : br) REQUIRE(std::abs(g.sample(b.y, 10.5).phi) < 1e-10);
  REQUIRE(sample_physical(g, 2.0, 10.5).size() == 1);
  REQUIRE_THROWS_AS(sample_physical(g, 0.0, 100.0), Error);
}

TEST_CASE("grid snapshot round trip") {
  const auto ns = build_transform(make_burgers(), 0);
  const auto data = make_wave_data(ScalarProfile{}, vec({1.0}), 0.1);
  CharsolveOptions o;
  o.ny = 65;
  o.nt_fine = 40;
  const auto g = solve_blowup_system(ns, smooth_evolve(ns, data, 5.0, o), 10.0, o);
  const std::string path = "chargrid_test.bin";
  g.save(path);
  CharGrid h;
  REQUIRE(h.load(path));
  REQUIRE(h.phi == g.phi);
  REQUIRE(h.u == g.u);
  REQUIRE(h.t == g.t);
  std::remove(path.c_str());
}
