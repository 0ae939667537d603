#include <catch_amalgamated.hpp>

#include "shockforge/shockfit.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

using namespace shockforge;
using Catch::Approx;

namespace {
Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<int>(v.size()));
  int k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Run {
  NormalizedSystem ns;
  BlowupPoint bp;
  ShockSolution sol;
};

Run pipeline(const FluxModel& model, int i, const std::function<double(double)>& g,
             const std::function<double(double)>& dg, double eps, const ShockfitOptions& base) {
  Run r;
  r.ns = build_transform(model, i);
  InitialData data = make_wave_data(ScalarProfile{}, r.ns.ri0, eps);
  const Vec dir = r.ns.ri0;
  data.profile = [=](double x) { return Vec(dir * (std::abs(x) < std::numbers::pi ? g(x) : 0.0)); };
  data.dprofile = [=](double x) { return Vec(dir * (std::abs(x) < std::numbers::pi ? dg(x) : 0.0)); };
  const Lifespan ls = lifespan_estimate(r.ns, data);
  const SmoothPhase sp = smooth_evolve(r.ns, data, 0.5 * ls.T_hat);
  CharGrid grid = solve_blowup_system(r.ns, sp, ls.T_hat);
  grid.ns = &r.ns;
  r.bp = detect_blowup(grid);
  const EnvelopeBranches br = envelope_branches(phi_field(grid), r.bp, 1e-4, 1.0, 64);
  const PreshockCurve pc = preshock_curve(grid, r.bp, br, 1.0, 100);
  ShockfitOptions o = base;
  o.epsilon = eps;
  r.sol = iterate_to_convergence(r.ns, init_first_approximation(grid, r.bp, br, pc, o), o);
  return r;
}

double g_asym(double x) { return -std::sin(x) + 0.3 * std::sin(x) * std::sin(x); }
double dg_asym(double x) { return -std::cos(x) + 0.3 * std::sin(2.0 * x); }

const Run& burgers_asym() {
  static const Run r = pipeline(make_burgers(), 0, g_asym, dg_asym, 0.1, ShockfitOptions{});
  return r;
}

const Run& p_system_run() {
  static const Run r = [] {
    ScalarProfile p;
    p.kind = "hann";
    ShockfitOptions o;
    o.nt_uniform = 100;
    o.nz_uniform = 100;
    return pipeline(make_p_system(), 0, [p](double x) { return p.g(x); }, [p](double x) { return p.dg(x); }, 0.1,
                    o);
  }();
  return r;
}

// Equal-area shock position for Burgers with u0 = eps g: the chord between the
// outer characteristic feet a < b landing at s cuts off equal areas.
double equal_area_shock(const std::function<double(double)>& g, const std::function<double(double)>& dg,
                        double eps, double t) {
  auto X = [&](double xi) { return xi + eps * g(xi) * t; };
  double fold_a = 0.0, fold_c = 0.0;
  const int N = 20000;
  double prev = 1.0;
  for (int q = 0; q <= N; ++q) {
    const double xi = -std::numbers::pi + 2.0 * std::numbers::pi * q / N;
    const double d = 1.0 + eps * dg(xi) * t;
    if (q > 0 && prev > 0.0 && d <= 0.0) fold_a = xi;
    if (q > 0 && prev <= 0.0 && d > 0.0) fold_c = xi;
    prev = d;
  }
  auto root = [&](double s, double lo, double hi) {
    for (int k = 0; k < 200; ++k) {
      const double m = 0.5 * (lo + hi);
      (X(m) < s ? lo : hi) = m;
    }
    return 0.5 * (lo + hi);
  };
  auto gap = [&](double s) {
    const double a = root(s, -10.0, fold_a), b = root(s, fold_c, 10.0);
    const int M = 4000;
    double area = 0.0;
    for (int k = 0; k < M; ++k) {
      const double x1 = a + (b - a) * k / M, x2 = a + (b - a) * (k + 1) / M;
      area += (x2 - x1) / 6.0 * (g(x1) + 4.0 * g(0.5 * (x1 + x2)) + g(x2));
    }
    return eps * (area - 0.5 * (g(a) + g(b)) * (b - a));
  };
  double lo = X(fold_c), hi = X(fold_a);
  const double glo = gap(lo);
  for (int k = 0; k < 80; ++k) {
    const double m = 0.5 * (lo + hi);
    ((gap(m) > 0.0) == (glo > 0.0) ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

// Burgers with u0 = -eps sin x: outer characteristic root on one side.
double burgers_sine_branch(double x, double t, double eps, int side) {
  const double c = std::acos(std::min(1.0, 1.0 / (eps * t)));
  double lo = side < 0 ? -20.0 : c, hi = side < 0 ? -c : 20.0;
  auto X = [&](double xi) { return xi - eps * t * (std::abs(xi) < std::numbers::pi ? std::sin(xi) : 0.0); };
  for (int k = 0; k < 200; ++k) {
    const double m = 0.5 * (lo + hi);
    (X(m) < x ? lo : hi) = m;
  }
  const double xi = 0.5 * (lo + hi);
  return std::abs(xi) < std::numbers::pi ? -eps * std::sin(xi) : 0.0;
}

// f = (-u0, u1^2 / 2, u2): Burgers in the middle field, linear transport around it.
FluxModel decoupled() {
  return make_polynomial(3, {{0, -1.0, {1, 0, 0}}, {1, 0.5, {0, 2, 0}}, {2, 1.0, {0, 0, 1}}}, "decoupled");
}

ShockSolution decoupled_run(const NormalizedSystem& ns, double amp, ShockfitOptions o) {
  const double eps = 0.1, T = 10.0;
  o.epsilon = eps;
  auto h = [amp](double s) { return amp * std::exp(-4.0 * s * s); };
  BranchData data = [&](double x, double t, int side) {
    return ns.to_w(vec({h(x + t), burgers_sine_branch(x, t, eps, side), h(x - t)}));
  };
  const FirstApproximation fa = first_approximation(ns, T, 0.0, [](double) { return 0.0; }, data, o);
  return iterate_to_convergence(ns, fa, o);
}
}  // namespace

TEST_CASE("sigma_average on Burgers and at zero jump", "[shockfit]") {
  const FluxModel b = make_burgers();
  CHECK(sigma_average(b, 0, vec({1.0}), vec({0.0})) == Approx(0.5).margin(1e-15));
  const FluxModel p = make_p_system();
  const Vec u = vec({0.03, -0.02});
  CHECK(sigma_average(p, 0, u, u) == Approx(eigenvalues(p.jac(u))[0]).margin(1e-15));
}

TEST_CASE("sigma_average deviates from the mean speed quadratically", "[shockfit]") {
  const FluxModel p = make_p_system();
  const Vec um = vec({0.02, 0.01});
  const Vec r = vec({1.0, 0.4});
  std::vector<double> lx, ly;
  for (double h = 1e-3; h <= 0.1; h *= 1.6) {
    const Vec up = um + h * r;
    const double mean = 0.5 * (eigenvalues(p.jac(um))[0] + eigenvalues(p.jac(up))[0]);
    lx.push_back(std::log(h));
    ly.push_back(std::log(std::abs(sigma_average(p, 0, um, up) - mean)));
  }
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sx += lx[k];
    sy += ly[k];
    sxx += lx[k] * lx[k];
    sxy += lx[k] * ly[k];
  }
  CHECK((n * sxy - sx * sy) / (n * sxx - sx * sx) == Approx(2.0).margin(0.1));
}

TEST_CASE("rh_closure recovers Burgers and continuous states", "[shockfit]") {
  const NormalizedSystem b = build_transform(make_burgers(), 0);
  const Vec wm = b.to_w(vec({0.08})), wp = b.to_w(vec({-0.03}));
  const RhResult r = rh_closure(b, wm, wp, kNaN);
  CHECK(r.sigma == Approx(0.5 * (0.08 - 0.03)).margin(1e-14));
  CHECK(r.residual < 1e-14);

  const NormalizedSystem p = build_transform(make_p_system(), 0);
  const Vec w = p.to_w(vec({0.02, -0.01}));
  Vec seed = w;
  seed[1] += 0.01;
  const RhResult z = rh_closure(p, w, seed, kNaN);
  // w_plus[1] is unknown for i = 0; a zero i-jump forces it back to w
  CHECK((z.w_plus - w).norm() == 0.0);
  CHECK((z.w_minus - w).norm() == 0.0);
  CHECK(z.sigma == eigenvalues(p.model.jac(p.to_u(w)))[0]);
  CHECK(z.residual == 0.0);
}

TEST_CASE("rh_closure follows the p-system Hugoniot locus", "[shockfit]") {
  const NormalizedSystem ns = build_transform(make_p_system(), 0);
  const double gamma = 2.0;
  auto press = [&](double v) { return std::pow(1.0 + v, -gamma) - 1.0; };
  auto dpress = [&](double v) { return -gamma * std::pow(1.0 + v, -gamma - 1.0); };
  const double v0 = 0.03, m0 = -0.01;
  // Continue (m, sigma) in v along sigma (v - v0) = m0 - m, sigma (m - m0) = p(v) - p(v0),
  // starting on the 1-characteristic direction.
  double m = m0, sigma = -std::sqrt(-dpress(v0));
  const int steps = 60;
  const double dv = -0.06 / steps;
  double v = v0;
  int checked = 0;
  for (int s = 1; s <= steps; ++s) {
    v = v0 + s * dv;
    if (s == 1) m = m0 - sigma * (v - v0);
    for (int it = 0; it < 50; ++it) {
      const double r1 = sigma * (v - v0) + (m - m0);
      const double r2 = sigma * (m - m0) - (press(v) - press(v0));
      // Jacobian in (m, sigma)
      const double a11 = 1.0, a12 = v - v0, a21 = sigma, a22 = m - m0;
      const double det = a11 * a22 - a12 * a21;
      const double dm = (r1 * a22 - a12 * r2) / det, ds = (a11 * r2 - a21 * r1) / det;
      m -= dm;
      sigma -= ds;
      if (std::abs(dm) + std::abs(ds) < 1e-16) break;
    }
    if (s % 15 != 0) continue;
    const Vec um = vec({v0, m0}), up = vec({v, m});
    Vec wp = ns.to_w(um);
    wp[0] = ns.to_w(up)[0];
    const RhResult r = rh_closure(ns, ns.to_w(um), wp, kNaN);
    CHECK((ns.to_u(r.w_plus) - up).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(r.sigma == Approx(sigma).margin(1e-8));
    CHECK(r.residual < 1e-12);
    for (double mg : r.margins) CHECK(mg > 0.0);
    ++checked;
  }
  CHECK(checked == 4);
}

TEST_CASE("zero data is a fixed point at the first iterate", "[shockfit]") {
  const NormalizedSystem ns = build_transform(make_p_system(), 0);
  ShockfitOptions o;
  o.nt_uniform = 40;
  o.nz_uniform = 40;
  const double lam = eigenvalues(ns.model.jac(zeros(2)))[0];
  BranchData data = [](double, double, int) { return zeros(2); };
  const FirstApproximation fa = first_approximation(ns, 5.0, 1.0, [&](double t) { return 1.0 + lam * (t - 5.0); }, data, o);
  const ShockSolution sol = iterate_to_convergence(ns, fa, o);
  CHECK(sol.diag.iterations == 1);
  CHECK(sol.diag.weighted.front() == 0.0);
  CHECK(sol.diag.converged);
  CHECK(sol.curve.phi.back() == Approx(1.0 + lam * (sol.curve.t.back() - 5.0)).margin(1e-13));
}

TEST_CASE("Burgers shock path matches the equal-area construction", "[shockfit]") {
  const Run& r = burgers_asym();
  REQUIRE(r.sol.diag.converged);
  const ShockCurve& c = r.sol.curve;
  double worst = 0.0;
  int used = 0;
  for (std::size_t l = 0; l < c.t.size(); l += 7) {
    const double tau = c.t[l] - r.bp.T_eps;
    if (tau < 0.05) continue;
    worst = std::max(worst, std::abs(c.phi[l] - equal_area_shock(g_asym, dg_asym, 0.1, c.t[l])));
    ++used;
  }
  CHECK(used > 10);
  CHECK(worst < 1e-4);
  CHECK(r.sol.diag.geometry_violations == 0);
}

TEST_CASE("converged p-system shock is exact and contracting", "[shockfit]") {
  const Run& r = p_system_run();
  const IterateDiag& d = r.sol.diag;
  REQUIRE(d.converged);
  CHECK(d.iterations <= 30);
  for (std::size_t k = 1; k < d.contraction_ratios.size(); ++k) CHECK(d.contraction_ratios[k] < 1.0 - 0.05);
  for (double res : r.sol.curve.rh_residual) CHECK(res < 1e-12);
  CHECK(r.sol.curve.entropy_margin > 0.0);
  CHECK(d.geometry_violations == 0);
  for (std::size_t k = 2; k < d.weighted.size(); ++k) CHECK(d.weighted[k] <= d.weighted[k - 1]);

  const CubicJumpReport cj = cubic_jump_diagnostic(r.sol.curve, 0);
  REQUIRE(cj.families.size() == 1);
  CHECK(cj.families[0].slope == Approx(3.0).margin(0.2));
  CHECK(std::isfinite(cj.families[0].limit));
  CHECK(cj.families[0].spread < 0.2);

  const AppendixReport ap = appendix_diagnostics(r.ns, r.sol, 0.1);
  CHECK(ap.paths > 0);
  CHECK(ap.separation_c > 0.0);
  CHECK(ap.max_integral < std::log(1.5) + 1.0);
}

TEST_CASE("decoupled system keeps j-jumps at zero and transports exactly", "[shockfit]") {
  const NormalizedSystem ns = build_transform(decoupled(), 1);
  ShockfitOptions o;
  o.nt_uniform = 60;
  o.nz_uniform = 100;

  const ShockSolution quiet = decoupled_run(ns, 0.0, o);
  REQUIRE(quiet.diag.converged);
  double jmax = 0.0;
  for (const Vec& jmp : quiet.curve.jumps) jmax = std::max({jmax, std::abs(jmp[0]), std::abs(jmp[2])});
  // the chart maps zero j-components to round-off near 1e-30
  CHECK(jmax < 1e-25);
  // symmetric data: the shock stands at the origin
  CHECK(std::abs(quiet.curve.phi.back()) < 1e-12);

  const ShockSolution moving = decoupled_run(ns, 0.02, o);
  REQUIRE(moving.diag.converged);
  const ShockFrameField& f = moving.field;
  double worst = 0.0;
  for (int l = 0; l < f.nt(); l += 5)
    for (int k = 0; k < f.active[l]; k += 3)
      for (int side : {-1, 1}) {
        const double x = side * f.zabs[k] + moving.curve.phi[l];
        const Vec u = ns.to_u(f.at(side, l, k));
        const double tt = f.t[l];
        worst = std::max(worst, std::abs(u[0] - 0.02 * std::exp(-4.0 * (x + tt) * (x + tt))));
        worst = std::max(worst, std::abs(u[2] - 0.02 * std::exp(-4.0 * (x - tt) * (x - tt))));
      }
  CHECK(worst < 2e-6);
  for (const Vec& jmp : moving.curve.jumps) CHECK(std::abs(ns.to_u(jmp)[0]) < 1e-6);
}

TEST_CASE("shock-frame snapshots round trip", "[shockfit]") {
  const ShockFrameField& f = burgers_asym().sol.field;
  const std::string path = "test_shockfit_snapshot.bin";
  f.save(path);
  ShockFrameField g;
  REQUIRE(g.load(path));
  CHECK(g.n == f.n);
  CHECK(g.i == f.i);
  CHECK(g.T_eps == f.T_eps);
  CHECK(g.phi_start == f.phi_start);
  CHECK(g.t == f.t);
  CHECK(g.zabs == f.zabs);
  CHECK(g.active == f.active);
  CHECK(g.w_minus == f.w_minus);
  CHECK(g.w_plus == f.w_plus);
  CHECK(g.sample(1, 0.01, f.t[5])[0] == f.sample(1, 0.01, f.t[5])[0]);
  std::remove(path.c_str());
  ShockFrameField h;
  CHECK_FALSE(h.load("does_not_exist.bin"));
}
