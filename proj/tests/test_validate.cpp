#include <catch_amalgamated.hpp>

#include "shockforge/validate.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

using namespace shockforge;
using Catch::Approx;

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vec one(double v) {
  Vec out(1);
  out[0] = v;
  return out;
}

RowVec unit_row() {
  RowVec l(1);
  l[0] = 1.0;
  return l;
}

InitialData scalar_data(std::function<double(double)> g, std::function<double(double)> dg, double a, double b,
                        double eps) {
  InitialData d;
  d.epsilon = eps;
  d.a = a;
  d.b = b;
  d.profile = [g, a, b](double x) { return one(x >= a && x <= b ? g(x) : 0.0); };
  d.dprofile = [dg, a, b](double x) { return one(x >= a && x <= b ? dg(x) : 0.0); };
  return d;
}

// Classical Burgers solution by Newton on the characteristic foot.
double burgers_classical(const std::function<double(double)>& u0, const std::function<double(double)>& du0,
                         double x, double t) {
  double xi = x;
  for (int k = 0; k < 60; ++k) {
    const double r = xi + u0(xi) * t - x;
    xi -= r / (1.0 + du0(xi) * t);
    if (std::abs(r) < 1e-15) break;
  }
  return u0(xi);
}

// Burgers flux from the convex hull of u^2/2 between the states.
double burgers_riemann_flux(double ul, double ur) {
  if (ul <= ur) {
    if (ul <= 0.0 && ur >= 0.0) return 0.0;
    return std::min(0.5 * ul * ul, 0.5 * ur * ur);
  }
  return std::max(0.5 * ul * ul, 0.5 * ur * ur);
}

PiecewiseSolution riemann_states(double ul, double ur, double speed) {
  PiecewiseSolution s;
  s.n = 1;
  s.shock = [speed](double t) { return speed * t; };
  s.state = [ul, ur](double, double, int side) { return one(side < 0 ? ul : ur); };
  s.t_lo = 0.0;
  s.t_hi = 10.0;
  return s;
}

TestFunction straddle(double tc, double speed) {
  TestFunction f;
  f.tc = tc;
  f.rt = 0.3;
  f.rx = 0.4;
  f.speed = speed;
  f.xc = speed * tc + 0.05;
  return f;
}
}  // namespace

TEST_CASE("godunov flux matches the Riemann fan") {
  const FluxModel m = make_burgers();
  for (double ul : {-1.5, -0.3, 0.0, 0.4, 2.0})
    for (double ur : {-1.0, -0.2, 0.0, 0.7, 1.3})
      REQUIRE(godunov_flux(m, ul, ur) == Approx(burgers_riemann_flux(ul, ur)).margin(1e-14));
}

TEST_CASE("hll flux is consistent") {
  const FluxModel p = make_p_system();
  Vec u(2);
  u << 0.1, -0.2;
  REQUIRE((hll_flux(p, u, u) - p.f(u)).norm() < 1e-14);
}

TEST_CASE("finite volumes track a Riemann shock at speed one half") {
  const FluxModel m = make_burgers();
  InitialData d;
  d.epsilon = 1.0;
  d.a = -1.0;
  d.b = 0.0;
  d.profile = [](double x) { return one(x < 0.0 ? 1.0 : 0.0); };
  d.dprofile = [](double) { return one(0.0); };
  FVOptions o;
  o.x_lo = -1.0;
  o.x_hi = 2.0;
  for (int cells : {512, 2048}) {
    o.cells = cells;
    const FVSolution s = fv_reference(m, d, {0.5, 1.0, 2.0}, o);
    REQUIRE(s.scheme == "godunov");
    REQUIRE(s.conservation_defect < 1e-10);
    REQUIRE(s.max_step_defect < 1e-12);
    for (int lv = 0; lv < 3; ++lv) {
      const double x = s.shock_position(lv, unit_row(), -0.5, 1.5);
      REQUIRE(std::abs(x - 0.5 * s.t[lv]) < 2.0 * s.dx);
    }
  }
}

TEST_CASE("finite volumes converge at first order on smooth data") {
  const FluxModel m = make_burgers();
  auto g = [](double x) { return std::abs(x) < kPi ? -std::sin(x) : 0.0; };
  auto dg = [](double x) { return std::abs(x) < kPi ? -std::cos(x) : 0.0; };
  const double eps = 0.1, t = 2.0;
  const InitialData d = scalar_data(g, dg, -kPi, kPi, eps);
  auto u0 = [&](double x) { return eps * g(x); };
  auto du0 = [&](double x) { return eps * dg(x); };
  std::vector<double> err;
  for (int cells : {512, 1024, 2048}) {
    FVOptions o;
    o.cells = cells;
    o.x_lo = -4.0;
    o.x_hi = 4.0;
    const FVSolution s = fv_reference(m, d, {t}, o);
    double e = 0.0;
    for (int k = 0; k < cells; ++k) e += std::abs(s.u[0][k][0] - burgers_classical(u0, du0, s.x[k], t)) * s.dx;
    err.push_back(e);
  }
  REQUIRE(std::log2(err[0] / err[1]) == Approx(1.0).margin(0.15));
  REQUIRE(std::log2(err[1] / err[2]) == Approx(1.0).margin(0.15));
}

TEST_CASE("finite volume option errors") {
  const FluxModel m = make_burgers();
  const InitialData d = scalar_data([](double x) { return -std::sin(x); }, [](double x) { return -std::cos(x); },
                                    -kPi, kPi, 0.1);
  FVOptions o;
  o.cfl = 1.5;
  try {
    fv_reference(m, d, {1.0}, o);
    FAIL("expected CFLViolation");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::CFLViolation);
  }
  o.cfl = 0.9;
  o.cells = 100;
  REQUIRE_THROWS_AS(fv_reference(m, d, {1.0}, o), Error);
  o.cells = 512;
  o.scheme = "godunov";
  REQUIRE_THROWS_AS(fv_reference(make_p_system(), d, {1.0}, o), Error);
}

TEST_CASE("weak residual vanishes on a classical solution") {
  const FluxModel m = make_burgers();
  auto u0 = [](double x) { return -0.1 * std::sin(x); };
  auto du0 = [](double x) { return -0.1 * std::cos(x); };
  PiecewiseSolution s;
  s.n = 1;
  s.shock = [](double t) { return 0.3 * t - 0.2; };
  s.state = [&](double x, double t, int) { return one(burgers_classical(u0, du0, x, t)); };
  s.t_lo = 0.0;
  s.t_hi = 5.0;
  for (bool compact : {true, false}) {
    TestFunction f = straddle(1.5, 0.3);
    f.xc = 0.3 * 1.5 - 0.2;
    f.compact_in_time = compact;
    const WeakResidual r = weak_residual(m, s, f);
    REQUIRE(r.converged);
    REQUIRE(r.residual < 1e-9 * r.norm);
  }
}

TEST_CASE("weak residual detects the Rankine-Hugoniot speed") {
  const FluxModel m = make_burgers();
  for (bool compact : {true, false}) {
    TestFunction f = straddle(1.0, 0.5);
    f.compact_in_time = compact;
    const WeakResidual exact = weak_residual(m, riemann_states(1.0, 0.0, 0.5), f);
    REQUIRE(exact.residual < 1e-10 * exact.norm);
    // a wrong speed leaves [u] (s - sigma) times the integral of psi over the shock
    std::vector<double> shifts = {1e-3, 1e-2}, res;
    for (double ds : shifts) res.push_back(weak_residual(m, riemann_states(1.0, 0.0, 0.5 + ds), f).residual);
    REQUIRE(std::log10(res[1] / res[0]) == Approx(1.0).margin(0.1));
  }
}

TEST_CASE("equal-area oracle") {
  auto g = [](double x) { return std::abs(x) < kPi ? -std::sin(x) : 0.0; };
  auto dg = [](double x) { return std::abs(x) < kPi ? -std::cos(x) : 0.0; };
  // odd data keep the shock at the origin
  for (double t : {1.2, 2.0, 3.5}) REQUIRE(std::abs(equal_area_shock(g, dg, -kPi, kPi, t)) < 1e-10);
  REQUIRE_THROWS_AS(equal_area_shock(g, dg, -kPi, kPi, 0.5), Error);

  // skewed data against a fine Godunov run
  auto gs = [](double x) { return std::abs(x) < kPi ? -std::sin(x) + 0.3 * std::sin(x) * std::sin(x) : 0.0; };
  auto dgs = [](double x) { return std::abs(x) < kPi ? -std::cos(x) + 0.3 * std::sin(2.0 * x) : 0.0; };
  const InitialData d = scalar_data(gs, dgs, -kPi, kPi, 1.0);
  FVOptions o;
  o.cells = 8192;
  o.x_lo = -6.0;
  o.x_hi = 6.0;
  const FVSolution s = fv_reference(make_burgers(), d, {2.0, 3.0}, o);
  for (int lv = 0; lv < 2; ++lv) {
    const double x = equal_area_shock(gs, dgs, -kPi, kPi, s.t[lv]);
    REQUIRE(std::abs(x) > 0.01);
    REQUIRE(std::abs(s.shock_position(lv, unit_row(), x - 1.0, x + 1.0) - x) < 3.0 * s.dx);
  }
}

TEST_CASE("closed-form Burgers blowup") {
  const double eps = 0.1, t0 = 2.0;
  const InitialData d =
      scalar_data([](double x) { return -std::sin(x); }, [](double x) { return -std::cos(x); }, -kPi, kPi, eps);
  const BlowupPoint bp = burgers_blowup(d, t0);
  REQUIRE(bp.T_eps == Approx(1.0 / eps).epsilon(1e-12));
  REQUIRE(std::abs(bp.x_eps) < 1e-7);
  // at the foot xi = 0: u0' = -eps, u0''' = eps
  REQUIRE(bp.phi_yt == Approx(-eps / (1.0 - eps * t0)).epsilon(1e-9));
  REQUIRE(bp.phi_yyy == Approx(eps * (1.0 / eps - t0) / std::pow(1.0 - eps * t0, 4)).epsilon(1e-6));
}

TEST_CASE("extrapolation to zero is exact on polynomials") {
  const std::vector<double> e = {0.2, 0.1, 0.05, 0.025};
  std::vector<double> v;
  for (double x : e) v.push_back(1.7 - 0.4 * x + 3.0 * x * x - 2.0 * x * x * x);
  REQUIRE(extrapolate_to_zero(e, v) == Approx(1.7).epsilon(1e-12));
  REQUIRE(extrapolate_to_zero({0.1}, {2.5}) == 2.5);
}

TEST_CASE("scaling suite rows") {
  auto make_run = [](double eps) {
    RunArtifacts a;
    a.system = "toy";
    a.epsilon = eps;
    a.min_N = -0.5;
    a.analytic_eps_T = 2.0;
    a.bp.T_eps = (2.0 + 0.3 * eps) / eps;
    a.bp.phi_y = 1e-9;
    a.bp.phi_yy = -2e-9;
    a.bp.phi_yyy = 1.0;
    a.bp.phi_yt = -0.5;
    return a;
  };
  std::vector<RunArtifacts> runs = {make_run(0.1), make_run(0.05)};
  REQUIRE_THROWS_AS(scaling_suite({runs[0]}), Error);
  REQUIRE_THROWS_AS(scaling_suite({}), Error);

  runs[0].weak.done = true;
  runs[0].weak.count = 10;
  runs[0].weak.worst_ratio = 1e-9;
  const ScalingReport rep = scaling_suite(runs);

  const ScalingRow* lim = rep.find("lifespan_limit");
  REQUIRE(lim != nullptr);
  REQUIRE(lim->status == "pass");
  REQUIRE(lim->fitted == Approx(1.0).epsilon(1e-12));
  // eps T = 2 + 0.3 eps misses the analytic value by 1.5 percent
  REQUIRE(rep.find("lifespan_analytic")->status == "fail");
  REQUIRE(rep.find("lifespan_analytic")->fitted == Approx(1.015));
  REQUIRE(rep.find("cusp_first_derivatives")->status == "pass");
  REQUIRE(rep.find("cusp_signs")->status == "pass");
  REQUIRE(rep.find("cusp_signs")->fitted == Approx(0.5));
  REQUIRE(rep.find("cusp_burgers_analytic")->status == "skipped");
  REQUIRE(rep.find("jump_wi_exponent")->status == "skipped");
  // too few test functions count as a failure
  REQUIRE(rep.find("weak_residual")->status == "fail");
  REQUIRE_FALSE(rep.all_pass());
  REQUIRE(rep.find("no_such_row") == nullptr);

  for (int c = 1; c <= 10; ++c) {
    bool seen = false;
    for (const ScalingRow& r : rep.rows) seen = seen || r.criterion == c;
    REQUIRE(seen);
  }

  const std::string path = "scaling_rows_test.json";
  rep.write_json(path);
  std::ifstream is(path);
  const nlohmann::json j = nlohmann::json::parse(is);
  REQUIRE(j["all_pass"] == false);
  REQUIRE(j["rows"].size() == rep.rows.size());
  REQUIRE(j["rows"][0]["name"] == "lifespan_analytic");
  std::remove(path.c_str());
}

TEST_CASE("holder rows need three decades") {
  auto run = [](double eps, double decades) {
    RunArtifacts a;
    a.system = "toy";
    a.epsilon = eps;
    a.min_N = kNaN;
    a.bp.phi_yyy = 1.0;
    a.bp.phi_yt = -1.0;
    a.has_holder = true;
    HolderFit f;
    f.quantity = "w_i";
    f.slope = 1.0 / 6.0;
    f.decades = decades;
    a.holder.fits.push_back(f);
    return a;
  };
  REQUIRE(scaling_suite({run(0.1, 4.0), run(0.05, 4.0)}).find("holder_wi")->status == "pass");
  REQUIRE(scaling_suite({run(0.1, 4.0), run(0.05, 2.0)}).find("holder_wi")->status == "fail");
}

TEST_CASE("fitted Burgers shock is a weak solution") {
  const double eps = 0.1;
  ScalarProfile p;
  p.kind = "skew";
  const NormalizedSystem ns = build_transform(make_burgers(), 0);
  const InitialData data = make_wave_data(p, ns.ri0, eps);
  const Lifespan ls = lifespan_estimate(ns, data);
  const SmoothPhase sp = smooth_evolve(ns, data, 0.5 * ls.T_hat);
  CharGrid grid = solve_blowup_system(ns, sp, ls.T_hat);
  grid.ns = &ns;
  const BlowupPoint bp = detect_blowup(grid);
  const EnvelopeBranches br = envelope_branches(phi_field(grid), bp, 1e-4, 1.0, 64);
  const PreshockCurve pc = preshock_curve(grid, bp, br, 1.0, 100);
  ShockfitOptions o;
  o.epsilon = eps;
  o.z_ratio = 1.05;
  o.t_ratio = 1.05;
  const ShockSolution sol = iterate_to_convergence(ns, init_first_approximation(grid, bp, br, pc, o), o);
  REQUIRE(sol.diag.converged);

  const PiecewiseSolution fit = piecewise_from_shockfit(ns, sol);
  const PiecewiseSolution moved = piecewise_from_shockfit(ns, sol, 1e-3);
  REQUIRE(std::abs(moved.shock(fit.t_hi) - fit.shock(fit.t_hi) - 1e-3 * (fit.t_hi - fit.t_lo)) < 1e-12);
  const std::vector<TestFunction> tests = straddling_tests(sol, 4, 11);
  REQUIRE(tests.size() == 4);
  for (const TestFunction& f : tests) {
    REQUIRE(f.tc - f.rt > fit.t_lo);
    REQUIRE(f.tc + f.rt < fit.t_hi);
    REQUIRE(std::abs(f.xc - fit.shock(f.tc)) < f.rx);
    const WeakResidual r = weak_residual(ns.model, fit, f);
    REQUIRE(r.converged);
    REQUIRE(r.residual < 1e-7 * r.norm);
    REQUIRE(weak_residual(ns.model, moved, f).residual > 10.0 * r.residual);
  }
}

TEST_CASE("power correction fit recovers the exponent under an affine offset") {
  std::vector<double> tau, y;
  for (int k = 0; k <= 60; ++k) {
    const double s = 1e-3 * std::pow(500.0, k / 60.0);
    tau.push_back(s);
    y.push_back(0.3 - 0.7 * s + 2e-3 * std::pow(s, 2.3) * (1.0 + 1e-6 * std::sin(37.0 * k)) + 5e-4 * std::pow(s, 3.3));
  }
  const PowerCorrection f = fit_power_correction(tau, y);
  REQUIRE(f.p == Approx(2.3).margin(1e-3));
  REQUIRE(f.a == Approx(0.3).epsilon(1e-9));
  REQUIRE(f.b == Approx(-0.7).epsilon(1e-6));
  REQUIRE(f.c == Approx(2e-3).epsilon(1e-2));
  REQUIRE(f.d == Approx(5e-4).epsilon(1e-2));
}
