// Acceptance run: one line per criterion. Library rows come from the scaling
// suite; closed forms and the equal-area path are recomputed here.

#include "shockforge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace shockforge;

namespace {

constexpr double kPi = std::numbers::pi;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunConfig base(const std::string& system, int family, const std::string& profile) {
  RunConfig c;
  c.system = system;
  c.family = family;
  c.profile.kind = profile;
  c.refine = false;
  c.weak_tests = 0;
  c.fv = "off";
  c.svg = false;
  return c;
}

RunArtifacts run(const RunConfig& cfg, double eps, StopAfter stop) {
  PipelineOptions po;
  po.stop = stop;
  po.write = false;
  po.log = &std::cerr;
  return run_pipeline(cfg, eps, "", po).artifacts;
}

struct Criterion {
  int id = 0;
  std::string title;
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& note) {
    pass = pass && ok;
    notes.push_back((ok ? "" : "FAILED ") + note);
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Every non-skipped row of the criterion must pass, and there must be at least one.
void take_rows(Criterion& c, const ScalingReport& rep, const std::vector<std::string>& names) {
  for (const std::string& name : names) {
    const ScalingRow* r = rep.find(name);
    if (!r || r->status == "skipped") {
      c.require(false, name + " produced no value");
      continue;
    }
    c.require(r->status == "pass", name + " = " + fmt(r->fitted) + " (target " + fmt(r->target) +
                                       (r->comparison == "abs" || r->comparison == "rel"
                                            ? " +- " + fmt(r->comparison == "rel" ? r->tolerance * std::abs(r->target)
                                                                                  : r->tolerance)
                                            : ", " + r->comparison) +
                                       "; " + r->detail + ")");
  }
}

// Polynomial extrapolation to zero through all samples, by Richardson tableau.
double richardson_zero(std::vector<double> h, std::vector<double> v) {
  const std::size_t m = h.size();
  std::vector<std::vector<double>> R(m, std::vector<double>(m));
  for (std::size_t k = 0; k < m; ++k) R[k][0] = v[k];
  for (std::size_t j = 1; j < m; ++j)
    for (std::size_t k = j; k < m; ++k)
      R[k][j] = R[k][j - 1] + (R[k][j - 1] - R[k - 1][j - 1]) * h[k] / (h[k - j] - h[k]);
  return R[m - 1][m - 1];
}

// Shock position for Burgers with u0 compressive on (a, b): the chord between the
// outer feet cuts equal areas off the multivalued profile.
double equal_area_oracle(const std::function<double(double)>& u0, const std::function<double(double)>& du0, double a,
                         double b, double t) {
  auto X = [&](double xi) { return xi + u0(xi) * t; };
  // fold labels bracketing the overturned region
  double fa = 0.0, fc = 0.0;
  bool in = false;
  const int N = 200000;
  for (int q = 0; q <= N; ++q) {
    const double xi = a + (b - a) * q / N;
    const bool folded = 1.0 + du0(xi) * t <= 0.0;
    if (folded && !in) fa = xi;
    if (!folded && in) fc = xi;
    in = folded;
  }
  auto foot = [&](double s, double lo, double hi) {
    for (int k = 0; k < 200; ++k) {
      const double m = 0.5 * (lo + hi);
      if (X(m) < s) lo = m;
      else hi = m;
    }
    return 0.5 * (lo + hi);
  };
  auto defect = [&](double s) {
    const double l = foot(s, a - 10.0, fa), r = foot(s, fc, b + 10.0);
    const int M = 20000;  // composite Simpson
    const double h = (r - l) / M;
    double area = u0(l) + u0(r);
    for (int k = 1; k < M; ++k) area += (k % 2 ? 4.0 : 2.0) * u0(l + k * h);
    return area * h / 3.0 - 0.5 * (u0(l) + u0(r)) * (r - l);
  };
  double lo = X(fc), hi = X(fa);
  const bool neg_lo = defect(lo) < 0.0;
  for (int k = 0; k < 80; ++k) {
    const double m = 0.5 * (lo + hi);
    if ((defect(m) < 0.0) == neg_lo) lo = m;
    else hi = m;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  std::vector<Criterion> C(11);
  const char* titles[] = {"",
                          "lifespan limit",
                          "cusp conditions",
                          "envelope law",
                          "jump scalings",
                          "Holder exponents and shock path",
                          "cubic jump relation",
                          "Rankine-Hugoniot and entropy",
                          "contraction",
                          "oracle equivalence",
                          "appendix diagnostics"};
  for (int k = 1; k <= 10; ++k) C[k] = {k, titles[k], true, {}};

  // Lifespan and cusp runs for criteria 1 and 2.
  const std::vector<double> sweep = {0.2, 0.1, 0.05, 0.025};
  std::vector<RunArtifacts> all;
  const auto t1 = std::chrono::steady_clock::now();
  double t2_seconds = 0.0;
  std::vector<RunArtifacts> burgers_sine, euler_sweep;
  for (double e : sweep) {
    const auto t = std::chrono::steady_clock::now();
    burgers_sine.push_back(run(base("burgers", 1, "sine"), e, StopAfter::Singularity));
    if (e == 0.1) t2_seconds += seconds_since(t);
  }
  for (double e : sweep) {
    const auto t = std::chrono::steady_clock::now();
    euler_sweep.push_back(run(base("euler3", 3, "hann"), e, StopAfter::Blowup));
    if (e == 0.05) t2_seconds += seconds_since(t);
  }
  const double t1_seconds = seconds_since(t1);

  {
    Criterion& c = C[1];
    double worst = 0.0;
    for (const RunArtifacts& a : burgers_sine) worst = std::max(worst, std::abs(a.epsilon * a.bp.T_eps - 1.0));
    // eps T = -1 / min u0' = 1 for u0 = -eps sin x
    c.require(worst < 1e-3, "burgers max |eps T - 1| = " + fmt(worst) + " (< 1e-3)");
    std::vector<double> h, v;
    for (auto it = euler_sweep.rbegin(); it != euler_sweep.rend(); ++it) {
      h.push_back(it->epsilon);
      v.push_back(it->epsilon * it->bp.T_eps);
    }
    const double ext = richardson_zero(h, v), target = -1.0 / euler_sweep.front().min_N;
    c.require(std::abs(ext / target - 1.0) < 0.05,
              "euler3 extrapolated eps T = " + fmt(ext) + " against -1/min N = " + fmt(target) + " (5%)");
    c.require(t1_seconds < 120.0, "runtime " + fmt(t1_seconds) + " s (< 120 s)");
  }
  {
    Criterion& c = C[2];
    const RunArtifacts& a = burgers_sine[1];
    // closed form at the foot xi = 0 of u0 = -eps sin x, labels taken at t0
    const double eps = a.epsilon, t0 = a.t_handoff, T = 1.0 / eps;
    const double yyy = eps * (T - t0) / std::pow(1.0 - eps * t0, 4), yt = -eps / (1.0 - eps * t0);
    const double dev = std::max({std::abs(a.bp.T_eps / T - 1.0), std::abs(a.bp.x_eps), std::abs(a.bp.phi_yyy / yyy - 1.0),
                                 std::abs(a.bp.phi_yt / yt - 1.0)});
    c.require(dev < 1e-3, "burgers closed-form T, x, phi_yyy, phi_yt relative deviation " + fmt(dev) + " (< 1e-3)");
    for (const RunArtifacts* r : {&a, static_cast<const RunArtifacts*>(&euler_sweep[2])}) {
      const BlowupPoint& b = r->bp;
      const double first = std::max(std::abs(b.phi_y), std::abs(b.phi_yy));
      c.require(first < 1e-6 && b.phi_yyy > 0.0 && b.phi_yt < 0.0,
                r->system + ": max(|phi_y|, |phi_yy|) = " + fmt(first) + ", phi_yyy = " + fmt(b.phi_yyy) +
                    ", phi_yt = " + fmt(b.phi_yt));
    }
    c.require(t2_seconds < 60.0, "runtime " + fmt(t2_seconds) + " s (< 60 s)");
  }

  // Shock runs.
  RunConfig eu = base("euler3", 3, "hann");
  eu.shock_nt = eu.shock_nz = 100;
  eu.refine = true;
  const RunArtifacts euler = run(eu, 0.05, StopAfter::All);

  RunConfig pc = base("p_system", 1, "hann");
  pc.shock_nt = pc.shock_nz = 100;
  pc.refine = true;
  pc.fv = "on";
  const RunArtifacts psys = run(pc, 0.1, StopAfter::All);

  RunConfig bc = base("burgers", 1, "skew");
  bc.z_ratio = bc.t_ratio = 1.05;
  bc.fv = "on";
  bc.weak_tests = 20;
  const RunArtifacts burgers = run(bc, 0.1, StopAfter::All);

  RunConfig sc = base("synthetic_3", 2, "hann");
  sc.shock_nt = sc.shock_nz = 100;
  const RunArtifacts synth = run(sc, 0.1, StopAfter::Shock);

  all.insert(all.end(), burgers_sine.begin(), burgers_sine.end());
  all.insert(all.end(), euler_sweep.begin(), euler_sweep.end());
  for (const RunArtifacts* a : {&euler, &psys, &burgers, &synth}) all.push_back(*a);
  const ScalingReport rep = scaling_suite(all);
  rep.write_json("acceptance_report.json");
  ScalingOptions single;
  single.require_two_eps = false;
  const ScalingReport eurep = scaling_suite({euler}, single);

  take_rows(C[1], rep, {"lifespan_analytic", "lifespan_limit"});
  take_rows(C[2], rep, {"cusp_first_derivatives", "cusp_signs", "cusp_burgers_analytic"});
  take_rows(C[3], rep, {"envelope_exponent", "envelope_coefficient"});
  // fitted on euler3 at eps = 0.05
  take_rows(C[4], eurep, {"jump_wi_exponent", "jump_wj_exponent"});
  take_rows(C[5], rep, {"holder_wi", "holder_wj", "shock_path_exponent"});
  take_rows(C[6], rep, {"cubic_slope", "cubic_refinement"});
  take_rows(C[7], rep, {"rh_residual", "lax_margins"});
  take_rows(C[8], rep, {"contraction_ratio", "iterations"});
  {
    std::vector<std::string> seen;
    for (const RunArtifacts& a : all)
      if (a.has_shock) seen.push_back(a.system);
    std::string list;
    for (const auto& s : seen) list += (list.empty() ? "" : ", ") + s;
    C[8].require(seen.size() == 4, "systems with a converged shock: " + list);
  }
  take_rows(C[9], rep, {"equal_area_path", "fv_shock_position", "weak_residual"});
  {
    ScalarProfile p;
    p.kind = "skew";
    const double eps = burgers.epsilon;
    auto u0 = [&](double x) { return eps * p.g(x); };
    auto du0 = [&](double x) { return eps * p.dg(x); };
    const ShockCurve& c = burgers.curve;
    double worst = 0.0;
    int checked = 0;
    for (std::size_t l = 0; l < c.t.size(); l += 4) {
      if (c.t[l] - c.T_eps < 0.05) continue;
      worst = std::max(worst, std::abs(equal_area_oracle(u0, du0, -kPi, kPi, c.t[l]) - c.phi[l]));
      ++checked;
    }
    C[9].require(worst < 1e-4, "independent equal-area path, " + std::to_string(checked) + " levels: max error " +
                                   fmt(worst) + " (< 1e-4)");
    C[9].require(psys.fv.done && burgers.fv.done, "finite volumes at " + std::to_string(bc.fv_cells) +
                                                      " cells on burgers and p_system");
  }
  take_rows(C[10], rep, {"appendix_separation", "appendix_C_hat"});

  bool all_pass = true;
  for (int k = 1; k <= 10; ++k) {
    const Criterion& c = C[k];
    all_pass = all_pass && c.pass;
    std::printf("criterion %2d %s  %s\n", k, c.pass ? "PASS" : "FAIL", c.title.c_str());
    for (const std::string& n : c.notes) std::printf("      %s\n", n.c_str());
  }
  std::printf("total %.1f s\n", seconds_since(start));
  return all_pass ? 0 : 3;
}
