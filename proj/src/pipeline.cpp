#include "shockforge/pipeline.hpp"

#include "shockforge/numerics.hpp"
#include "shockforge/svg.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace shockforge {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

StageFailure::StageFailure(const std::string& stage, const Error& cause)
    : Error(cause.kind(), "stage '" + stage + "': " + cause.what()), stage_(stage) {}

namespace {

ojson num(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

ojson vec_json(const Vec& v) {
  ojson a = ojson::array();
  for (int k = 0; k < v.size(); ++k) a.push_back(num(v[k]));
  return a;
}

void write_json(const fs::path& path, const ojson& j) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Config, "cannot write " + path.string());
  os << j.dump(2) << "\n";
}

std::ofstream open_csv(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Config, "cannot write " + path.string());
  os.precision(17);
  return os;
}

ojson blowup_json(const BlowupPoint& bp) {
  ojson j;
  j["T_eps"] = num(bp.T_eps);
  j["x_eps"] = num(bp.x_eps);
  j["y_eps"] = num(bp.y_eps);
  j["lambda"] = num(bp.lambda_at_bp);
  j["phi_y"] = num(bp.phi_y);
  j["phi_yy"] = num(bp.phi_yy);
  j["phi_yyy"] = num(bp.phi_yyy);
  j["phi_yt"] = num(bp.phi_yt);
  j["phi_yyt"] = num(bp.phi_yyt);
  j["t_first_zero"] = num(bp.t_first_zero);
  j["newton_iterations"] = bp.newton_iterations;
  if (bp.u.size()) j["u"] = vec_json(bp.u);
  if (bp.w.size()) j["w"] = vec_json(bp.w);
  return j;
}

ojson rows_json(const ScalingReport& rep) {
  ojson rows = ojson::array();
  for (const ScalingRow& r : rep.rows) {
    ojson o;
    o["criterion"] = r.criterion;
    o["name"] = r.name;
    o["comparison"] = r.comparison;
    o["target"] = num(r.target);
    o["tolerance"] = num(r.tolerance);
    o["fitted"] = num(r.fitted);
    o["stderr"] = num(r.stderr_fit);
    o["status"] = r.status;
    o["detail"] = r.detail;
    rows.push_back(o);
  }
  return rows;
}

class Timer {
 public:
  explicit Timer(std::ostream* log, std::map<std::string, double>& sink, std::string tag)
      : log_(log), sink_(sink), tag_(std::move(tag)) {}

  template <class F>
  auto stage(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto done = [&] {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      sink_[name] += s;
      if (log_) {
        std::ostringstream os;
        os << "[" << tag_ << "] " << name << " " << std::fixed;
        os.precision(2);
        os << s << " s\n";
        static std::mutex m;
        std::lock_guard<std::mutex> lock(m);
        *log_ << os.str() << std::flush;
      }
    };
    try {
      if constexpr (std::is_void_v<decltype(f())>) {
        f();
        done();
      } else {
        auto r = f();
        done();
        return r;
      }
    } catch (const StageFailure&) {
      throw;
    } catch (const Error& e) {
      throw StageFailure(name, e);
    } catch (const std::exception& e) {
      throw StageFailure(name, Error(ErrorKind::StepFailure, e.what()));
    }
  }

 private:
  std::ostream* log_;
  std::map<std::string, double>& sink_;
  std::string tag_;
};

NormalizedSystem normalized_system(const RunConfig& cfg) {
  const FluxModel model = cfg.model();
  if (cfg.family < 1 || cfg.family > model.n)
    throw Error(ErrorKind::Config, "field 'system.family': no family " + std::to_string(cfg.family) + " in a " +
                                       std::to_string(model.n) + "-component system");
  NormalizeOptions no;
  no.u_box = cfg.u_box;
  if (cfg.cache_dir.empty() || model.n < 2) return build_transform(model, cfg.index(), no);
  NormalizeOptions bare = no;
  bare.use_chart = false;
  NormalizedSystem ns = build_transform(model, cfg.index(), bare);
  const std::string key = transform_cache_key(ns);
  std::ostringstream name;
  name << "transform_" << std::hex << std::hash<std::string>{}(key) << ".bin";
  const fs::path path = fs::path(cfg.cache_dir) / name.str();
  if (load_transform_cache(ns, path.string())) return ns;
  ns = build_transform(model, cfg.index(), no);
  fs::create_directories(cfg.cache_dir);
  save_transform_cache(ns, path.string());
  return ns;
}

InitialData initial_data(const RunConfig& cfg, const NormalizedSystem& ns, double eps) {
  return make_wave_data(cfg.profile, ns.ri0, eps);
}

CharsolveOptions charsolve_options(const RunConfig& cfg) {
  CharsolveOptions o;
  o.nx_smooth = cfg.nx_smooth;
  o.ny = cfg.ny;
  o.nt_fine = cfg.nt_fine;
  o.delta_ext = cfg.delta_ext;
  return o;
}

ShockfitOptions shockfit_options(const RunConfig& cfg, double eps, bool refined) {
  ShockfitOptions o;
  o.epsilon = eps;
  o.delta_start = cfg.delta_start;
  o.t_span = cfg.delta_ext;
  o.rh_tol = cfg.rh_tol;
  o.conv_tol = cfg.conv_tol;
  o.nt_uniform = cfg.shock_nt;
  o.nz_uniform = cfg.shock_nz;
  o.z_ratio = cfg.z_ratio;
  o.t_ratio = cfg.t_ratio;
  if (refined) {
    // every spacing halved
    o.nt_uniform *= 2;
    o.nz_uniform *= 2;
    o.z_ratio = 1.0 + 0.5 * (o.z_ratio - 1.0);
    o.t_ratio = 1.0 + 0.5 * (o.t_ratio - 1.0);
    o.z_h0 *= 0.5;
  }
  return o;
}

bool fv_enabled(const RunConfig& cfg, int n) { return cfg.fv == "on" || (cfg.fv == "auto" && n <= 2); }

void write_envelope(const fs::path& dir, const EnvelopeBranches& br, const BlowupPoint& bp, bool svg) {
  std::ofstream os = open_csv(dir / "envelope.csv");
  os << "t,tau,y_center,eta_minus,eta_plus,x_minus,x_plus\n";
  Series lo{"x_minus - x_eps", {}, {}}, hi{"x_plus - x_eps", {}, {}};
  for (const EnvelopeSample& s : br.samples) {
    os << s.t << ',' << s.t - bp.T_eps << ',' << s.y_center << ',' << s.eta_minus << ',' << s.eta_plus << ','
       << s.x_minus << ',' << s.x_plus << '\n';
    lo.x.push_back(s.t - bp.T_eps);
    lo.y.push_back(s.x_minus - bp.x_eps - bp.lambda_at_bp * (s.t - bp.T_eps));
    hi.x.push_back(s.t - bp.T_eps);
    hi.y.push_back(s.x_plus - bp.x_eps - bp.lambda_at_bp * (s.t - bp.T_eps));
  }
  if (svg) {
    lo.label = "x_minus (moving frame)";
    hi.label = "x_plus (moving frame)";
    write_svg((dir / "envelope.svg").string(), {"characteristic envelope", "t - T_eps", "x - x_eps - lambda tau"},
              {lo, hi});
  }
}

ojson cusp_json(const CuspChart& c) {
  ojson j;
  j["A_slope"] = num(c.A_slope);
  j["A_curv"] = num(c.A_curv);
  j["B_at_T"] = num(c.B_at_T);
  j["B_slope"] = num(c.B_slope);
  j["width_exponent"] = num(c.width_exponent);
  j["width_coef"] = num(c.width_coef);
  j["normalized_coef"] = num(c.normalized_coef);
  j["eta_exponent"] = num(c.eta_exponent);
  j["eta_normalized"] = num(c.eta_normalized);
  j["max_reconstruction"] = num(c.max_reconstruction);
  return j;
}

ojson holder_json(const HolderReport& h) {
  ojson a = ojson::array();
  for (const HolderFit& f : h.fits) {
    ojson o;
    o["quantity"] = f.quantity;
    o["slope"] = num(f.slope);
    o["target"] = num(f.target);
    o["decades"] = num(f.decades);
    o["points"] = f.points;
    a.push_back(o);
  }
  return a;
}

ojson cubic_json(const CubicJumpReport& c) {
  ojson j;
  j["noise_floor"] = num(c.noise_floor);
  j["families"] = ojson::array();
  for (const auto& f : c.families) {
    ojson o;
    o["j"] = f.j + 1;
    o["limit"] = num(f.limit);
    o["max_abs"] = num(f.max_abs);
    o["spread"] = num(f.spread);
    o["slope"] = num(f.slope);
    o["points"] = f.points;
    j["families"].push_back(o);
  }
  return j;
}

ojson appendix_json(const AppendixReport& a) {
  ojson j;
  j["separation_c"] = num(a.separation_c);
  j["C_hat"] = num(a.C_hat);
  j["max_integral"] = num(a.max_integral);
  j["paths"] = a.paths;
  return j;
}

void write_shock(const fs::path& dir, const std::string& prefix, const ShockSolution& sol, const CubicJumpReport& cubic,
                 const AppendixReport& app, int i, bool svg) {
  sol.curve.write_csv((dir / (prefix + "curve.csv")).string());
  sol.diag.write_json((dir / (prefix + "iterates.json")).string());
  write_json(dir / (prefix + "cubic.json"), cubic_json(cubic));
  write_json(dir / (prefix + "appendix.json"), appendix_json(app));
  if (!svg) return;
  const ShockCurve& c = sol.curve;
  const int n = c.jumps.empty() ? 0 : static_cast<int>(c.jumps.front().size());
  std::vector<Series> js;
  for (int j = 0; j < n; ++j) {
    Series s{"|[w_" + std::to_string(j + 1) + "]|" + (j == i ? " (compressed)" : ""), {}, {}};
    for (std::size_t l = 0; l < c.t.size(); ++l) {
      s.x.push_back(c.t[l] - c.T_eps);
      s.y.push_back(std::abs(c.jumps[l][j]));
    }
    js.push_back(s);
  }
  write_svg((dir / (prefix + "jumps.svg")).string(), {"jumps across the shock", "t - T_eps", "|[w]|", true, true},
            js);
  Series it{"weighted difference", {}, {}};
  for (std::size_t m = 0; m < sol.diag.weighted.size(); ++m) {
    it.x.push_back(static_cast<double>(m + 1));
    it.y.push_back(sol.diag.weighted[m]);
  }
  write_svg((dir / (prefix + "iterates.svg")).string(), {"Picard iterates", "iterate", "sup difference", false, true},
            {it});
}

FVComparison fv_comparison(const NormalizedSystem& ns, const InitialData& data, const ShockCurve& c,
                           const BlowupPoint& bp, int cells, double span, const fs::path* dir, bool svg) {
  FVComparison out;
  std::vector<double> ts;
  for (int k = 0; k < 20; ++k) ts.push_back(bp.T_eps + 0.05 * span + 0.95 * span * k / 19.0);
  FVOptions o;
  o.cells = cells;
  const FVSolution fv = fv_reference(ns.model, data, ts, o);
  const MonotoneCubic phi(c.t, c.phi);
  out.done = true;
  out.dx = fv.dx;
  out.conservation_defect = fv.conservation_defect;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double xf = phi(ts[k]);
    const double xv = fv.shock_position(static_cast<int>(k), ns.at0.l(ns.i), xf - 1.0, xf + 1.0);
    out.t.push_back(ts[k]);
    out.x_fv.push_back(xv);
    out.x_fit.push_back(xf);
    out.max_cells = std::max(out.max_cells, std::abs(xv - xf) / fv.dx);
  }
  if (dir) {
    std::ofstream os = open_csv(*dir / "fv_comparison.csv");
    os << "t,x_fv,x_shockfit,cells\n";
    for (std::size_t k = 0; k < out.t.size(); ++k)
      os << out.t[k] << ',' << out.x_fv[k] << ',' << out.x_fit[k] << ',' << (out.x_fv[k] - out.x_fit[k]) / fv.dx
         << '\n';
    fv.write_csv((*dir / "fv_levels.csv").string(), std::max(1, cells / 1024));
    if (svg)
      write_svg((*dir / "fv_comparison.svg").string(), {"shock position", "t", "x"},
                {{"finite volumes", out.t, out.x_fv}, {"shock fit", out.t, out.x_fit}});
  }
  return out;
}

WeakSummary weak_summary(const NormalizedSystem& ns, const ShockSolution& sol, int count, std::uint64_t seed,
                         const fs::path* dir) {
  WeakSummary w;
  if (count <= 0) return w;
  const PiecewiseSolution pw = piecewise_from_shockfit(ns, sol);
  const std::vector<TestFunction> tests = straddling_tests(sol, count, seed);
  w.done = true;
  w.count = count;
  for (const TestFunction& f : tests) {
    const WeakResidual r = weak_residual(ns.model, pw, f);
    w.rows.push_back(r);
    w.worst_ratio = std::max(w.worst_ratio, r.norm > 0.0 ? r.residual / r.norm : INFINITY);
  }
  // one bump moved off the shock, and the first one against a perturbed speed
  TestFunction off = tests.front();
  off.xc += 2.5 * off.rx;
  const WeakResidual rs = weak_residual(ns.model, pw, off);
  w.smooth_residual = rs.residual / rs.norm;
  const double r3 = weak_residual(ns.model, piecewise_from_shockfit(ns, sol, 1e-3), tests.front()).residual;
  const double r2 = weak_residual(ns.model, piecewise_from_shockfit(ns, sol, 1e-2), tests.front()).residual;
  w.shifted_slope = std::log10(r2 / r3);
  if (dir) {
    std::ofstream os = open_csv(*dir / "weak_residual.csv");
    os << "xc,tc,rx,rt,speed,compact_in_time,residual,norm,ratio,panels,converged\n";
    for (std::size_t k = 0; k < tests.size(); ++k) {
      const TestFunction& f = tests[k];
      const WeakResidual& r = w.rows[k];
      os << f.xc << ',' << f.tc << ',' << f.rx << ',' << f.rt << ',' << f.speed << ',' << f.compact_in_time << ','
         << r.residual << ',' << r.norm << ',' << r.residual / r.norm << ',' << r.panels << ',' << r.converged
         << '\n';
    }
  }
  return w;
}

EqualAreaComparison equal_area(const InitialData& data, const ShockCurve& c, double tau_from, const fs::path* dir) {
  EqualAreaComparison e;
  auto u0 = [&](double x) { return data.u(x)[0]; };
  auto du0 = [&](double x) { return data.epsilon * data.dprofile(x)[0]; };
  for (std::size_t l = 0; l < c.t.size(); ++l) {
    if (c.t[l] - c.T_eps < tau_from) continue;
    const double s = equal_area_shock(u0, du0, data.a, data.b, c.t[l]);
    e.t.push_back(c.t[l]);
    e.x_oracle.push_back(s);
    e.x_fit.push_back(c.phi[l]);
    e.max_error = std::max(e.max_error, std::abs(s - c.phi[l]));
  }
  e.done = true;
  if (dir) {
    std::ofstream os = open_csv(*dir / "equal_area.csv");
    os << "t,x_equal_area,x_shockfit,error\n";
    for (std::size_t k = 0; k < e.t.size(); ++k)
      os << e.t[k] << ',' << e.x_oracle[k] << ',' << e.x_fit[k] << ',' << e.x_fit[k] - e.x_oracle[k] << '\n';
  }
  return e;
}

void write_smooth(const fs::path& dir, const SmoothPhase& sp, const Lifespan& ls, double eps, int n) {
  std::ofstream os = open_csv(dir / "handoff.csv");
  os << "x";
  for (int c = 0; c < n; ++c) os << ",u_" << c + 1;
  os << '\n';
  for (std::size_t k = 0; k < sp.x.size(); ++k) {
    os << sp.x[k];
    for (int c = 0; c < n; ++c) os << ',' << sp.u[k][c];
    os << '\n';
  }
  ojson j;
  j["epsilon"] = eps;
  j["T_hat"] = num(ls.T_hat);
  j["eps_T_hat"] = num(eps * ls.T_hat);
  j["x0"] = num(ls.seed.x0);
  j["N"] = vec_json(ls.seed.N);
  j["min_N"] = num(ls.seed.N.minCoeff());
  j["Hpp"] = num(ls.seed.Hpp);
  j["margin"] = num(ls.seed.margin);
  j["warnings"] = ls.seed.warnings;
  j["t0"] = num(sp.t0);
  j["min_K"] = num(sp.min_K);
  j["sup_u"] = num(sp.sup_u);
  write_json(dir / "lifespan.json", j);
}

ojson report_json(const RunConfig& cfg, const RunArtifacts& a, const ScalingReport& rep) {
  ojson j;
  j["system"] = cfg.system;
  j["family"] = cfg.family;
  j["profile"] = cfg.profile.kind;
  j["epsilon"] = a.epsilon;
  j["all_pass"] = rep.all_pass();
  ojson s;
  s["T_eps"] = num(a.bp.T_eps);
  s["eps_T_eps"] = num(a.epsilon * a.bp.T_eps);
  s["minus_inverse_min_N"] = num(-1.0 / a.min_N);
  s["x_eps"] = num(a.bp.x_eps);
  if (a.has_shock) {
    s["iterations"] = a.diag.iterations;
    s["converged"] = a.diag.converged;
    s["entropy_margin"] = num(a.curve.entropy_margin);
  }
  j["summary"] = s;
  j["rows"] = rows_json(rep);
  return j;
}

}  // namespace

RunResult run_pipeline(const RunConfig& cfg, double eps, const std::string& dir, const PipelineOptions& opts) {
  RunResult res;
  res.dir = dir;
  RunArtifacts& a = res.artifacts;
  std::ostringstream tagos;
  tagos << cfg.system << " eps=" << eps;
  Timer timer(opts.log, a.seconds, tagos.str());
  const fs::path root(dir);
  const bool write = opts.write && !dir.empty();
  auto sub = [&](const char* name) {
    const fs::path p = root / name;
    if (write) fs::create_directories(p);
    return p;
  };

  NormalizedSystem ns = timer.stage("normalize", [&] { return normalized_system(cfg); });
  const InitialData data = initial_data(cfg, ns, eps);
  a.system = cfg.system;
  a.profile = cfg.profile.kind;
  a.n = ns.model.n;
  a.i = ns.i;
  a.epsilon = eps;

  const Lifespan ls = timer.stage("lifespan", [&] { return lifespan_estimate(ns, data); });
  a.min_N = ls.seed.N.minCoeff();
  const CharsolveOptions co = charsolve_options(cfg);
  const SmoothPhase sp = timer.stage("smooth", [&] { return smooth_evolve(ns, data, co.t0_frac * ls.T_hat, co); });
  a.t_handoff = sp.t0;
  if (write) write_smooth(sub("smooth"), sp, ls, eps, ns.model.n);
  CharGrid grid = timer.stage("chargrid", [&] { return solve_blowup_system(ns, sp, ls.T_hat, co); });
  grid.ns = &ns;
  DetectOptions dopt;
  dopt.newton_tol = cfg.newton_tol;
  a.bp = timer.stage("detect", [&] { return detect_blowup(grid, dopt); });
  if (ns.model.n == 1) {
    a.exact_blowup = timer.stage("detect", [&] { return burgers_blowup(data, sp.t0); });
    a.has_exact_blowup = cfg.system == "burgers";
    if (a.has_exact_blowup) a.analytic_eps_T = eps * a.exact_blowup.T_eps;
  }
  if (write) {
    const fs::path d = sub("chargrid");
    grid.write_csv((d / "grid.csv").string(), std::max(1, (cfg.ny - 1) / 128), 4);
    ojson j = blowup_json(a.bp);
    if (a.has_exact_blowup) j["closed_form"] = blowup_json(a.exact_blowup);
    write_json(d / "blowup.json", j);
  }

  auto finish = [&] {
    ScalingOptions so;
    so.require_two_eps = false;
    res.report = scaling_suite({a}, so);
    if (write) write_json(root / "report.json", report_json(cfg, a, res.report));
    return res;
  };
  if (opts.stop == StopAfter::Blowup) return finish();

  const PhiField field = phi_field(grid);
  const EnvelopeBranches br =
      timer.stage("envelope", [&] { return envelope_branches(field, a.bp, 1e-4, cfg.delta_ext, 64); });
  a.cusp = timer.stage("envelope", [&] { return cusp_chart(br, a.bp); });
  a.has_cusp = true;
  const PreshockCurve pc = timer.stage("preshock", [&] { return preshock_curve(grid, a.bp, br, cfg.delta_ext, 100); });
  a.holder = timer.stage("holder", [&] { return holder_probe(grid, a.bp, br); });
  a.has_holder = true;
  if (write) {
    const fs::path d = sub("singularity");
    write_envelope(d, br, a.bp, cfg.svg);
    write_json(d / "cusp.json", cusp_json(a.cusp));
    write_json(d / "holder.json", holder_json(a.holder));
    std::ofstream os = open_csv(d / "preshock.csv");
    os << "t,phi0,x_minus,x_plus\n";
    for (std::size_t k = 0; k < pc.t.size(); ++k)
      os << pc.t[k] << ',' << pc.phi0[k] << ',' << pc.x_minus[k] << ',' << pc.x_plus[k] << '\n';
  }
  if (opts.stop == StopAfter::Singularity) return finish();

  const ShockfitOptions so = shockfit_options(cfg, eps, false);
  const ShockSolution sol = timer.stage(
      "shockfit", [&] { return iterate_to_convergence(ns, init_first_approximation(grid, a.bp, br, pc, so), so); });
  a.has_shock = true;
  a.curve = sol.curve;
  a.diag = sol.diag;
  a.cubic = cubic_jump_diagnostic(sol.curve, ns.i);
  a.appendix = timer.stage("appendix", [&] { return appendix_diagnostics(ns, sol, eps); });
  const fs::path shock_dir = write ? sub("shock") : fs::path();
  if (write) write_shock(shock_dir, "", sol, a.cubic, a.appendix, ns.i, cfg.svg);
  if (cfg.refine) {
    const ShockfitOptions ro = shockfit_options(cfg, eps, true);
    const ShockSolution ref = timer.stage(
        "refine", [&] { return iterate_to_convergence(ns, init_first_approximation(grid, a.bp, br, pc, ro), ro); });
    a.has_refined = true;
    a.refined_curve = ref.curve;
    a.refined_diag = ref.diag;
    a.refined_cubic = cubic_jump_diagnostic(ref.curve, ns.i);
    a.refined_appendix = timer.stage("refine", [&] { return appendix_diagnostics(ns, ref, eps); });
    if (write) write_shock(shock_dir, "refined_", ref, a.refined_cubic, a.refined_appendix, ns.i, false);
  }
  if (opts.stop == StopAfter::Shock) return finish();

  const fs::path vdir = write ? sub("validate") : fs::path();
  const fs::path* vp = write ? &vdir : nullptr;
  timer.stage("validate", [&] {
    if (fv_enabled(cfg, ns.model.n))
      a.fv = fv_comparison(ns, data, sol.curve, a.bp, cfg.fv_cells, cfg.delta_ext, vp, cfg.svg);
    a.weak = weak_summary(ns, sol, cfg.weak_tests, cfg.weak_seed, vp);
    if (cfg.system == "burgers") a.equal_area = equal_area(data, sol.curve, 0.05, vp);
  });
  return finish();
}

std::string eps_dirname(double eps) {
  std::ostringstream os;
  os << "eps_" << eps;
  return os.str();
}

int thread_cap() {
  int cap = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("SHOCKFORGE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end == '\0' && v >= 1) cap = static_cast<int>(v);
  }
  return cap;
}

SweepResult run_sweep(const RunConfig& cfg, const std::vector<double>& eps, const std::string& dir, int threads,
                      const PipelineOptions& opts) {
  if (eps.empty()) throw Error(ErrorKind::Config, "field 'data.epsilon': the list of amplitudes is empty");
  SweepResult out;
  out.runs.resize(eps.size());
  std::vector<std::exception_ptr> errors(eps.size());
  const int workers = std::max(1, std::min<int>(threads > 0 ? threads : thread_cap(), static_cast<int>(eps.size())));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k; (k = next++) < eps.size();) {
      try {
        const std::string sub = dir.empty() ? std::string() : (fs::path(dir) / eps_dirname(eps[k])).string();
        out.runs[k] = run_pipeline(cfg, eps[k], sub, opts);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<RunArtifacts> arts;
  for (const auto& r : out.runs) arts.push_back(r.artifacts);
  ScalingOptions so;
  so.require_two_eps = eps.size() >= 2;
  out.report = scaling_suite(arts, so);

  std::vector<std::pair<double, const RunArtifacts*>> sorted;
  for (const auto& a : arts) sorted.emplace_back(a.epsilon, &a);
  std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<double> e, v;
  for (const auto& [ep, a] : sorted) {
    e.push_back(ep);
    v.push_back(ep * a->bp.T_eps);
  }
  out.extrapolated_eps_T = extrapolate_to_zero(e, v);
  out.predicted_eps_T = -1.0 / sorted.front().second->min_N;

  if (!dir.empty() && opts.write) {
    const fs::path root(dir);
    fs::create_directories(root);
    std::ofstream os = open_csv(root / "lifespan.csv");
    os << "eps,T_eps,eps_T_eps,minus_inverse_min_N\n";
    for (const auto& [ep, a] : sorted) os << ep << ',' << a->bp.T_eps << ',' << ep * a->bp.T_eps << ',' << -1.0 / a->min_N << '\n';
    ojson j;
    j["system"] = cfg.system;
    j["eps"] = e;
    j["eps_T_eps"] = v;
    j["extrapolated_eps_T"] = num(out.extrapolated_eps_T);
    j["predicted_eps_T"] = num(out.predicted_eps_T);
    j["relative_gap"] = num(out.extrapolated_eps_T / out.predicted_eps_T - 1.0);
    write_json(root / "lifespan.json", j);
    ojson r;
    r["all_pass"] = out.report.all_pass();
    r["runs"] = ojson::array();
    for (double ep : eps) r["runs"].push_back(eps_dirname(ep));
    r["rows"] = rows_json(out.report);
    write_json(root / "scaling_report.json", r);
    if (cfg.svg) {
      Series s{"eps T_eps", e, v};
      Series p{"-1 / min N", {0.0, e.back()}, {out.predicted_eps_T, out.predicted_eps_T}};
      write_svg((root / "lifespan.svg").string(), {"lifespan", "eps", "eps T_eps"}, {s, p});
    }
  }
  return out;
}

std::vector<ClassifiedPoint> classify_points(const RunConfig& cfg, double eps,
                                             const std::vector<std::pair<double, double>>& points) {
  std::map<std::string, double> sink;
  Timer timer(nullptr, sink, "");
  NormalizedSystem ns = timer.stage("normalize", [&] { return normalized_system(cfg); });
  const InitialData data = initial_data(cfg, ns, eps);
  const Lifespan ls = timer.stage("lifespan", [&] { return lifespan_estimate(ns, data); });
  const CharsolveOptions co = charsolve_options(cfg);
  const SmoothPhase sp = timer.stage("smooth", [&] { return smooth_evolve(ns, data, co.t0_frac * ls.T_hat, co); });
  CharGrid grid = timer.stage("chargrid", [&] { return solve_blowup_system(ns, sp, ls.T_hat, co); });
  grid.ns = &ns;
  DetectOptions dopt;
  dopt.newton_tol = cfg.newton_tol;
  const BlowupPoint bp = timer.stage("detect", [&] { return detect_blowup(grid, dopt); });
  const EnvelopeBranches br =
      timer.stage("envelope", [&] { return envelope_branches(phi_field(grid), bp, 1e-4, cfg.delta_ext, 64); });
  ClassifyOptions copt;
  copt.edge_tol = cfg.edge_tol;
  std::vector<ClassifiedPoint> out;
  timer.stage("classify", [&] {
    for (const auto& [x, t] : points) out.push_back({x, t, classify_and_roots(grid, bp, br, x, t, copt)});
  });
  return out;
}

std::vector<std::pair<double, double>> read_points_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Config, "cannot read points file " + path);
  std::vector<std::pair<double, double>> out;
  std::string line;
  int no = 0;
  while (std::getline(is, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> v;
    try {
      v = parse_number_list(line, "points");
    } catch (const Error&) {
      if (no == 1) continue;  // header
      throw Error(ErrorKind::Config, path + ":" + std::to_string(no) + ": expected 'x,t'");
    }
    if (v.size() != 2) throw Error(ErrorKind::Config, path + ":" + std::to_string(no) + ": expected 'x,t'");
    out.emplace_back(v[0], v[1]);
  }
  return out;
}

void write_classified_csv(const std::string& path, const std::vector<ClassifiedPoint>& pts) {
  std::ofstream os = open_csv(path);
  int n = 0;
  for (const auto& p : pts)
    for (const Root& r : p.state.roots) n = std::max(n, static_cast<int>(r.u.size()));
  os << "x,t,region,d_eps,roots,max_residual";
  for (const char* tag : {"minus", "zero", "plus"}) {
    os << ",y_" << tag;
    for (int c = 0; c < n; ++c) os << ",u" << c + 1 << "_" << tag;
  }
  os << '\n';
  for (const auto& p : pts) {
    os << p.x << ',' << p.t << ',' << to_string(p.state.region) << ',' << p.state.d_eps << ','
       << p.state.roots.size() << ',' << p.state.max_residual;
    // a single root fills the first slot
    for (std::size_t k = 0; k < 3; ++k) {
      if (k < p.state.roots.size()) {
        const Root& r = p.state.roots[k];
        os << ',' << r.y;
        for (int c = 0; c < n; ++c) os << ',' << (c < r.u.size() ? r.u[c] : NAN);
      } else {
        os << ',';
        for (int c = 0; c < n; ++c) os << ',';
      }
    }
    os << '\n';
  }
}

}  // namespace shockforge
