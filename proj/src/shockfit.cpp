#include "shockforge/shockfit.hpp"

#include "shockforge/numerics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>

namespace shockforge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double lambda_i_of(const NormalizedSystem& ns, const Vec& w, int j) {
  return eigenvalues(ns.model.jac(ns.to_u(w)))[j];
}

// Interior-fed families enter the shock from their own side; the rest leave it
// and take boundary values from the RH closure.
bool interior_fed(int side, int j, int i) { return side < 0 ? j >= i : j <= i; }

std::vector<double>& side_data(ShockFrameField& f, int side) { return side < 0 ? f.w_minus : f.w_plus; }
const std::vector<double>& side_data(const ShockFrameField& f, int side) { return side < 0 ? f.w_minus : f.w_plus; }

double lin_t(const std::vector<double>& t, int l, double tt) {
  return std::clamp((tt - t[l]) / (t[l + 1] - t[l]), 0.0, 1.0);
}

}  // namespace

double ShockFrameField::half_width(double tt) const {
  return lambda_star * (t.back() - tt) + z_margin;
}

Vec ShockFrameField::at(int side, int level, int k) const {
  const auto& d = side_data(*this, side);
  Vec w(n);
  const std::size_t base = (static_cast<std::size_t>(level) * nz() + k) * n;
  for (int c = 0; c < n; ++c) w[c] = d[base + c];
  return w;
}

void ShockFrameField::set(int side, int level, int k, const Vec& w) {
  auto& d = side_data(*this, side);
  const std::size_t base = (static_cast<std::size_t>(level) * nz() + k) * n;
  for (int c = 0; c < n; ++c) d[base + c] = w[c];
}

Vec ShockFrameField::sample(int side, double z, double tt) const {
  if (tt < t.front() - 1e-12 || tt > t.back() + 1e-12) throw Error(ErrorKind::OutOfDomain, "time outside the shock frame");
  const int l = nt() > 1 ? locate(t, tt) : 0;
  const double a = nt() > 1 ? lin_t(t, l, tt) : 0.0;
  const auto& d = side_data(*this, side);
  const double za = std::abs(z);
  Vec w(n);
  for (int c = 0; c < n; ++c) {
    auto level_value = [&](int lv) {
      const int na = active[lv];
      if (za > zabs[na - 1]) throw Error(ErrorKind::OutOfDomain, "z outside the carried region");
      return monotone_cubic_at(zabs.data(), d.data() + static_cast<std::size_t>(lv) * nz() * n + c, n, na, za);
    };
    w[c] = a == 0.0 ? level_value(l) : (1 - a) * level_value(l) + a * level_value(l + 1);
  }
  return w;
}

void ShockFrameField::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Config, "cannot write " + path);
  os.write("SFSHOCK1", 8);
  auto put_i = [&](std::int64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
  auto put_d = [&](double v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
  auto put_vd = [&](const std::vector<double>& v) {
    put_i(static_cast<std::int64_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  put_i(n);
  put_i(i);
  put_d(T_eps);
  put_d(x_eps);
  put_d(phi_start);
  put_d(lambda_star);
  put_d(z_margin);
  put_vd(t);
  put_vd(zabs);
  put_i(static_cast<std::int64_t>(active.size()));
  for (int a : active) put_i(a);
  put_vd(w_minus);
  put_vd(w_plus);
}

bool ShockFrameField::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return false;
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != "SFSHOCK1") return false;
  auto get_i = [&]() {
    std::int64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  };
  auto get_d = [&]() {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  };
  auto get_vd = [&](std::vector<double>& v) {
    const std::int64_t m = get_i();
    if (m < 0 || m > (std::int64_t(1) << 32)) return false;
    v.resize(static_cast<std::size_t>(m));
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    return static_cast<bool>(is);
  };
  n = static_cast<int>(get_i());
  i = static_cast<int>(get_i());
  T_eps = get_d();
  x_eps = get_d();
  phi_start = get_d();
  lambda_star = get_d();
  z_margin = get_d();
  if (!get_vd(t) || !get_vd(zabs)) return false;
  const std::int64_t na = get_i();
  if (na != static_cast<std::int64_t>(t.size())) return false;
  active.resize(static_cast<std::size_t>(na));
  for (auto& a : active) a = static_cast<int>(get_i());
  return get_vd(w_minus) && get_vd(w_plus) && static_cast<bool>(is);
}

void ShockCurve::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Config, "cannot write " + path);
  const int n = jumps.empty() ? 0 : static_cast<int>(jumps.front().size());
  os << "t,phi,sigma";
  for (int c = 0; c < n; ++c) os << ",jump_w" << c + 1;
  os << ",margin_1,margin_2,margin_3,margin_4,rh_residual\n";
  os.precision(17);
  for (std::size_t l = 0; l < t.size(); ++l) {
    os << t[l] << ',' << phi[l] << ',' << sigma[l];
    for (int c = 0; c < n; ++c) os << ',' << jumps[l][c];
    for (double m : margins[l]) os << ',' << (std::isinf(m) ? std::string("inf") : std::to_string(m));
    os << ',' << rh_residual[l] << '\n';
  }
}

void IterateDiag::write_json(const std::string& path) const {
  nlohmann::json j;
  j["diff_i"] = diff_i;
  j["diff_j"] = diff_j;
  j["weighted"] = weighted;
  j["contraction_ratios"] = contraction_ratios;
  j["rh_residuals"] = rh_residuals;
  j["cubic_ratio"] = cubic_ratio;
  j["iterations"] = iterations;
  j["converged"] = converged;
  j["geometry_violations"] = geometry_violations;
  j["conv_tol"] = conv_tol;
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Config, "cannot write " + path);
  os << j.dump(2) << '\n';
}

double sigma_average(const FluxModel& model, int i, const Vec& u_minus, const Vec& u_plus) {
  static const auto rule = [] {
    std::pair<std::vector<double>, std::vector<double>> r;
    gauss_legendre01(16, r.first, r.second);
    return r;
  }();
  const auto& [gx, gw] = rule;
  Mat A = Mat::Zero(model.n, model.n);
  for (std::size_t q = 0; q < gx.size(); ++q) A += gw[q] * model.jac(gx[q] * u_plus + (1.0 - gx[q]) * u_minus);
  return eigenvalues(A)[i];
}

std::array<double, 4> lax_margins(const NormalizedSystem& ns, const Vec& w_minus, const Vec& w_plus, double sigma) {
  const int n = ns.model.n, i = ns.i;
  const Vec lm = eigenvalues(ns.model.jac(ns.to_u(w_minus)));
  const Vec lp = eigenvalues(ns.model.jac(ns.to_u(w_plus)));
  return {i > 0 ? sigma - lm[i - 1] : kInf, lm[i] - sigma, sigma - lp[i], i + 1 < n ? lp[i + 1] - sigma : kInf};
}

RhResult rh_closure(const NormalizedSystem& ns, const Vec& w_minus, const Vec& w_plus, double sigma_seed,
                    const ShockfitOptions& opts) {
  const FluxModel& model = ns.model;
  const int n = model.n, i = ns.i;
  RhResult r;
  r.w_minus = w_minus;
  r.w_plus = w_plus;
  Vec um, up;
  auto residual = [&](const Vec& wm, const Vec& wp, double s) {
    um = ns.to_u(wm);
    up = ns.to_u(wp);
    return Vec(s * (um - up) - (model.f(um) - model.f(up)));
  };
  auto finish = [&]() {
    r.residual = residual(r.w_minus, r.w_plus, r.sigma).cwiseAbs().maxCoeff();
    r.margins = lax_margins(ns, r.w_minus, r.w_plus, r.sigma);
    if (r.residual > opts.rh_tol) {
      std::ostringstream os;
      os << "RH Newton stopped at residual " << r.residual;
      throw Error(ErrorKind::NewtonDivergence, os.str());
    }
    const double mm = *std::min_element(r.margins.begin(), r.margins.end());
    if (mm < -opts.entropy_slack) {
      std::ostringstream os;
      os << "Lax inequality broken by " << -mm;
      throw Error(ErrorKind::EntropyViolation, os.str());
    }
    return r;
  };

  if (std::abs(w_minus[i] - w_plus[i]) <= 1e-15 * (1.0 + std::abs(w_plus[i]))) {
    for (int j = 0; j < i; ++j) r.w_minus[j] = w_plus[j];
    for (int j = i + 1; j < n; ++j) r.w_plus[j] = w_minus[j];
    r.w_minus[i] = r.w_plus[i];
    r.sigma = eigenvalues(model.jac(ns.to_u(r.w_minus)))[i];
    return finish();
  }

  r.sigma = std::isnan(sigma_seed) ? sigma_average(model, i, ns.to_u(w_minus), ns.to_u(w_plus)) : sigma_seed;
  Vec R = residual(r.w_minus, r.w_plus, r.sigma);
  double rn = R.cwiseAbs().maxCoeff();
  for (int it = 0; it < 60 && rn > 1e-2 * opts.rh_tol; ++it) {
    r.iterations = it + 1;
    const Vec um0 = um, up0 = up;
    Mat J(n, n);
    int col = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      Vec wm = r.w_minus, wp = r.w_plus;
      double& v = j < i ? wm[j] : wp[j];
      const double h = 1e-7 * (1e-2 + std::abs(v));
      v += h;
      J.col(col++) = (residual(wm, wp, r.sigma) - R) / h;
    }
    J.col(n - 1) = um0 - up0;
    const Vec dx = J.partialPivLu().solve(-R);
    double step = 1.0;
    bool accepted = false;
    for (int damp = 0; damp < 30; ++damp) {
      Vec wm = r.w_minus, wp = r.w_plus;
      col = 0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        (j < i ? wm[j] : wp[j]) += step * dx[col++];
      }
      const double s = r.sigma + step * dx[n - 1];
      const Vec Rn = residual(wm, wp, s);
      const double rnn = Rn.cwiseAbs().maxCoeff();
      if (rnn < rn) {
        r.w_minus = wm;
        r.w_plus = wp;
        r.sigma = s;
        R = Rn;
        rn = rnn;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return finish();
}

ShockFrameField make_shock_frame(const NormalizedSystem& ns, double T_eps, double x_eps, const ShockfitOptions& opts) {
  if (!(opts.delta_start > 0.0) || !(opts.t_span > opts.delta_start))
    throw Error(ErrorKind::Config, "shock window needs 0 < delta_start < t_span");
  ShockFrameField f;
  f.n = ns.model.n;
  f.i = ns.i;
  f.T_eps = T_eps;
  f.x_eps = x_eps;
  f.lambda_star = lambda_star(ns);
  f.z_margin = opts.z_margin;
  const double dt_max = opts.t_span / opts.nt_uniform;
  double tau = opts.delta_start;
  f.t.push_back(T_eps + tau);
  while (tau < opts.t_span - 1e-12) {
    double next = std::min(tau * opts.t_ratio, tau + dt_max);
    if (next > opts.t_span - 0.25 * dt_max) next = opts.t_span;
    tau = next;
    f.t.push_back(T_eps + tau);
  }
  // half-width shrinks at lambda_star so that every foot stays inside
  auto L = [&](double tt) { return f.lambda_star * (T_eps + opts.t_span - tt) + opts.z_margin; };
  const double h_max = 1.0 / opts.nz_uniform;
  const double z_end = L(f.t.front()) + 3.0 * h_max;
  f.zabs.push_back(0.0);
  double h = opts.z_h0;
  while (f.zabs.back() < z_end) {
    f.zabs.push_back(f.zabs.back() + h);
    h = std::min(h * opts.z_ratio, h_max);
  }
  for (double tt : f.t) {
    const auto it = std::upper_bound(f.zabs.begin(), f.zabs.end(), L(tt));
    f.active.push_back(std::min<int>(f.nz(), static_cast<int>(it - f.zabs.begin()) + 2));
  }
  const std::size_t size = static_cast<std::size_t>(f.nt()) * f.nz() * f.n;
  f.w_minus.assign(size, 0.0);
  f.w_plus.assign(size, 0.0);
  return f;
}

namespace {

ShockCurve curve_from_traces(const NormalizedSystem& ns, const ShockFrameField& f, const std::vector<double>& sigma,
                             const std::vector<Vec>& tm, const std::vector<Vec>& tp) {
  ShockCurve c;
  c.T_eps = f.T_eps;
  c.t = f.t;
  c.sigma = sigma;
  c.phi.assign(f.nt(), f.phi_start);
  for (int l = 1; l < f.nt(); ++l) c.phi[l] = c.phi[l - 1] + 0.5 * (f.t[l] - f.t[l - 1]) * (sigma[l] + sigma[l - 1]);
  c.entropy_margin = kInf;
  for (int l = 0; l < f.nt(); ++l) {
    c.w_minus.push_back(tm[l]);
    c.w_plus.push_back(tp[l]);
    c.jumps.push_back(tm[l] - tp[l]);
    c.margins.push_back(lax_margins(ns, tm[l], tp[l], sigma[l]));
    const Vec um = ns.to_u(tm[l]), up = ns.to_u(tp[l]);
    c.rh_residual.push_back((sigma[l] * (um - up) - (ns.model.f(um) - ns.model.f(up))).cwiseAbs().maxCoeff());
    if (l > 0)
      for (double m : c.margins.back()) c.entropy_margin = std::min(c.entropy_margin, m);
  }
  return c;
}

}  // namespace

FirstApproximation first_approximation(const NormalizedSystem& ns, double T_eps, double x_eps,
                                       const std::function<double(double)>& phi0, const BranchData& data,
                                       const ShockfitOptions& opts) {
  FirstApproximation fa;
  fa.field = make_shock_frame(ns, T_eps, x_eps, opts);
  ShockFrameField& f = fa.field;
  f.phi_start = phi0(f.t.front());
  std::vector<Vec> tm, tp;
  for (int l = 0; l < f.nt(); ++l) {
    const double p = phi0(f.t[l]);
    for (int side : {-1, 1})
      for (int k = 0; k < f.active[l]; ++k) f.set(side, l, k, data(p + side * f.zabs[k], f.t[l], side));
    tm.push_back(f.at(-1, l, 0));
    tp.push_back(f.at(1, l, 0));
    const double h = 1e-6;
    fa.sigma0.push_back((phi0(f.t[l] + h) - phi0(std::max(f.t[l] - h, T_eps))) / (f.t[l] + h - std::max(f.t[l] - h, T_eps)));
  }
  fa.seed = curve_from_traces(ns, f, fa.sigma0, tm, tp);
  for (int l = 0; l < f.nt(); ++l) fa.seed.phi[l] = phi0(f.t[l]);
  return fa;
}

FirstApproximation init_first_approximation(const CharGrid& grid, const BlowupPoint& bp, const EnvelopeBranches& br,
                                            const PreshockCurve& pc, const ShockfitOptions& opts) {
  if (!grid.ns) throw Error(ErrorKind::IncompletePipeline, "grid has no normalized system attached");
  const NormalizedSystem& ns = *grid.ns;
  if (pc.t.size() < 3) throw Error(ErrorKind::IncompletePipeline, "pre-shock curve has too few samples");
  if (pc.t.back() < bp.T_eps + opts.t_span - 1e-9)
    throw Error(ErrorKind::IncompletePipeline, "pre-shock curve shorter than the shock window");
  const PhiField f = phi_field(grid);
  const std::vector<double> ct(pc.t.begin() + 1, pc.t.end()), cx(pc.phi0.begin() + 1, pc.phi0.end());
  const MonotoneCubic curve(ct, cx);
  const double t_fit = ct.front();
  auto phi0 = [&](double t) {
    const double tau = t - bp.T_eps;
    if (t < t_fit) return bp.x_eps + pc.linear_coef * tau + pc.quadratic_coef * tau * tau;
    if (t <= ct.back()) return curve(t);
    const std::size_t e = ct.size() - 1;
    return cx[e] + (t - ct[e]) * (cx[e] - cx[e - 1]) / (ct[e] - ct[e - 1]);
  };

  struct Last {
    double t = std::numeric_limits<double>::quiet_NaN();
    double x = 0.0, y = 0.0;
  } last[2];
  auto data = [&](double x, double t, int side) {
    Last& L = last[side > 0];
    double y = 0.0;
    if (!(L.t == t)) {
      const MultiState ms = classify_and_roots(f, bp, br, x, t);
      y = side < 0 ? ms.roots.front().y : ms.roots.back().y;
    } else {
      // outer branches are monotone: y moves with x away from the fold
      auto g = [&](double yy, double& d) {
        const PhiSample s = f.eval(yy, t);
        d = s.phi_y;
        return s.phi - x;
      };
      double step = 2.0 * std::abs(x - L.x) + 1e-12;
      double lo = L.y, hi = L.y, d = 0.0;
      for (int it = 0; it < 60; ++it) {
        if (side < 0) {
          lo = std::max(L.y - step, f.y_lo);
          if (g(lo, d) <= 0.0 || lo == f.y_lo) break;
        } else {
          hi = std::min(L.y + step, f.y_hi);
          if (g(hi, d) >= 0.0 || hi == f.y_hi) break;
        }
        step *= 2.0;
      }
      y = solve_bracketed(g, lo, hi, 1e-15);
    }
    L.t = t;
    L.x = x;
    L.y = y;
    return ns.to_w(grid.u_at(y, t));
  };
  return first_approximation(ns, bp.T_eps, bp.x_eps, phi0, data, opts);
}

namespace {

struct Coeffs {
  std::vector<double> lam[2];  // [(level * nz + k) * n + j]
  std::vector<double> p[2];    // [((level * nz + k) * n + j) * n + m]
};

Coeffs coefficients(const NormalizedSystem& ns, const ShockFrameField& f) {
  const int n = f.n, nz = f.nz();
  Coeffs c;
  for (int s = 0; s < 2; ++s) {
    c.lam[s].assign(static_cast<std::size_t>(f.nt()) * nz * n, 0.0);
    c.p[s].assign(static_cast<std::size_t>(f.nt()) * nz * n * n, 0.0);
    for (int l = 0; l < f.nt(); ++l)
      for (int k = 0; k < f.active[l]; ++k) {
        const PointW pw = ns.at_w(f.at(s ? 1 : -1, l, k));
        const std::size_t b = static_cast<std::size_t>(l) * nz + k;
        for (int j = 0; j < n; ++j) {
          c.lam[s][b * n + j] = pw.lambdas[j];
          for (int m = 0; m < n; ++m) c.p[s][(b * n + j) * n + m] = pw.left_w(j, m) / pw.left_w(j, j);
        }
      }
  }
  return c;
}

}  // namespace

ShockSolution iterate_to_convergence(const NormalizedSystem& ns, const FirstApproximation& init,
                                     const ShockfitOptions& opts) {
  const int n = init.field.n, i = init.field.i, nz = init.field.nz(), nt = init.field.nt();
  const std::vector<double>& t = init.field.t;
  const std::vector<double>& zabs = init.field.zabs;
  const std::vector<int>& active = init.field.active;
  ShockSolution sol;
  IterateDiag& dg = sol.diag;
  dg.conv_tol = opts.conv_tol > 0.0 ? opts.conv_tol : 1e-10 * opts.epsilon;

  ShockFrameField F = init.field;
  std::vector<double> sig = init.sigma0;
  std::vector<Vec> trm(nt), trp(nt);
  for (int l = 0; l < nt; ++l) {
    trm[l] = F.at(-1, l, 0);
    trp[l] = F.at(1, l, 0);
  }
  int rising = 0;
  for (int m = 0; m < opts.max_iters; ++m) {
    const Coeffs C = coefficients(ns, F);
    ShockFrameField G = F;
    std::vector<double> sig_new(nt);
    std::vector<Vec> tm(nt), tp(nt);
    double rh_max = 0.0;
    auto close = [&](int l) {
      Vec wm = G.at(-1, l, 0), wp = G.at(1, l, 0);
      for (int j = 0; j < i; ++j) wm[j] = trm[l][j];
      for (int j = i + 1; j < n; ++j) wp[j] = trp[l][j];
      const RhResult r = rh_closure(ns, wm, wp, sig[l], opts);
      tm[l] = r.w_minus;
      tp[l] = r.w_plus;
      sig_new[l] = r.sigma;
      rh_max = std::max(rh_max, r.residual);
    };
    close(0);

    auto lamC = [&](int s, int l, int k, int j) {
      return C.lam[s > 0][(static_cast<std::size_t>(l) * nz + k) * n + j];
    };
    auto pC = [&](int s, int l, int k, int j, int q) {
      return C.p[s > 0][((static_cast<std::size_t>(l) * nz + k) * n + j) * n + q];
    };
    for (int l = 0; l + 1 < nt; ++l) {
      const double dt = t[l + 1] - t[l];
      const int na0 = active[l];
      auto update = [&](int s, int j, int k) {
        const double z = s * zabs[k];
        const double a1 = lamC(s, l + 1, k, j) - sig[l + 1];
        const std::size_t lv0 = static_cast<std::size_t>(l) * nz * n;
        const std::vector<double>& lam0 = C.lam[s > 0];
        double zf = z - dt * a1;
        for (int it = 0; it < opts.foot_iterations; ++it) {
          const double za = s * zf > 0.0 ? std::abs(zf) : 0.0;
          const double a0 = monotone_cubic_at(zabs.data(), lam0.data() + lv0 + j, n, na0, za) - sig[l];
          zf = z - 0.5 * dt * (a1 + a0);
        }
        const Vec wk1 = F.at(s, l + 1, k);
        double val = 0.0;
        if (s * zf >= 0.0 || interior_fed(s, j, i)) {
          if (s * zf < 0.0) {
            if (j == i) ++dg.geometry_violations;
            zf = 0.0;
          }
          double za = std::abs(zf);
          // nodes past the half-width only pad the interpolation stencils
          if (za > zabs[na0 - 1] && zabs[k] > G.half_width(t[l + 1])) za = zabs[na0 - 1];
          if (za > zabs[na0 - 1]) {
            std::ostringstream os;
            os << "foot at |z| = " << za << " beyond the carried half-width " << zabs[na0 - 1] << " at t = " << t[l];
            throw Error(ErrorKind::FootOutOfDomain, os.str());
          }
          const std::vector<double>& g0 = side_data(G, s);
          const std::vector<double>& f0 = side_data(F, s);
          val = monotone_cubic_at(zabs.data(), g0.data() + lv0 + j, n, na0, za);
          for (int q = 0; q < n; ++q) {
            if (q == j) continue;
            const double pf = monotone_cubic_at(zabs.data(), C.p[s > 0].data() + (static_cast<std::size_t>(l) * nz * n + j) * n + q,
                                        n * n, na0, za);
            const double pbar = 0.5 * (pC(s, l + 1, k, j, q) + pf);
            val -= pbar * (wk1[q] - monotone_cubic_at(zabs.data(), f0.data() + lv0 + q, n, na0, za));
          }
        } else {
          // crossed the shock between the levels: start from the RH trace
          const double th = (zf == z) ? 1.0 : std::clamp(-zf / (z - zf), 0.0, 1.0);
          const Vec& tnew0 = s < 0 ? tm[l] : tp[l];
          const Vec& tnew1 = s < 0 ? tm[l + 1] : tp[l + 1];
          const Vec& told0 = s < 0 ? trm[l] : trp[l];
          const Vec& told1 = s < 0 ? trm[l + 1] : trp[l + 1];
          val = (1 - th) * tnew0[j] + th * tnew1[j];
          for (int q = 0; q < n; ++q) {
            if (q == j) continue;
            const double p0 = (1 - th) * pC(s, l, 0, j, q) + th * pC(s, l + 1, 0, j, q);
            const double pbar = 0.5 * (pC(s, l + 1, k, j, q) + p0);
            val -= pbar * (wk1[q] - ((1 - th) * told0[q] + th * told1[q]));
          }
        }
        side_data(G, s)[(static_cast<std::size_t>(l + 1) * nz + k) * n + j] = val;
      };

      for (int s : {-1, 1})
        for (int j = 0; j < n; ++j)
          if (interior_fed(s, j, i))
            for (int k = 0; k < active[l + 1]; ++k) update(s, j, k);
      close(l + 1);
      for (int s : {-1, 1})
        for (int j = 0; j < n; ++j)
          if (!interior_fed(s, j, i)) {
            side_data(G, s)[(static_cast<std::size_t>(l + 1) * nz) * n + j] = (s < 0 ? tm : tp)[l + 1][j];
            for (int k = 1; k < active[l + 1]; ++k) update(s, j, k);
          }
    }

    double di = 0.0;
    std::vector<double> dj(n, 0.0);
    for (int s : {-1, 1}) {
      const auto& a = side_data(G, s);
      const auto& b = side_data(F, s);
      for (int l = 1; l < nt; ++l)
        for (int k = 0; k < active[l]; ++k)
          for (int c = 0; c < n; ++c) {
            const std::size_t id = (static_cast<std::size_t>(l) * nz + k) * n + c;
            const double d = std::abs(a[id] - b[id]);
            if (c == i) di = std::max(di, d);
            else dj[c] = std::max(dj[c], d);
          }
    }
    double sum_j = 0.0;
    for (int c = 0; c < n; ++c) sum_j += dj[c];
    const double weighted = di + (opts.weight_C + 1.0) * sum_j;
    dg.diff_i.push_back(di);
    dg.diff_j.push_back(sum_j);
    if (!dg.weighted.empty())
      dg.contraction_ratios.push_back(dg.weighted.back() > 0.0 ? weighted / dg.weighted.back() : 0.0);
    dg.weighted.push_back(weighted);
    dg.rh_residuals.push_back(rh_max);
    dg.iterations = m + 1;

    F = std::move(G);
    sig = std::move(sig_new);
    trm = std::move(tm);
    trp = std::move(tp);

    if (weighted < dg.conv_tol) {
      dg.converged = true;
      break;
    }
    rising = (!dg.contraction_ratios.empty() && dg.contraction_ratios.back() > 1.0) ? rising + 1 : 0;
    if (rising >= 3) {
      std::ostringstream os;
      os << "iterates stopped contracting (eps " << opts.epsilon << ", " << nt << " levels x " << nz
         << " nodes, weighted diff " << weighted << ")";
      throw Error(ErrorKind::NoContraction, os.str());
    }
  }

  sol.curve = curve_from_traces(ns, F, sig, trm, trp);
  for (std::size_t l = 0; l < sol.curve.jumps.size(); ++l) {
    const double ji = std::abs(sol.curve.jumps[l][i]);
    if (ji <= 0.0) continue;
    for (int j = 0; j < n; ++j)
      if (j != i) dg.cubic_ratio = std::max(dg.cubic_ratio, std::abs(sol.curve.jumps[l][j]) / (ji * ji * ji));
  }
  sol.field = std::move(F);
  return sol;
}

CubicJumpReport cubic_jump_diagnostic(const ShockCurve& curve, int i) {
  CubicJumpReport rep;
  double wmax = 0.0, jmax = 0.0;
  for (std::size_t l = 0; l < curve.jumps.size(); ++l) {
    wmax = std::max({wmax, curve.w_minus[l].cwiseAbs().maxCoeff(), curve.w_plus[l].cwiseAbs().maxCoeff()});
    jmax = std::max(jmax, std::abs(curve.jumps[l][i]));
  }
  rep.noise_floor = 1e-15 * (1.0 + wmax);
  if (!(jmax > 10.0 * rep.noise_floor)) throw Error(ErrorKind::InsufficientJump, "i-jump below the noise floor");
  const int n = curve.jumps.empty() ? 0 : static_cast<int>(curve.jumps.front().size());
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    CubicJumpReport::Family fam;
    fam.j = j;
    std::vector<double> tau, ratio, ai, aj;
    for (std::size_t l = 0; l < curve.jumps.size(); ++l) {
      const double ji = curve.jumps[l][i];
      if (std::abs(ji) <= 10.0 * rep.noise_floor) continue;
      tau.push_back(curve.t[l] - curve.T_eps);
      ratio.push_back(curve.jumps[l][j] / (ji * ji * ji));
      ai.push_back(std::abs(ji));
      aj.push_back(std::abs(curve.jumps[l][j]));
    }
    fam.points = static_cast<int>(tau.size());
    if (tau.empty()) {
      rep.families.push_back(fam);
      continue;
    }
    const std::size_t head = std::max<std::size_t>(2, tau.size() / 3);
    const LinearFit lf = fit_line(std::vector<double>(tau.begin(), tau.begin() + std::min(head, tau.size())),
                                  std::vector<double>(ratio.begin(), ratio.begin() + std::min(head, ratio.size())));
    fam.limit = tau.size() >= 2 ? lf.intercept : ratio.front();
    const auto [lo, hi] = std::minmax_element(ratio.begin(), ratio.end());
    for (double r : ratio) fam.max_abs = std::max(fam.max_abs, std::abs(r));
    fam.spread = fam.limit != 0.0 ? (*hi - *lo) / std::abs(fam.limit) : 0.0;
    fam.slope = fit_loglog(ai, aj).slope;
    rep.families.push_back(fam);
  }
  return rep;
}

AppendixReport appendix_diagnostics(const NormalizedSystem& ns, const ShockSolution& sol, double epsilon) {
  const ShockFrameField& f = sol.field;
  const ShockCurve& c = sol.curve;
  const int i = f.i;
  AppendixReport rep;
  rep.separation_c = kInf;
  auto sigma_at = [&](double tt) {
    const int l = locate(f.t, tt);
    const double a = lin_t(f.t, l, tt);
    return (1 - a) * c.sigma[l] + a * c.sigma[l + 1];
  };
  auto speed = [&](int side, double z, double tt) { return lambda_i_of(ns, f.sample(side, z, tt), i) - sigma_at(tt); };
  auto dlam = [&](int side, double z, double tt) {
    const double h = 1e-4;
    const double za = std::abs(z);
    const double zl = std::max(za - h, 0.0), zr = za + h;
    return std::abs(lambda_i_of(ns, f.sample(side, zr, tt), i) - lambda_i_of(ns, f.sample(side, zl, tt), i)) / (zr - zl);
  };
  for (double tau : {0.05, 0.1, 0.2, 0.4, 0.8}) {
    const double t_start = f.T_eps + tau;
    if (t_start > f.t.back() || t_start < f.t.front()) continue;
    for (int side : {-1, 1})
      for (double za : {0.002, 0.02, 0.1}) {
        if (za > f.half_width(t_start)) continue;
        double z = side * za, tt = t_start;
        const double rhs = tau * tau * tau + z * z;
        double integral = 0.0, g_prev = dlam(side, z, tt);
        double cmin = kInf;
        const int steps = 200;
        const double h = (t_start - f.t.front()) / steps;
        try {
          for (int s = 0; s < steps; ++s) {
            // Heun backward in time; i-characteristics leave the shock
            const double k1 = speed(side, z, tt);
            const double zp = z - h * k1;
            if (side * zp < 0.0) break;
            const double k2 = speed(side, zp, tt - h);
            const double zn = z - 0.5 * h * (k1 + k2);
            if (side * zn < 0.0) break;
            z = zn;
            tt -= h;
            const double g = dlam(side, z, tt);
            integral += 0.5 * h * (g + g_prev);
            g_prev = g;
            const double ts = tt - f.T_eps;
            cmin = std::min(cmin, (ts * ts * ts + z * z) / rhs);
          }
        } catch (const Error&) {
          // left the carried region
        }
        if (std::isinf(cmin)) continue;
        ++rep.paths;
        rep.separation_c = std::min(rep.separation_c, std::min(cmin, 1.0));
        rep.max_integral = std::max(rep.max_integral, integral);
        if (epsilon > 0.0)
          rep.C_hat = std::max(rep.C_hat, (integral - std::log(1.5)) / (epsilon * std::sqrt(tau)));
      }
  }
  if (rep.paths == 0) rep.separation_c = 0.0;
  return rep;
}

}  // namespace shockforge
