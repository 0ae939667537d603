#include "shockforge/singularity.hpp"

#include "shockforge/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace shockforge {

namespace {

const double kCusp = 2.0 * std::sqrt(3.0) / 9.0;

// min_y phi_y near y at time t: Newton on phi_yy = 0
double inflection(const PhiField& f, double t, double y) {
  for (int it = 0; it < 40; ++it) {
    const PhiSample s = f.eval(y, t);
    if (s.phi_yyy == 0.0) break;
    const double dy = s.phi_yy / s.phi_yyy;
    y -= std::clamp(dy, -0.25, 0.25);
    y = std::clamp(y, f.y_lo, f.y_hi);
    if (std::abs(dy) < 1e-14 * (1.0 + std::abs(y))) break;
  }
  return y;
}

// Least squares for y = sum_k c_k x^{p_k}.
std::vector<double> poly_fit(const std::vector<double>& x, const std::vector<double>& y,
                             const std::vector<double>& powers) {
  const int m = static_cast<int>(powers.size());
  Eigen::MatrixXd V(x.size(), m);
  Eigen::VectorXd b(x.size());
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (int c = 0; c < m; ++c) V(r, c) = std::pow(x[r], powers[c]);
    b[r] = y[r];
  }
  const Eigen::VectorXd c = V.colPivHouseholderQr().solve(b);
  return std::vector<double>(c.data(), c.data() + m);
}

}  // namespace

PhiField phi_field(const CharGrid& grid) {
  PhiField f;
  const CharGrid* g = &grid;
  f.eval = [g](double y, double t) { return g->sample(y, t); };
  f.y_lo = grid.y.front();
  f.y_hi = grid.y.back();
  f.t_lo = grid.t.front();
  f.t_hi = grid.t.back();
  return f;
}

BlowupPoint detect_blowup(const PhiField& f, double y_seed, double t_seed, double t_before,
                          const DetectOptions& opts) {
  BlowupPoint bp;
  double y = y_seed, t = t_seed;
  PhiSample s;
  bool converged = false;
  for (int it = 0; it < opts.max_iter; ++it) {
    s = f.eval(y, t);
    bp.newton_iterations = it + 1;
    const double det = s.phi_yy * s.phi_yyt - s.phi_yt * s.phi_yyy;
    if (!(std::abs(det) > 1e-300)) break;
    double dy = (s.phi_yyt * s.phi_y - s.phi_yt * s.phi_yy) / det;
    double dt = (-s.phi_yyy * s.phi_y + s.phi_yy * s.phi_yy) / det;
    const double scale = std::max(std::abs(dy) / 0.5, std::abs(dt) / (0.1 * (f.t_hi - f.t_lo)));
    if (scale > 1.0) {
      dy /= scale;
      dt /= scale;
    }
    y = std::clamp(y - dy, f.y_lo, f.y_hi);
    t = std::clamp(t - dt, f.t_lo, f.t_hi);
    if (std::abs(dy) < 1e-14 * (1.0 + std::abs(y)) && std::abs(dt) < 1e-14 * (1.0 + std::abs(t))) {
      converged = true;
      break;
    }
  }
  s = f.eval(y, t);
  const double resid = std::max(std::abs(s.phi_y), std::abs(s.phi_yy));
  if (!converged && resid < opts.newton_tol) converged = true;
  bp.y_eps = y;
  bp.T_eps = t;
  bp.x_eps = s.phi;
  bp.lambda_at_bp = s.phi_t;
  bp.phi_y = s.phi_y;
  bp.phi_yy = s.phi_yy;
  bp.phi_yyy = s.phi_yyy;
  bp.phi_yt = s.phi_yt;
  bp.phi_yyt = s.phi_yyt;
  if (s.phi_yyy <= opts.fd_floor || s.phi_yt >= -opts.fd_floor) {
    std::ostringstream os;
    os << "cusp conditions fail at (y, t) = (" << y << ", " << t << "): phi_yyy = " << s.phi_yyy
       << ", phi_yt = " << s.phi_yt;
    throw Error(ErrorKind::DegenerateCusp, os.str());
  }
  if (!converged || resid > opts.newton_tol) {
    std::ostringstream os;
    os << "Newton for the blowup point stalled with residual " << resid;
    throw Error(ErrorKind::DegenerateCusp, os.str());
  }

  // first zero of m(t) = min_y phi_y
  double yc = y;
  auto m = [&](double tt, double& dm) {
    yc = inflection(f, tt, yc);
    const PhiSample q = f.eval(yc, tt);
    dm = q.phi_yt;
    return q.phi_y;
  };
  double dm = 0.0;
  const double lo = std::clamp(t_before, f.t_lo, t);
  yc = y;
  const double m_hi = m(t, dm);
  yc = y;
  const double m_lo = m(lo, dm);
  bp.t_first_zero = t;
  if (m_lo > 0.0 && m_hi <= 0.0 && lo < t) {
    yc = y;
    bp.t_first_zero = solve_bracketed(m, lo, t, 1e-13);
  }
  return bp;
}

BlowupPoint detect_blowup(const CharGrid& grid, const DetectOptions& opts) {
  int l = 0;
  while (l < grid.nt() && grid.min_K(l) > 0.0) ++l;
  if (l == grid.nt()) throw Error(ErrorKind::NoCrossing, "K stays positive on the whole grid");
  if (l == 0) throw Error(ErrorKind::EarlyCrossing, "K already nonpositive at the handoff time");
  int k = 0;
  grid.min_K(l, &k);
  // The nodal minimum can lag the interpolated one; seed with the inflection point.
  const PhiField f = phi_field(grid);
  const double y0 = inflection(f, grid.t[l], grid.y[k]);
  BlowupPoint bp = detect_blowup(f, y0, grid.t[l], grid.t[l - 1], opts);
  bp.u = grid.u_at(bp.y_eps, bp.T_eps);
  bp.w = grid.ns ? grid.ns->to_w(bp.u) : bp.u;
  return bp;
}

EnvelopeSample envelope_at(const PhiField& f, const BlowupPoint& bp, double t, const EnvelopeSample* seed) {
  const double tau = t - bp.T_eps;
  if (!(tau > 0.0)) throw Error(ErrorKind::OutOfDomain, "envelope requested before the blowup time");
  if (t > f.t_hi) throw Error(ErrorKind::OutOfDomain, "envelope requested past the grid");
  const double delta = std::sqrt(bp.beta() * tau / (3.0 * bp.alpha()));
  EnvelopeSample e;
  e.t = t;
  const double yc0 = seed ? seed->y_center : bp.y_eps - bp.phi_yyt * tau / bp.phi_yyy;
  e.y_center = inflection(f, t, yc0);
  auto g = [&](double y, double& d) {
    const PhiSample s = f.eval(y, t);
    d = s.phi_yy;
    return s.phi_y;
  };
  double d = 0.0;
  if (!(g(e.y_center, d) < 0.0)) {
    std::ostringstream os;
    os << "no fold at t - T_eps = " << tau << " (K = " << g(e.y_center, d) << " at y = " << e.y_center << ")";
    throw Error(ErrorKind::BranchLoss, os.str());
  }
  auto outward = [&](double dir, double guess) {
    double step = std::max(std::abs(guess - e.y_center) * 1.5, 1e-12);
    double hi = e.y_center + dir * step;
    for (int it = 0; it < 80; ++it) {
      if (hi < f.y_lo || hi > f.y_hi) throw Error(ErrorKind::BranchLoss, "envelope branch left the grid");
      if (g(hi, d) > 0.0) break;
      step *= 2.0;
      hi = e.y_center + dir * step;
    }
    const double a = std::min(e.y_center, hi), b = std::max(e.y_center, hi);
    return solve_bracketed(g, a, b, 1e-15);
  };
  e.eta_plus = outward(1.0, seed ? seed->eta_plus : e.y_center + delta);
  e.eta_minus = outward(-1.0, seed ? seed->eta_minus : e.y_center - delta);
  e.x_plus = f.eval(e.eta_plus, t).phi;
  e.x_minus = f.eval(e.eta_minus, t).phi;
  return e;
}

EnvelopeSample EnvelopeBranches::seed_at(const BlowupPoint& bp, double t) const {
  if (samples.empty()) return {};
  const double tau = t - bp.T_eps;
  auto it = std::lower_bound(samples.begin(), samples.end(), t,
                             [](const EnvelopeSample& s, double v) { return s.t < v; });
  const EnvelopeSample& a = it == samples.begin() ? samples.front() : *(it - 1);
  const EnvelopeSample& b = it == samples.end() ? samples.back() : *it;
  const double ta = a.t - bp.T_eps, tb = b.t - bp.T_eps;
  const double th = tb > ta ? std::clamp((tau - ta) / (tb - ta), 0.0, 1.0) : 0.0;
  auto scaled = [&](const EnvelopeSample& s, double eta) { return (eta - s.y_center) / std::sqrt(s.t - bp.T_eps); };
  EnvelopeSample e;
  e.t = t;
  e.y_center = (1 - th) * a.y_center + th * b.y_center;
  const double rt = std::sqrt(std::max(tau, 0.0));
  e.eta_plus = e.y_center + rt * ((1 - th) * scaled(a, a.eta_plus) + th * scaled(b, b.eta_plus));
  e.eta_minus = e.y_center + rt * ((1 - th) * scaled(a, a.eta_minus) + th * scaled(b, b.eta_minus));
  return e;
}

EnvelopeBranches envelope_branches(const PhiField& f, const BlowupPoint& bp, double tau_min, double tau_max,
                                   int samples) {
  tau_max = std::min(tau_max, f.t_hi - bp.T_eps - 1e-9);
  if (!(tau_max > tau_min) || !(tau_min > 0.0)) throw Error(ErrorKind::OutOfDomain, "empty envelope range");
  EnvelopeBranches br;
  const EnvelopeSample* prev = nullptr;
  for (int m = 0; m < samples; ++m) {
    const double tau = tau_min * std::pow(tau_max / tau_min, samples > 1 ? double(m) / (samples - 1) : 0.0);
    EnvelopeSample seed;
    if (prev) {
      seed = *prev;
      const double r = std::sqrt(tau / (prev->t - bp.T_eps));
      seed.eta_plus = prev->y_center + r * (prev->eta_plus - prev->y_center);
      seed.eta_minus = prev->y_center + r * (prev->eta_minus - prev->y_center);
    }
    br.samples.push_back(envelope_at(f, bp, bp.T_eps + tau, prev ? &seed : nullptr));
    const EnvelopeSample& e = br.samples.back();
    if (!(e.eta_minus < e.y_center && e.y_center < e.eta_plus) || !(e.x_plus < e.x_minus))
      throw Error(ErrorKind::BranchLoss, "envelope branches crossed during continuation");
    br.max_residual = std::max({br.max_residual, std::abs(f.eval(e.eta_plus, e.t).phi_y),
                                std::abs(f.eval(e.eta_minus, e.t).phi_y)});
    prev = &br.samples.back();
  }
  return br;
}

double chart_A(double x_minus, double x_plus) {
  return std::pow(9.0 / (4.0 * std::sqrt(3.0)) * (x_minus - x_plus), 2.0 / 3.0);
}

CuspChart cusp_chart(const EnvelopeBranches& br, const BlowupPoint& bp) {
  if (br.samples.empty()) throw Error(ErrorKind::BranchLoss, "no envelope samples");
  CuspChart c;
  std::vector<double> half, ratio, gap;
  for (const auto& e : br.samples) {
    const double tau = e.t - bp.T_eps;
    c.tau.push_back(tau);
    c.A.push_back(chart_A(e.x_minus, e.x_plus));
    c.B.push_back(0.5 * (e.x_plus + e.x_minus));
    half.push_back(0.5 * (e.x_minus - e.x_plus));
    ratio.push_back(half.back() / std::pow(tau, 1.5));
    gap.push_back(0.5 * (e.eta_plus - e.eta_minus));
    const double a15 = std::pow(c.A.back(), 1.5);
    c.max_reconstruction = std::max({c.max_reconstruction, std::abs(e.x_plus - (-kCusp * a15 + c.B.back())),
                                     std::abs(e.x_minus - (kCusp * a15 + c.B.back()))});
  }
  const auto a = poly_fit(c.tau, c.A, {1.0, 2.0});
  c.A_slope = a[0];
  c.A_curv = a[1];
  const auto b = poly_fit(c.tau, c.B, {0.0, 1.0, 2.0});
  c.B_at_T = b[0];
  c.B_slope = b[1];
  c.width_exponent = fit_loglog(c.tau, half).slope;
  c.width_coef = fit_line(c.tau, ratio).intercept;
  c.normalized_coef = c.width_coef * std::sqrt(bp.alpha()) / std::pow(bp.beta(), 1.5);
  c.eta_exponent = fit_loglog(c.tau, gap).slope;
  std::vector<double> gr;
  for (std::size_t k = 0; k < gap.size(); ++k) gr.push_back(gap[k] / std::sqrt(c.tau[k]));
  c.eta_normalized = fit_line(c.tau, gr).intercept * std::sqrt(bp.alpha() / bp.beta());
  return c;
}

const char* to_string(Region r) {
  switch (r) {
    case Region::BeforeBlowup: return "before_blowup";
    case Region::OutsidePlus: return "outside_plus";
    case Region::OutsideMinus: return "outside_minus";
    case Region::InsideCusp: return "inside_cusp";
    case Region::OnEnvelope: return "on_envelope";
  }
  return "?";
}

double d_eps(const BlowupPoint& bp, double x, double t) {
  const double tau = t - bp.T_eps;
  const double dx = x - bp.x_eps - bp.lambda_at_bp * tau;
  return std::abs(tau) * tau * tau + dx * dx;
}

namespace {

// Root of phi(., t) = x in [lo, hi], Newton from the seed when it stays inside.
double polish_root(const PhiField& f, double x, double t, double seed, double lo, double hi) {
  auto g = [&](double y, double& d) {
    const PhiSample s = f.eval(y, t);
    d = s.phi_y;
    return s.phi - x;
  };
  double y = seed, d = 0.0;
  if (y > lo && y < hi) {
    for (int it = 0; it < 12; ++it) {
      const double r = g(y, d);
      if (d == 0.0) break;
      const double yn = y - r / d;
      if (!(yn > lo && yn < hi)) break;
      const double step = std::abs(yn - y);
      y = yn;
      if (step < 1e-15 * (1.0 + std::abs(y))) return y;
    }
  }
  double dl = 0.0, dh = 0.0;
  if (g(lo, dl) * g(hi, dh) > 0.0) {
    // double root at an end of the bracket
    return std::abs(g(lo, dl)) < std::abs(g(hi, dh)) ? lo : hi;
  }
  return solve_bracketed(g, lo, hi, 1e-15);
}

}  // namespace

MultiState classify_and_roots(const PhiField& f, const BlowupPoint& bp, const EnvelopeBranches& br, double x,
                              double t, const ClassifyOptions& opts) {
  MultiState ms;
  ms.d_eps = d_eps(bp, x, t);
  auto add = [&](const std::string& tag, double y) {
    Root r;
    r.tag = tag;
    r.y = y;
    ms.roots.push_back(r);
    ms.max_residual = std::max(ms.max_residual, std::abs(f.eval(y, t).phi - x));
  };
  if (t <= bp.T_eps) {
    ms.region = Region::BeforeBlowup;
    const double guess = bp.y_eps + (x - bp.x_eps - bp.lambda_at_bp * (t - bp.T_eps));
    add("y", polish_root(f, x, t, guess, f.y_lo, f.y_hi));
    return ms;
  }
  const EnvelopeSample seed = br.seed_at(bp, t);
  const EnvelopeSample e = envelope_at(f, bp, t, br.samples.empty() ? nullptr : &seed);
  // Cardano seeds from the local cubic at the inflection point
  const PhiSample c = f.eval(e.y_center, t);
  const double p = 6.0 * c.phi_y / c.phi_yyy, q = 6.0 * (c.phi - x) / c.phi_yyy;
  const std::vector<double> h = cardano(p, q);
  auto seed_of = [&](int k) { return e.y_center + h[std::min<std::size_t>(k, h.size() - 1)]; };

  if (std::abs(x - e.x_plus) < opts.edge_tol) {
    ms.region = Region::OnEnvelope;
    add("y_-", polish_root(f, x, t, seed_of(0), f.y_lo, e.eta_minus));
    add("y_+", e.eta_plus);
  } else if (std::abs(x - e.x_minus) < opts.edge_tol) {
    ms.region = Region::OnEnvelope;
    add("y_-", e.eta_minus);
    add("y_+", polish_root(f, x, t, seed_of(2), e.eta_plus, f.y_hi));
  } else if (x > e.x_plus && x < e.x_minus) {
    ms.region = Region::InsideCusp;
    add("y_-", polish_root(f, x, t, seed_of(0), f.y_lo, e.eta_minus));
    add("y_0", polish_root(f, x, t, seed_of(1), e.eta_minus, e.eta_plus));
    add("y_+", polish_root(f, x, t, seed_of(2), e.eta_plus, f.y_hi));
  } else if (x <= e.x_plus) {
    ms.region = Region::OutsideMinus;
    add("y_-", polish_root(f, x, t, seed_of(0), f.y_lo, e.eta_minus));
  } else {
    ms.region = Region::OutsidePlus;
    add("y_+", polish_root(f, x, t, seed_of(2), e.eta_plus, f.y_hi));
  }
  return ms;
}

MultiState classify_and_roots(const CharGrid& grid, const BlowupPoint& bp, const EnvelopeBranches& br, double x,
                              double t, const ClassifyOptions& opts) {
  MultiState ms = classify_and_roots(phi_field(grid), bp, br, x, t, opts);
  for (auto& r : ms.roots) {
    r.u = grid.u_at(r.y, t);
    r.w = grid.ns ? grid.ns->to_w(r.u) : r.u;
  }
  return ms;
}

PreshockCurve preshock_curve(const CharGrid& grid, const BlowupPoint& bp, const EnvelopeBranches& br,
                             double tau_max, int steps) {
  const PhiField f = phi_field(grid);
  const FluxModel& model = grid.ns->model;
  const int i = grid.i;
  tau_max = std::min(tau_max, f.t_hi - bp.T_eps - 1e-9);
  std::vector<double> gl_x, gl_w;
  gauss_legendre01(16, gl_x, gl_w);

  // averaged-Jacobian speed between the outer branches at (x, t)
  auto speed = [&](double x, double t, bool& inside) {
    inside = true;
    if (t <= bp.T_eps) return bp.lambda_at_bp;
    const MultiState ms = classify_and_roots(f, bp, br, x, t);
    if (ms.region != Region::InsideCusp) {
      inside = false;
      return 0.0;
    }
    const Vec um = grid.u_at(ms.roots.front().y, t), up = grid.u_at(ms.roots.back().y, t);
    Mat Abar = Mat::Zero(grid.n, grid.n);
    for (std::size_t q = 0; q < gl_x.size(); ++q) Abar += gl_w[q] * model.jac(um + gl_x[q] * (up - um));
    // Offset measured against phi_t at the middle root: the fold is only
    // O(tau^1.5) wide, narrower than the mismatch between interpolated phi_t
    // and lambda_i of interpolated states when tau is tiny.
    const double ym = ms.roots[1].y;
    const double lam_mid = eigenvalues(model.jac(grid.u_at(ym, t)))[i];
    return f.eval(ym, t).phi_t + eigenvalues(Abar)[i] - lam_mid;
  };

  PreshockCurve pc;
  pc.t.push_back(bp.T_eps);
  pc.phi0.push_back(bp.x_eps);
  pc.x_minus.push_back(bp.x_eps);
  pc.x_plus.push_back(bp.x_eps);
  // The fold is c tau^1.5 wide, so close to the cusp point it is narrower
  // than the error in (T_eps, x_eps). Start at the fold midpoint at tau_s,
  // which is within O(tau_s^2) of the curve.
  const double tau_s = tau_max * 1e-2;
  std::vector<double> taus{tau_s};
  for (int k = 1; k < steps; ++k) taus.push_back(tau_s * std::pow(tau_max / tau_s, double(k) / (steps - 1)));
  double x = 0.0;
  {
    const EnvelopeSample s = br.seed_at(bp, bp.T_eps + tau_s);
    const EnvelopeSample e = envelope_at(f, bp, bp.T_eps + tau_s, &s);
    x = 0.5 * (e.x_minus + e.x_plus);
    pc.t.push_back(bp.T_eps + tau_s);
    pc.phi0.push_back(x);
    pc.x_minus.push_back(e.x_minus);
    pc.x_plus.push_back(e.x_plus);
  }
  for (std::size_t k = 1; k < taus.size(); ++k) {
    double ta = taus[k - 1];
    const double tb = taus[k];
    int guard = 0;
    while (ta < tb) {
      double h = tb - ta;
      for (;;) {
        bool ok = true, in = true;
        const double t = bp.T_eps + ta;
        const double k1 = speed(x, t, in);
        ok = ok && in;
        const double k2 = speed(x + 0.5 * h * k1, t + 0.5 * h, in);
        ok = ok && in;
        const double k3 = speed(x + 0.5 * h * k2, t + 0.5 * h, in);
        ok = ok && in;
        const double k4 = speed(x + h * k3, t + h, in);
        ok = ok && in;
        const double xn = x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0;
        if (ok) {
          const EnvelopeSample s = br.seed_at(bp, t + h);
          const EnvelopeSample e = envelope_at(f, bp, t + h, &s);
          if (xn > e.x_plus && xn < e.x_minus) {
            x = xn;
            ta += h;
            break;
          }
        }
        h *= 0.5;
        ++pc.halvings;
        if (++guard > 60) throw Error(ErrorKind::LeftCuspInterior, "pre-shock curve left the fold region");
      }
    }
    const EnvelopeSample s = br.seed_at(bp, bp.T_eps + tb);
    const EnvelopeSample e = envelope_at(f, bp, bp.T_eps + tb, &s);
    pc.t.push_back(bp.T_eps + tb);
    pc.phi0.push_back(x);
    pc.x_minus.push_back(e.x_minus);
    pc.x_plus.push_back(e.x_plus);
  }

  std::vector<double> tau, dev, dd;
  for (std::size_t k = 1; k < pc.t.size(); ++k) {
    const double tk = pc.t[k] - bp.T_eps;
    if (tk <= 0.3 * tau_max) {
      tau.push_back(tk);
      dev.push_back(pc.phi0[k] - bp.x_eps);
    }
    dd.push_back(d_eps(bp, pc.phi0[k], pc.t[k]));
  }
  const auto c = poly_fit(tau, dev, {1.0, 2.0, 3.0});
  pc.linear_coef = c[0];
  pc.quadratic_coef = c[1];
  std::vector<double> all_tau(pc.t.begin() + 1, pc.t.end());
  for (double& v : all_tau) v -= bp.T_eps;
  pc.d_exponent = fit_loglog(all_tau, dd).slope;
  return pc;
}

const HolderFit* HolderReport::find(const std::string& q) const {
  for (const auto& f : fits)
    if (f.quantity == q) return &f;
  return nullptr;
}

HolderReport holder_probe(const CharGrid& grid, const BlowupPoint& bp, const EnvelopeBranches& br,
                          const HolderOptions& opts) {
  if (!(opts.d_max / opts.d_min >= 100.0))
    throw Error(ErrorKind::InsufficientRange, "d_eps range spans fewer than 2 decades");
  const PhiField f = phi_field(grid);
  const int n = grid.n, i = grid.i;
  HolderReport rep;
  const double m = 2.0 * kCusp * std::pow(bp.beta(), 1.5) / std::sqrt(bp.alpha());
  // rays: (t offset sign, x offset law)
  enum Ray { TransPlus, TransMinus, AfterPlus, AfterMinus, BeforePlus, BeforeMinus };
  for (int ray = TransPlus; ray <= BeforeMinus; ++ray) {
    for (int k = 0; k < opts.per_ray; ++k) {
      const double d = opts.d_min * std::pow(opts.d_max / opts.d_min, double(k) / (opts.per_ray - 1));
      double x = 0.0, t = bp.T_eps;
      if (ray == TransPlus || ray == TransMinus) {
        x = bp.x_eps + (ray == TransPlus ? 1.0 : -1.0) * std::sqrt(d);
      } else {
        const double tau = std::cbrt(d / (1.0 + m * m));
        const double sgn = (ray == AfterPlus || ray == BeforePlus) ? 1.0 : -1.0;
        const double dir = (ray == AfterPlus || ray == AfterMinus) ? 1.0 : -1.0;
        t = bp.T_eps + dir * tau;
        x = bp.x_eps + bp.lambda_at_bp * dir * tau + sgn * m * std::pow(tau, 1.5);
      }
      const MultiState ms = classify_and_roots(f, bp, br, x, t);
      if (ms.roots.size() != 1) continue;
      const double y = ms.roots[0].y;
      const Vec u = grid.u_at(y, t);
      const Vec w = grid.ns ? grid.ns->to_w(u) : u;
      rep.d.push_back(ms.d_eps);
      rep.dy.push_back(std::abs(y - bp.y_eps));
      rep.dxy.push_back(std::abs(1.0 / f.eval(y, t).phi_y));
      rep.dwi.push_back(std::abs(w[i] - bp.w[i]));
      double wj = 0.0;
      for (int j = 0; j < n; ++j)
        if (j != i) wj = std::max(wj, std::abs(w[j] - bp.w[j]));
      rep.dwj.push_back(wj);
    }
  }
  auto add = [&](const std::string& q, const std::vector<double>& v, double target) {
    const LinearFit lf = fit_loglog(rep.d, v);
    HolderFit h;
    h.quantity = q;
    h.slope = lf.slope;
    h.target = target;
    h.points = lf.points;
    h.decades = std::log10(*std::max_element(rep.d.begin(), rep.d.end()) /
                           *std::min_element(rep.d.begin(), rep.d.end()));
    rep.fits.push_back(h);
  };
  if (rep.d.size() < 4) throw Error(ErrorKind::InsufficientRange, "too few probe points");
  add("y", rep.dy, 1.0 / 6.0);
  add("dy_dx", rep.dxy, -1.0 / 3.0);
  add("w_i", rep.dwi, 1.0 / 6.0);
  if (n > 1) add("w_j", rep.dwj, 1.0 / 3.0);
  return rep;
}

}  // namespace shockforge
