#include "shockforge/charsolve.hpp"

#include "shockforge/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace shockforge {
namespace {

// Lagrange weights for nodes 0..width-1 at offset s.
void lagrange_uniform(double s, int width, double* w) {
  for (int m = 0; m < width; ++m) {
    double num = 1.0, den = 1.0;
    for (int l = 0; l < width; ++l) {
      if (l == m) continue;
      num *= s - l;
      den *= m - l;
    }
    w[m] = num / den;
  }
}

// Quintic interpolation of a state field on a uniform grid; `outside` beyond it.
Vec interp_states(const std::vector<Vec>& f, double x0, double dx, double xq, const Vec& outside) {
  const int N = static_cast<int>(f.size());
  const double s = (xq - x0) / dx;
  if (s < -1e-9 || s > N - 1 + 1e-9) return outside;
  const int width = std::min(6, N);
  int start = static_cast<int>(std::floor(s)) - (width / 2 - 1);
  start = std::clamp(start, 0, N - width);
  double w[6];
  lagrange_uniform(s - start, width, w);
  Vec out = Vec::Zero(f[0].size());
  for (int m = 0; m < width; ++m) out += w[m] * f[start + m];
  return out;
}

double lambda_i_scalar(const FluxModel& model, const Vec& u) { return model.jac(u)(0, 0); }

SmoothPhase smooth_scalar(const NormalizedSystem& ns, const InitialData& data, double t0,
                          const std::vector<double>& x) {
  const FluxModel& model = ns.model;
  SmoothPhase sp;
  sp.t0 = t0;
  sp.x = x;
  const int N = static_cast<int>(x.size());
  // speed range of the data for bracketing
  double lo = lambda_i_scalar(model, Vec::Zero(1)), hi = lo;
  const int probes = 4096;
  double minK = 1.0;
  for (int k = 0; k <= probes; ++k) {
    const double xi = data.a + (data.b - data.a) * k / probes;
    const Vec u = data.u(xi);
    const double lam = lambda_i_scalar(model, u);
    lo = std::min(lo, lam);
    hi = std::max(hi, lam);
    const double h = fd_step(u);
    Vec up = u, um = u;
    up[0] += h;
    um[0] -= h;
    const double dlam = (lambda_i_scalar(model, up) - lambda_i_scalar(model, um)) / (2 * h);
    minK = std::min(minK, 1.0 + dlam * data.epsilon * data.dprofile(xi)[0] * t0);
  }
  sp.min_K = minK;
  if (!(minK > 0.0)) throw Error(ErrorKind::EarlyCrossing, "characteristics cross before the handoff time");

  sp.u.resize(N);
  sp.xi = x;
  sp.X.resize(N);
  auto solve_at = [model, data, t0, lo, hi](double xq) {
    auto g = [&](double xi, double& dg) {
      const Vec uu = data.u(xi);
      const double h = fd_step(uu);
      Vec up = uu, um = uu;
      up[0] += h;
      um[0] -= h;
      const double dlam = (lambda_i_scalar(model, up) - lambda_i_scalar(model, um)) / (2 * h);
      dg = 1.0 + dlam * data.epsilon * data.dprofile(xi)[0] * t0;
      return xi + lambda_i_scalar(model, uu) * t0 - xq;
    };
    const double a = xq - hi * t0 - 1e-9, b = xq - lo * t0 + 1e-9;
    return data.u(solve_bracketed(g, std::min(a, b), std::max(a, b), 1e-15));
  };
  for (int k = 0; k < N; ++k) {
    sp.X[k] = x[k] + lambda_i_scalar(model, data.u(x[k])) * t0;
    sp.u[k] = solve_at(x[k]);
    sp.sup_u = std::max(sp.sup_u, sp.u[k].cwiseAbs().maxCoeff());
  }
  sp.exact = solve_at;
  return sp;
}

}  // namespace

double lambda_star(const NormalizedSystem& ns) {
  return std::max(2.0 * ns.at0.lambdas.cwiseAbs().maxCoeff(), 1.0);
}

Vec SmoothPhase::state(double xq) const {
  if (exact) return exact(xq);
  return interp_states(u, x.front(), x[1] - x[0], xq, Vec::Zero(u.front().size()));
}

double SmoothPhase::label(double y) const {
  if (X.size() < 2) return y;
  if (y <= X.front()) return xi.front() + (y - X.front());
  if (y >= X.back()) return xi.back() + (y - X.back());
  const auto it = std::upper_bound(X.begin(), X.end(), y);
  const int k = static_cast<int>(it - X.begin()) - 1;
  // cubic through four neighbours of the inverse map
  const int N = static_cast<int>(X.size());
  const int s = std::clamp(k - 1, 0, N - 4);
  double c[4];
  fd_weights(y, &X[s], 4, 0, c);
  double out = 0.0;
  for (int m = 0; m < 4; ++m) out += c[m] * xi[s + m];
  return out;
}

SmoothPhase smooth_evolve(const NormalizedSystem& ns, const InitialData& data, double t0,
                          const CharsolveOptions& opts) {
  const FluxModel& model = ns.model;
  const int n = model.n;
  const int i = ns.i;
  const double lam_i0 = ns.at0.lambdas[i];
  const double margin = opts.y_margin > 0.0 ? opts.y_margin : lambda_star(ns) + 1.5;
  const double x_lo = std::min(data.a, data.a + lam_i0 * t0) - margin - 2.0;
  const double x_hi = std::max(data.b, data.b + lam_i0 * t0) + margin + 2.0;
  const int N = std::max(opts.nx_smooth, 16);
  std::vector<double> x(N);
  const double dx = (x_hi - x_lo) / (N - 1);
  for (int k = 0; k < N; ++k) x[k] = x_lo + k * dx;

  if (n == 1) {
    SmoothPhase sp = smooth_scalar(ns, data, t0, x);
    sp.ya = data.a + lam_i0 * t0;
    sp.yb = data.b + lam_i0 * t0;
    return sp;
  }

  SmoothPhase sp;
  sp.t0 = t0;
  sp.x = x;
  sp.ya = data.a + lam_i0 * t0;
  sp.yb = data.b + lam_i0 * t0;
  const Vec zero = Vec::Zero(n);

  std::vector<Vec> U(N);
  std::vector<EigenStructure> E(N);
  for (int k = 0; k < N; ++k) {
    U[k] = data.u(x[k]);
    E[k] = eigen_decompose(model, U[k], &ns.at0);
  }
  const double lam_max = std::max(ns.at0.lambdas.cwiseAbs().maxCoeff(), 1e-3) * 1.05;
  int steps = static_cast<int>(std::ceil(t0 / (opts.smooth_cfl * dx / lam_max)));
  steps = std::clamp(steps, t0 > 0.0 ? 1 : 0, std::max(opts.smooth_max_steps, 1));
  const double dt = steps > 0 ? t0 / steps : 0.0;

  // i-characteristics seeded at every node, to measure stretching.
  std::vector<double> Xc = x;

  // cubic interpolation of cached eigen data
  struct Spot {
    int start = 0;
    double w[4] = {0, 0, 0, 0};
    bool inside = true;
  };
  auto spot = [&](double xq) {
    Spot sp4;
    const double s = (xq - x_lo) / dx;
    if (s < 0.0 || s > N - 1) {
      sp4.inside = false;
      return sp4;
    }
    sp4.start = std::clamp(static_cast<int>(std::floor(s)) - 1, 0, N - 4);
    lagrange_uniform(s - sp4.start, 4, sp4.w);
    return sp4;
  };
  auto lam_at = [&](const std::vector<EigenStructure>& EE, double xq, int j) {
    const Spot s = spot(xq);
    if (!s.inside) return ns.at0.lambdas[j];
    double v = 0.0;
    for (int m = 0; m < 4; ++m) v += s.w[m] * EE[s.start + m].lambdas[j];
    return v;
  };
  auto left_at = [&](const std::vector<EigenStructure>& EE, double xq, int j) -> RowVec {
    const Spot s = spot(xq);
    if (!s.inside) return ns.at0.l(j);
    RowVec v = RowVec::Zero(n);
    for (int m = 0; m < 4; ++m) v += s.w[m] * EE[s.start + m].l(j);
    return v;
  };

  const int snap_every = std::max(1, steps / 8);
  std::vector<Vec> Un(N);
  std::vector<EigenStructure> En(N);
  for (int step = 0; step < steps; ++step) {
    for (int k = 0; k < N; ++k) {
      Vec uP = U[k];
      EigenStructure eP = E[k];
      for (int it = 0; it < 2; ++it) {
        Mat L(n, n);
        Vec rhs(n);
        for (int j = 0; j < n; ++j) {
          const double lamP = eP.lambdas[j];
          double xq = x[k] - lamP * dt;
          xq = x[k] - 0.5 * (lamP + lam_at(E, xq, j)) * dt;
          xq = x[k] - 0.5 * (lamP + lam_at(E, xq, j)) * dt;
          const Vec uQ = interp_states(U, x_lo, dx, xq, zero);
          const RowVec lb = 0.5 * (eP.l(j) + left_at(E, xq, j));
          L.row(j) = lb;
          rhs[j] = lb.dot(uQ.transpose());
        }
        uP = L.partialPivLu().solve(rhs);
        eP = eigen_decompose(model, uP, &E[k]);
      }
      Un[k] = uP;
      En[k] = eP;
    }
    // Heun update of the tracked i-characteristics
    for (int k = 0; k < N; ++k) {
      const double s1 = lam_at(E, Xc[k], i);
      const double s2 = lam_at(En, Xc[k] + dt * s1, i);
      Xc[k] += 0.5 * dt * (s1 + s2);
    }
    U.swap(Un);
    E.swap(En);
    double mk = std::numeric_limits<double>::infinity();
    for (int k = 0; k + 1 < N; ++k) mk = std::min(mk, (Xc[k + 1] - Xc[k]) / dx);
    sp.min_K = std::min(sp.min_K, mk);
    if (!(mk > 0.0)) {
      std::ostringstream os;
      os << "characteristics cross at t = " << (step + 1) * dt << " before the handoff time " << t0;
      throw Error(ErrorKind::EarlyCrossing, os.str());
    }
    for (const Vec& v : U) sp.sup_u = std::max(sp.sup_u, v.cwiseAbs().maxCoeff());
    if ((step + 1) % snap_every == 0 && step + 1 < steps) {
      sp.snap_t.push_back((step + 1) * dt);
      sp.snap_u.push_back(U);
    }
  }
  sp.u = U;
  sp.xi = x;
  sp.X = Xc;
  return sp;
}

// ---------------------------------------------------------------------------
// CharGrid

Vec CharGrid::u_node(int level, int k) const {
  Vec v(n);
  const double* p = &u[(static_cast<std::size_t>(level) * ny() + k) * n];
  for (int c = 0; c < n; ++c) v[c] = p[c];
  return v;
}

void CharGrid::set_u(int level, int k, const Vec& v) {
  double* p = &u[(static_cast<std::size_t>(level) * ny() + k) * n];
  for (int c = 0; c < n; ++c) p[c] = v[c];
}

namespace {

struct Stencil2 {
  int ys = 0, ts = 0, wy = 6, wt = 4;
  double cy[4 * 6];  // derivatives 0..3
  double ct[2 * 4];  // derivatives 0..1
};

Stencil2 make_stencil(const CharGrid& g, double yq, double tq) {
  Stencil2 s;
  s.wy = std::min(6, g.ny());
  s.wt = std::min(4, g.nt());
  s.ys = stencil_start(g.y, yq, s.wy);
  s.ts = stencil_start(g.t, tq, s.wt);
  double cy[4 * 6], ct[2 * 4];
  fd_weights(yq, &g.y[s.ys], s.wy, 3, cy);
  fd_weights(tq, &g.t[s.ts], s.wt, 1, ct);
  for (int d = 0; d < 4; ++d)
    for (int m = 0; m < s.wy; ++m) s.cy[d * 6 + m] = cy[d * s.wy + m];
  for (int d = 0; d < 2; ++d)
    for (int m = 0; m < s.wt; ++m) s.ct[d * 4 + m] = ct[d * s.wt + m];
  return s;
}

}  // namespace

PhiSample CharGrid::sample(double yq, double tq) const {
  const Stencil2 s = make_stencil(*this, yq, tq);
  PhiSample out;
  const int NY = ny();
  for (int a = 0; a < s.wt; ++a) {
    const double* row = &phi[static_cast<std::size_t>(s.ts + a) * NY + s.ys];
    double d[4] = {0, 0, 0, 0};
    for (int m = 0; m < s.wy; ++m)
      for (int q = 0; q < 4; ++q) d[q] += s.cy[q * 6 + m] * row[m];
    const double c0 = s.ct[a], c1 = s.ct[4 + a];
    out.phi += c0 * d[0];
    out.phi_y += c0 * d[1];
    out.phi_yy += c0 * d[2];
    out.phi_yyy += c0 * d[3];
    out.phi_t += c1 * d[0];
    out.phi_yt += c1 * d[1];
    out.phi_yyt += c1 * d[2];
  }
  return out;
}

Vec CharGrid::u_at(double yq, double tq, Vec* du_dy, Vec* du_dt) const {
  const Stencil2 s = make_stencil(*this, yq, tq);
  Vec v = Vec::Zero(n), vy = Vec::Zero(n), vt = Vec::Zero(n);
  for (int a = 0; a < s.wt; ++a)
    for (int m = 0; m < s.wy; ++m) {
      const Vec node = u_node(s.ts + a, s.ys + m);
      v += s.ct[a] * s.cy[m] * node;
      vy += s.ct[a] * s.cy[6 + m] * node;
      vt += s.ct[4 + a] * s.cy[m] * node;
    }
  if (du_dy) *du_dy = vy;
  if (du_dt) *du_dt = vt;
  return v;
}

double CharGrid::min_K(int level, int* argmin) const {
  const int NY = ny();
  const double* row = &K[static_cast<std::size_t>(level) * NY];
  const int k = static_cast<int>(std::min_element(row, row + NY) - row);
  if (argmin) *argmin = k;
  return row[k];
}

Vec CharGrid::characteristic_derivatives(double yq, double tq) const {
  Vec uy, ut;
  const Vec uu = u_at(yq, tq, &uy, &ut);
  const Vec v = ns->to_w(uu);
  const Mat J = ns->dw_du(uu);
  const Vec vy = J * uy, vt = J * ut;
  const EigenStructure e = ns->eig_w(v);
  Vec h(n);
  for (int j = 0; j < n; ++j) h[j] = j == i ? e.l(j).dot(vy.transpose()) : e.l(j).dot(vt.transpose());
  return h;
}

void CharGrid::write_csv(const std::string& path, int stride_y, int stride_t) const {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Config, "cannot write " + path);
  os << "y,t,phi,K";
  for (int c = 0; c < n; ++c) os << ",v_" << c + 1;
  os << "\n";
  os.precision(12);
  const int NY = ny();
  for (int l = 0; l < nt(); l += std::max(stride_t, 1))
    for (int k = 0; k < NY; k += std::max(stride_y, 1)) {
      const std::size_t id = static_cast<std::size_t>(l) * NY + k;
      const Vec v = ns ? ns->to_w(u_node(l, k)) : u_node(l, k);
      os << y[k] << "," << t[l] << "," << phi[id] << "," << K[id];
      for (int c = 0; c < n; ++c) os << "," << v[c];
      os << "\n";
    }
}

namespace {
const char kGridMagic[8] = {'S', 'F', 'C', 'H', 'G', 'R', 'D', '1'};

template <typename T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
bool get(std::ifstream& is, T& v) {
  return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof(T)));
}
void put_vec(std::ofstream& os, const std::vector<double>& v) {
  put(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}
bool get_vec(std::ifstream& is, std::vector<double>& v) {
  std::uint64_t size = 0;
  if (!get(is, size) || size > (1ull << 32)) return false;
  v.resize(size);
  return static_cast<bool>(
      is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(size * sizeof(double))));
}
}  // namespace

void CharGrid::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Config, "cannot write " + path);
  os.write(kGridMagic, 8);
  put(os, static_cast<std::int32_t>(n));
  put(os, static_cast<std::int32_t>(i));
  put(os, t0);
  put_vec(os, y);
  put_vec(os, t);
  put_vec(os, phi);
  put_vec(os, K);
  put_vec(os, u);
}

bool CharGrid::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return false;
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kGridMagic, 8) != 0) return false;
  std::int32_t nn = 0, ii = 0;
  if (!get(is, nn) || !get(is, ii) || !get(is, t0)) return false;
  n = nn;
  i = ii;
  return get_vec(is, y) && get_vec(is, t) && get_vec(is, phi) && get_vec(is, K) && get_vec(is, u) &&
         phi.size() == y.size() * t.size() && u.size() == phi.size() * static_cast<std::size_t>(n);
}

// ---------------------------------------------------------------------------
// Blowup system

namespace {

std::vector<double> graded_levels(double t0, double T_hat, double t_end, const CharsolveOptions& o) {
  const double t_f = std::max(t0, T_hat * (1.0 - o.fine_frac));
  const int nf = std::max(o.nt_fine, 4);
  const double dt_f = (t_end - t_f) / nf;
  const double cap = std::max(0.25, T_hat / 100.0);
  std::vector<double> back;
  double cur = t_f, step = dt_f;
  while (cur - step > t0 + 0.5 * step) {
    cur -= step;
    back.push_back(cur);
    step = std::min(step / o.grade_ratio, cap);
  }
  std::vector<double> t{t0};
  for (auto it = back.rbegin(); it != back.rend(); ++it) t.push_back(*it);
  if (t_f > t0) t.push_back(t_f);
  for (int m = 1; m <= nf; ++m) t.push_back(t_f + m * dt_f);
  return t;
}

class BlowupSolver {
 public:
  BlowupSolver(const NormalizedSystem& ns, CharGrid& g, const CharsolveOptions& o)
      : ns_(ns), g_(g), o_(o), n_(g.n), i_(g.i), NY_(g.ny()) {
    const std::size_t cells = static_cast<std::size_t>(g.nt()) * NY_;
    lam_.assign(cells * n_, 0.0);
    left_.assign(cells * n_ * n_, 0.0);
    prev_.resize(NY_);
    cur_.resize(NY_);
  }

  void init_level0(const SmoothPhase& hp) {
    for (int k = 0; k < NY_; ++k) {
      const Vec v = hp.state(g_.y[k]);
      g_.set_u(0, k, v);
      g_.phi[k] = g_.y[k];
      g_.K[k] = 1.0;
      prev_[k] = eigen_decompose(ns_.model, v, &ns_.at0);
      store_eig(0, k, prev_[k]);
    }
  }

  void advance(int lvl) {
    const double tol = o_.sweep_tol;
    // linear extrapolation as the initial guess
    for (int k = 0; k < NY_; ++k) {
      Vec guess = g_.u_node(lvl - 1, k);
      if (lvl >= 2) {
        const double r = (g_.t[lvl] - g_.t[lvl - 1]) / (g_.t[lvl - 1] - g_.t[lvl - 2]);
        guess += r * (guess - g_.u_node(lvl - 2, k));
      }
      g_.set_u(lvl, k, guess);
      cur_[k] = eigen_decompose(ns_.model, guess, &prev_[k]);
      store_eig(lvl, k, cur_[k]);
    }
    update_phi(lvl);
    double change = 0.0;
    int sweep = 0;
    for (; sweep < o_.max_sweeps; ++sweep) {
      change = 0.0;
      const bool forward = sweep % 2 == 0;
      for (int c = 0; c < NY_; ++c) change = std::max(change, solve_node(lvl, forward ? c : NY_ - 1 - c));
      update_phi(lvl);
      g_.sweeps++;
      if (change <= tol) break;
    }
    g_.sweep_residual = std::max(g_.sweep_residual, change);
    if (change > 1e3 * tol && change > 1e-12) {
      std::ostringstream os;
      os << "sweeps did not settle at t = " << g_.t[lvl] << " (change " << change << ")";
      throw Error(ErrorKind::StepFailure, os.str());
    }
    prev_.swap(cur_);
  }

 private:
  double lam(int lvl, int k, int j) const { return lam_[(static_cast<std::size_t>(lvl) * NY_ + k) * n_ + j]; }
  const double* left(int lvl, int k, int j) const {
    return &left_[((static_cast<std::size_t>(lvl) * NY_ + k) * n_ + j) * n_];
  }
  void store_eig(int lvl, int k, const EigenStructure& e) {
    double* lp = &lam_[(static_cast<std::size_t>(lvl) * NY_ + k) * n_];
    double* lf = &left_[(static_cast<std::size_t>(lvl) * NY_ + k) * n_ * n_];
    for (int j = 0; j < n_; ++j) {
      lp[j] = e.lambdas[j];
      for (int c = 0; c < n_; ++c) lf[j * n_ + c] = e.left(j, c);
    }
  }

  void update_phi(int lvl) {
    const double dt = g_.t[lvl] - g_.t[lvl - 1];
    const std::size_t a = static_cast<std::size_t>(lvl) * NY_, b = a - NY_;
    for (int k = 0; k < NY_; ++k) g_.phi[a + k] = g_.phi[b + k] + 0.5 * dt * (lam(lvl, k, i_) + lam(lvl - 1, k, i_));
    derivative4(&g_.phi[a], NY_, g_.dy(), &g_.K[a]);
  }

  // State, left row j, speeds and K at column k, time tq <= t[lvl].
  struct Foot {
    Vec u;
    RowVec l;
    double dlam = 0.0;
    double K = 1.0;
  };

  Foot foot_on_column(int lvl, int k, int j, double tq) const {
    Foot f;
    // bracketing levels m, m+1 with m + 1 <= lvl
    int m = locate(g_.t, tq);
    m = std::min(m, lvl - 1);
    const double th = (tq - g_.t[m]) / (g_.t[m + 1] - g_.t[m]);
    const std::size_t a = static_cast<std::size_t>(m) * NY_ + k, b = a + NY_;
    f.K = (1 - th) * g_.K[a] + th * g_.K[b];
    f.dlam = (1 - th) * (lam(m, k, j) - lam(m, k, i_)) + th * (lam(m + 1, k, j) - lam(m + 1, k, i_));
    f.l.resize(n_);
    const double* l0 = left(m, k, j);
    const double* l1 = left(m + 1, k, j);
    for (int c = 0; c < n_; ++c) f.l[c] = (1 - th) * l0[c] + th * l1[c];
    // cubic in t from levels <= lvl
    const int width = std::min(4, lvl + 1);
    const int s = std::clamp(m - 1, 0, lvl + 1 - width);
    double c[4];
    fd_weights(tq, &g_.t[s], width, 0, c);
    f.u = Vec::Zero(n_);
    for (int q = 0; q < width; ++q) f.u += c[q] * g_.u_node(s + q, k);
    return f;
  }

  Foot foot_on_initial_line(double yq, int j) const {
    Foot f;
    const double dy = g_.dy();
    const double s = (yq - g_.y.front()) / dy;
    int k = std::clamp(static_cast<int>(std::floor(s)), 0, NY_ - 2);
    const double th = std::clamp(s - k, 0.0, 1.0);
    f.l.resize(n_);
    const double* l0 = left(0, k, j);
    const double* l1 = left(0, k + 1, j);
    for (int c = 0; c < n_; ++c) f.l[c] = (1 - th) * l0[c] + th * l1[c];
    const int width = std::min(6, NY_);
    int st = std::clamp(static_cast<int>(std::floor(s)) - 2, 0, NY_ - width);
    double w[6];
    lagrange_uniform(s - st, width, w);
    f.u = Vec::Zero(n_);
    for (int q = 0; q < width; ++q) f.u += w[q] * g_.u_node(0, st + q);
    return f;
  }

  double solve_node(int lvl, int k) {
    const double tn = g_.t[lvl], t0 = g_.t.front();
    const double dy = g_.dy();
    const EigenStructure& eP = cur_[k];
    const double KP = g_.K[static_cast<std::size_t>(lvl) * NY_ + k];
    Mat L(n_, n_);
    Vec rhs(n_);
    {
      const double* lo = left(lvl - 1, k, i_);
      RowVec lb(n_);
      for (int c = 0; c < n_; ++c) lb[c] = 0.5 * (eP.left(i_, c) + lo[c]);
      L.row(i_) = lb;
      rhs[i_] = lb.dot(g_.u_node(lvl - 1, k).transpose());
    }
    for (int j = 0; j < n_; ++j) {
      if (j == i_) continue;
      const double dl = eP.lambdas[j] - eP.lambdas[i_];
      const int s = (KP == 0.0 ? (dl > 0 ? 1 : -1) : ((dl > 0) == (KP > 0) ? 1 : -1));
      const int kk = k - s;
      Foot f;
      if (kk < 0 || kk >= NY_) {
        ++g_.boundary_gap_hits;
        f.u = g_.u_node(0, k);
        f.l = eP.l(j);
      } else {
        double tau = dy * std::abs(KP) / std::abs(dl);
        bool on_line = tn - tau <= t0;
        if (!on_line) {
          const Foot q = foot_on_column(lvl, kk, j, tn - tau);
          tau = dy * std::abs(0.5 * (KP + q.K)) / std::abs(0.5 * (dl + q.dlam));
          on_line = tn - tau <= t0;
          if (!on_line) f = foot_on_column(lvl, kk, j, tn - tau);
        }
        if (on_line) f = foot_on_initial_line(g_.y[k] - s * dy * (tn - t0) / tau, j);
      }
      RowVec lb = 0.5 * (eP.l(j) + f.l);
      L.row(j) = lb;
      rhs[j] = lb.dot(f.u.transpose());
    }
    const Vec uP = L.partialPivLu().solve(rhs);
    const Vec old = g_.u_node(lvl, k);
    g_.set_u(lvl, k, uP);
    cur_[k] = eigen_decompose(ns_.model, uP, &prev_[k]);
    store_eig(lvl, k, cur_[k]);
    return (uP - old).cwiseAbs().maxCoeff();
  }

  const NormalizedSystem& ns_;
  CharGrid& g_;
  const CharsolveOptions& o_;
  int n_, i_, NY_;
  std::vector<double> lam_, left_;
  std::vector<EigenStructure> prev_, cur_;
};

}  // namespace

CharGrid solve_blowup_system(const NormalizedSystem& ns, const SmoothPhase& handoff, double T_hat,
                             const CharsolveOptions& opts) {
  if (!(handoff.min_K > 0.0)) throw Error(ErrorKind::EarlyCrossing, "handoff state already folded");
  CharGrid g;
  g.n = ns.model.n;
  g.i = ns.i;
  g.t0 = handoff.t0;
  g.ns = &ns;
  const double t_end =
      opts.t_end > 0.0 ? opts.t_end : T_hat * (1.0 + opts.fine_frac) + opts.delta_ext + 0.3;
  if (!(t_end > g.t0)) throw Error(ErrorKind::OutOfDomain, "t_end must exceed the handoff time");
  const double margin = opts.y_margin > 0.0 ? opts.y_margin : lambda_star(ns) + 1.5;
  const double y0 = handoff.ya - margin, y1 = handoff.yb + margin;
  const int NY = std::max(opts.ny, 8);
  g.y.resize(NY);
  for (int k = 0; k < NY; ++k) g.y[k] = y0 + (y1 - y0) * k / (NY - 1);
  g.t = graded_levels(g.t0, T_hat, t_end, opts);
  const std::size_t cells = static_cast<std::size_t>(g.nt()) * NY;
  g.phi.assign(cells, 0.0);
  g.K.assign(cells, 0.0);
  g.u.assign(cells * g.n, 0.0);
  g.boundary_left = handoff.state(y0);
  g.boundary_right = handoff.state(y1);

  BlowupSolver solver(ns, g, opts);
  solver.init_level0(handoff);
  for (int l = 1; l < g.nt(); ++l) solver.advance(l);
  return g;
}

// ---------------------------------------------------------------------------
// Physical sampling

std::vector<Branch> sample_physical(const CharGrid& grid, double x, double t) {
  const double tlo = grid.t.front(), thi = grid.t.back();
  if (t < tlo - 1e-12 || t > thi + 1e-12) throw Error(ErrorKind::OutOfDomain, "time outside the grid");
  t = std::clamp(t, tlo, thi);
  const int NY = grid.ny();
  // K along the nodes at this time
  const int ts = stencil_start(grid.t, t, std::min(4, grid.nt()));
  const int wt = std::min(4, grid.nt());
  double ct[4];
  fd_weights(t, &grid.t[ts], wt, 0, ct);
  std::vector<double> Kn(NY);
  for (int k = 0; k < NY; ++k) {
    double s = 0.0;
    for (int a = 0; a < wt; ++a) s += ct[a] * grid.K[static_cast<std::size_t>(ts + a) * NY + k];
    Kn[k] = s;
  }
  auto kfun = [&](double y, double& d) {
    const PhiSample p = grid.sample(y, t);
    d = p.phi_yy;
    return p.phi_y;
  };
  // split [y0, y_end] into monotone pieces of phi
  std::vector<double> cuts{grid.y.front()};
  for (int k = 0; k + 1 < NY; ++k) {
    if (Kn[k] * Kn[k + 1] < 0.0) {
      cuts.push_back(solve_bracketed(kfun, grid.y[k], grid.y[k + 1], 1e-14));
    } else if (k > 0 && Kn[k] <= Kn[k - 1] && Kn[k] <= Kn[k + 1] && Kn[k] > 0.0 && Kn[k] < 0.05) {
      // a fold could hide between nodes: look at the interpolated minimum
      auto kyy = [&](double y, double& d) {
        const PhiSample p = grid.sample(y, t);
        d = p.phi_yyy;
        return p.phi_yy;
      };
      double a = grid.y[k - 1], b = grid.y[k + 1], d = 0.0;
      if (kyy(a, d) * kyy(b, d) > 0.0) continue;
      const double ym = solve_bracketed(kyy, a, b, 1e-14);
      if (grid.sample(ym, t).phi_y < 0.0) {
        cuts.push_back(solve_bracketed(kfun, a, ym, 1e-14));
        cuts.push_back(solve_bracketed(kfun, ym, b, 1e-14));
      }
    }
  }
  cuts.push_back(grid.y.back());
  std::sort(cuts.begin(), cuts.end());

  auto f = [&](double y, double& d) {
    const PhiSample p = grid.sample(y, t);
    d = p.phi_y;
    return p.phi - x;
  };
  std::vector<Branch> out;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    double d = 0.0;
    const double fa = f(cuts[c], d), fb = f(cuts[c + 1], d);
    if (fa * fb > 0.0) continue;
    const double yr = solve_bracketed(f, cuts[c], cuts[c + 1], 1e-15);
    if (!out.empty() && std::abs(out.back().y - yr) < 1e-12) continue;
    Branch b;
    b.y = yr;
    b.u = grid.u_at(yr, t);
    b.w = grid.ns ? grid.ns->to_w(b.u) : b.u;
    out.push_back(b);
  }
  if (out.empty()) throw Error(ErrorKind::OutOfDomain, "x outside the image of the characteristic map");
  return out;
}

}  // namespace shockforge
