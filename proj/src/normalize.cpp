#include "shockforge/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace shockforge {

namespace {

std::vector<int> others_of(int n, int i) {
  std::vector<int> o;
  for (int j = 0; j < n; ++j)
    if (j != i) o.push_back(j);
  return o;
}

// Projection of u onto the transversal {ri0 . u = 0} along the r_i integral
// curve, parametrized by theta = ri0 . u.
Vec project_transversal(const FluxModel& model, int i, const EigenStructure& at0, const Vec& ri0,
                        const Vec& u0, double step) {
  const double theta0 = ri0.dot(u0);
  const int steps = std::max(2, static_cast<int>(std::ceil(std::abs(theta0) / step)));
  const double h = -theta0 / steps;
  auto rhs = [&](const Vec& u) {
    if (u.cwiseAbs().maxCoeff() >= model.box)
      throw Error(ErrorKind::OutOfBox, "r_i integral curve left the validity box");
    const EigenStructure es = eigen_decompose(model, u, &at0);
    const Vec r = es.right.col(i);
    return Vec(r / ri0.dot(r));
  };
  Vec u = u0;
  for (int s = 0; s < steps; ++s) {
    const Vec k1 = rhs(u);
    const Vec k2 = rhs(u + 0.5 * h * k1);
    const Vec k3 = rhs(u + 0.5 * h * k2);
    const Vec k4 = rhs(u + h * k3);
    u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return u;
}

double inf_norm(const Mat& A) { return A.cwiseAbs().rowwise().sum().maxCoeff(); }

}  // namespace

Vec NormalizedSystem::riemann_invariants_ode(const Vec& u) const {
  const int n = model.n;
  Vec q(n - 1);
  if (n == 1) return q;
  const Vec p = project_transversal(model, i, at0, ri0, u, opts.rk_step);
  for (int j = 0; j < n - 1; ++j) q[j] = zeta[j].dot(p.transpose());
  return q;
}

Vec NormalizedSystem::riemann_invariants(const Vec& u) const {
  if (fwd_ && fwd_->contains(u)) return fwd_->eval(u);
  return riemann_invariants_ode(u);
}

Vec NormalizedSystem::tilde_from_q(const Vec& u, const Vec& q) const {
  const int n = model.n;
  Vec t(n);
  int c = 0;
  for (int j = 0; j < n; ++j) t[j] = (j == i) ? ri0.dot(u) : q[c++];
  return t;
}

Vec NormalizedSystem::tilde(const Vec& u) const { return tilde_from_q(u, riemann_invariants(u)); }

Vec NormalizedSystem::to_w(const Vec& u) const { return M * tilde(u); }

Mat NormalizedSystem::dw_du(const Vec& u) const {
  const int n = model.n;
  Mat D(n, n);
  if (n == 1) {
    D(0, 0) = ri0[0];
    return M * D;
  }
  Mat Jq;
  if (fwd_ && fwd_->contains(u)) {
    fwd_->eval(u, Jq);
  } else {
    const double h = 1e-6;
    Jq.resize(n - 1, n);
    Vec up = u, um = u;
    for (int k = 0; k < n; ++k) {
      up[k] = u[k] + h;
      um[k] = u[k] - h;
      Jq.col(k) = (riemann_invariants_ode(up) - riemann_invariants_ode(um)) / (2.0 * h);
      up[k] = u[k];
      um[k] = u[k];
    }
  }
  int c = 0;
  for (int j = 0; j < n; ++j) {
    if (j == i) D.row(j) = ri0.transpose();
    else D.row(j) = Jq.row(c++);
  }
  return M * D;
}

Vec NormalizedSystem::to_u(const Vec& w) const {
  Vec u;
  int iters = 40;
  if (inv_ && inv_->contains(w)) {
    u = inv_->eval(w);
    iters = 3;
  } else {
    u = dudw0 * w;
  }
  for (int it = 0; it < iters; ++it) {
    const Vec r = to_w(u) - w;
    if (r.cwiseAbs().maxCoeff() < 1e-15 * (1.0 + w.cwiseAbs().maxCoeff())) break;
    const Vec du = dw_du(u).partialPivLu().solve(r);
    u -= du;
    if (du.cwiseAbs().maxCoeff() < 1e-16) break;
  }
  return u;
}

Mat NormalizedSystem::A(const Vec& w) const {
  const Vec u = to_u(w);
  const Mat J = dw_du(u);
  return J * model.jac(u) * J.inverse();
}

PointW NormalizedSystem::at_u(const Vec& u) const {
  PointW p;
  p.u = u;
  p.w = to_w(u);
  p.dwdu = dw_du(u);
  p.F = eigen_decompose(model, u, &at0);
  p.lambdas = p.F.lambdas;
  p.left_w = p.F.left * p.dwdu.inverse();
  return p;
}

PointW NormalizedSystem::at_w(const Vec& w) const {
  PointW p = at_u(to_u(w));
  p.w = w;
  return p;
}

EigenStructure NormalizedSystem::eig_w(const Vec& w) const {
  const PointW p = at_w(w);
  EigenStructure es;
  es.lambdas = p.lambdas;
  es.left = p.left_w;
  es.right = p.dwdu * p.F.right;
  es.gap = p.F.gap;
  return es;
}

Mat NormalizedSystem::p_coeffs(const Vec& w) const {
  const Mat L = at_w(w).left_w;
  const int n = model.n;
  Mat P(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) P(j, k) = L(j, k) / L(j, j);
  return P;
}

std::function<Vec(const Vec&)> riemann_invariants(const FluxModel& model, int i, const NormalizeOptions& opts) {
  NormalizeOptions o = opts;
  o.use_chart = false;
  auto ns = std::make_shared<NormalizedSystem>(build_transform(model, i, o));
  return [ns](const Vec& u) { return ns->riemann_invariants(u); };
}

NormalizedSystem build_transform(const FluxModel& model, int i, const NormalizeOptions& opts) {
  const int n = model.n;
  if (i < 0 || i >= n) throw Error(ErrorKind::Config, "field index out of range");
  NormalizedSystem ns;
  ns.model = model;
  ns.i = i;
  ns.opts = opts;
  ns.opts.u_box = std::min(opts.u_box, 0.9 * model.box);
  const Vec zero = Vec::Zero(n);
  ns.at0 = eigen_decompose(model, zero);
  ns.ri0 = ns.at0.right.col(i);

  // Orthonormal basis of ri0-perp from the standard basis with e_i dropped.
  const auto others = others_of(n, i);
  std::vector<Vec> basis{ns.ri0};
  for (int j : others) {
    Vec v = Vec::Zero(n);
    v[j] = 1.0;
    for (const auto& b : basis) v -= b.dot(v) * b;
    const double nv = v.norm();
    if (nv < 1e-8) throw Error(ErrorKind::SingularConstruction, "r_i(0) has no e_i component");
    v /= nv;
    basis.push_back(v);
    ns.zeta.push_back(v.transpose());
  }

  ns.D0.resize(n, n);
  for (int j = 0, c = 0; j < n; ++j) {
    if (j == i) ns.D0.row(j) = ns.ri0.transpose();
    else ns.D0.row(j) = ns.zeta[c++];
  }
  const Mat F0 = model.jac(zero);
  const Mat At = ns.D0 * F0 * ns.D0.inverse();

  // Diagonalize the block without row/column i.
  const int m = n - 1;
  ns.Bn1 = Mat::Identity(m, m);
  if (m >= 1) {
    Mat blk(m, m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) blk(a, b) = At(others[a], others[b]);
    ns.Bn1 = eigen_decompose(blk).right;
  }
  Mat Minv0 = Mat::Identity(n, n);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) Minv0(others[a], others[b]) = ns.Bn1(a, b);
  const Mat Ahat = Minv0.inverse() * At * Minv0;

  // k_j (lambda_i - a_jj) - sum_{l != i, j} k_l a_lj = -a_ij
  ns.k_consts = Vec::Zero(m);
  if (m >= 1) {
    Mat G(m, m);
    Vec rhs(m);
    const double li = ns.at0.lambdas[i];
    for (int a = 0; a < m; ++a) {
      const int j = others[a];
      for (int b = 0; b < m; ++b) {
        const int l = others[b];
        G(a, b) = (a == b ? li : 0.0) - Ahat(l, j);
      }
      rhs[a] = -Ahat(i, j);
    }
    Eigen::JacobiSVD<Mat> svd(G);
    const auto sv = svd.singularValues();
    if (sv[m - 1] <= 0.0 || sv[0] / sv[m - 1] > 1e12)
      throw Error(ErrorKind::SingularConstruction, "k_j system is numerically singular");
    ns.k_consts = G.fullPivLu().solve(rhs);
  }
  ns.Minv = Minv0;
  for (int a = 0; a < m; ++a) ns.Minv(i, others[a]) = ns.k_consts[a];
  ns.M = ns.Minv.inverse();
  ns.dwdu0 = ns.M * ns.D0;
  ns.dudw0 = ns.dwdu0.inverse();
  ns.w_box = 0.8 * ns.opts.u_box / inf_norm(ns.dudw0);

  if (opts.use_chart && n >= 2 && n <= opts.max_chart_dim) {
    const double ub = ns.opts.u_box;
    const int deg = opts.chart_degree;
    auto fwd = std::make_shared<ChebChart>(n, n - 1, deg, Vec::Constant(n, -ub), Vec::Constant(n, ub),
                                           [&ns](const Vec& u) { return ns.riemann_invariants_ode(u); });
    ns.set_charts(fwd, nullptr);
    const double wb = ns.w_box;
    auto inv = std::make_shared<ChebChart>(n, n, deg, Vec::Constant(n, -wb), Vec::Constant(n, wb),
                                           [&ns](const Vec& w) { return ns.to_u(w); });
    ns.set_charts(fwd, inv);
  }
  return ns;
}

std::string transform_cache_key(const NormalizedSystem& ns) {
  std::ostringstream os;
  os.precision(17);
  os << ns.model.label << ":n" << ns.model.n << ":i" << ns.i << ":box" << ns.opts.u_box << ":deg"
     << ns.opts.chart_degree << ":rk" << ns.opts.rk_step << ":f";
  // Fingerprint of the flux at a few fixed states.
  const int n = ns.model.n;
  for (int s = 0; s < 3; ++s) {
    Vec u(n);
    for (int k = 0; k < n; ++k) u[k] = 0.01 * (s + 1) * ((k % 2) ? -1.0 : 1.0) * (k + 1);
    const Vec f = ns.model.f(u);
    for (int k = 0; k < n; ++k) os << "," << f[k];
  }
  return os.str();
}

namespace {
constexpr char kMagic[8] = {'S', 'F', 'N', 'C', 'H', 'R', 'T', '1'};

void write_chart(std::ofstream& out, const ChebChart& c) {
  const std::int32_t hdr[3] = {c.dim(), c.ncomp(), c.degree()};
  out.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  out.write(reinterpret_cast<const char*>(c.lo().data()), sizeof(double) * c.dim());
  out.write(reinterpret_cast<const char*>(c.hi().data()), sizeof(double) * c.dim());
  const std::uint64_t len = c.coefficients().size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(reinterpret_cast<const char*>(c.coefficients().data()), sizeof(double) * len);
}

bool read_chart(std::ifstream& in, std::shared_ptr<const ChebChart>& c) {
  std::int32_t hdr[3];
  if (!in.read(reinterpret_cast<char*>(hdr), sizeof(hdr))) return false;
  Vec lo(hdr[0]), hi(hdr[0]);
  in.read(reinterpret_cast<char*>(lo.data()), sizeof(double) * hdr[0]);
  in.read(reinterpret_cast<char*>(hi.data()), sizeof(double) * hdr[0]);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::vector<double> coef(len);
  in.read(reinterpret_cast<char*>(coef.data()), sizeof(double) * len);
  if (!in) return false;
  c = std::make_shared<ChebChart>(ChebChart::from_coefficients(hdr[0], hdr[1], hdr[2], lo, hi, std::move(coef)));
  return true;
}
}  // namespace

void save_transform_cache(const NormalizedSystem& ns, const std::string& path) {
  if (!ns.forward_chart() || !ns.inverse_chart()) return;
  std::ofstream out(path, std::ios::binary);
  out.write(kMagic, sizeof(kMagic));
  const std::string key = transform_cache_key(ns);
  const std::uint64_t klen = key.size();
  out.write(reinterpret_cast<const char*>(&klen), sizeof(klen));
  out.write(key.data(), static_cast<std::streamsize>(klen));
  write_chart(out, *ns.forward_chart());
  write_chart(out, *ns.inverse_chart());
}

bool load_transform_cache(NormalizedSystem& ns, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) return false;
  std::uint64_t klen = 0;
  in.read(reinterpret_cast<char*>(&klen), sizeof(klen));
  if (!in || klen > 4096) return false;
  std::string key(klen, '\0');
  in.read(key.data(), static_cast<std::streamsize>(klen));
  if (key != transform_cache_key(ns)) return false;
  std::shared_ptr<const ChebChart> fwd, inv;
  if (!read_chart(in, fwd) || !read_chart(in, inv)) return false;
  ns.set_charts(fwd, inv);
  return true;
}

NormalFormReport verify_normal_form(const NormalizedSystem& ns, const std::vector<Vec>& samples,
                                    const std::function<Mat(const Vec&)>& A_override) {
  auto Af = [&](const Vec& w) { return A_override ? A_override(w) : ns.A(w); };
  const int n = ns.model.n, i = ns.i;
  NormalFormReport rep;
  const Mat A0 = Af(Vec::Zero(n));
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k)
      if (j != k) rep.a0_offdiag = std::max(rep.a0_offdiag, std::abs(A0(j, k)));
    if (j + 1 < n && !(A0(j, j) < A0(j + 1, j + 1))) rep.a0_ordered = false;
  }
  for (const Vec& w : samples) {
    const Mat Aw = Af(w);
    for (int j = 0; j < n; ++j)
      if (j != i) rep.col_i_offdiag = std::max(rep.col_i_offdiag, std::abs(Aw(j, i)));
    const EigenStructure es = eigen_decompose(Aw);
    rep.a_ii_dev = std::max(rep.a_ii_dev, std::abs(Aw(i, i) - es.lambdas[i]));
    const Vec r = es.right.col(i);
    const double c = std::min(1.0, std::abs(r[i]) / r.norm());
    rep.r_i_angle = std::max(rep.r_i_angle, std::acos(c));
    const Vec u = ns.dudw0 * w;
    const double rt = (ns.to_u(ns.to_w(u)) - u).cwiseAbs().maxCoeff() / (1.0 + u.cwiseAbs().maxCoeff());
    rep.roundtrip = std::max(rep.roundtrip, rt);
  }
  if (!(rep.a0_offdiag < 1e-8) || !rep.a0_ordered) rep.failed.push_back("property 4: A(0) diagonal and ordered");
  if (!(rep.col_i_offdiag < 1e-7) || !(rep.a_ii_dev < 1e-7)) rep.failed.push_back("property 2: i-th column");
  if (!(rep.r_i_angle < 1e-6)) rep.failed.push_back("property 3: r_i parallel to e_i");
  if (!(rep.roundtrip < 1e-9)) rep.failed.push_back("property 1: invertibility");
  rep.pass = rep.failed.empty();
  return rep;
}

Vec leading_w0(const NormalizedSystem& ns, const InitialData& data, double x) {
  return ns.dwdu0 * data.profile(x);
}

Vec leading_w0_prime(const NormalizedSystem& ns, const InitialData& data, double x) {
  return ns.dwdu0 * data.dprofile(x);
}

Lifespan lifespan_estimate(const NormalizedSystem& ns, const InitialData& data, int grid) {
  const int n = ns.model.n;
  const Vec zero = Vec::Zero(n);
  Lifespan out;
  out.dlambda.resize(n);
  for (int j = 0; j < n; ++j)
    out.dlambda[j] = lambda_gradient(ns.model, j, zero).dot(ns.dudw0.col(j).transpose());

  const double h = (data.b - data.a) / (grid - 1);
  std::vector<Vec> H(grid);
  for (int k = 0; k < grid; ++k) {
    const Vec wp = leading_w0_prime(ns, data, data.a + k * h);
    H[k] = out.dlambda.cwiseProduct(wp);
  }
  out.seed.N = Vec::Zero(n);
  for (int j = 0; j < n; ++j) {
    double mn = H[0][j];
    for (int k = 1; k < grid; ++k) mn = std::min(mn, H[k][j]);
    out.seed.N[j] = mn;
  }
  const int i = ns.i;
  int kmin = 0;
  for (int k = 1; k < grid; ++k)
    if (H[k][i] < H[kmin][i]) kmin = k;
  double Ni = H[kmin][i];
  double x0 = data.a + kmin * h;
  if (kmin > 0 && kmin < grid - 1) {
    const double fm = H[kmin - 1][i], f0 = H[kmin][i], fp = H[kmin + 1][i];
    const double c2 = fm - 2.0 * f0 + fp;
    out.seed.Hpp = c2 / (h * h);
    if (c2 > 0.0) {
      const double s = 0.5 * (fm - fp) / c2;
      x0 += s * h;
      Ni = f0 - 0.25 * (fm - fp) * s;
    }
  }
  out.seed.x0 = x0;
  out.seed.N[i] = std::min(out.seed.N[i], Ni);

  const double minN = out.seed.N.minCoeff();
  if (!(minN < 0.0)) throw Error(ErrorKind::NoBlowup, "all N_j >= 0");
  out.T_hat = -1.0 / (data.epsilon * minN);

  const double scale = std::abs(out.seed.N[i]);
  if (!(out.seed.Hpp > 1e-9 * scale))
    throw Error(ErrorKind::DegenerateMinimum, "H_i'' <= 0 at the minimum");
  // Count separate grid clusters attaining the minimum.
  const double tol = 1e-6 * scale;
  int clusters = 0;
  bool inside = false;
  for (int k = 0; k < grid; ++k) {
    const bool hit = H[k][i] <= H[kmin][i] + tol;
    if (hit && !inside) ++clusters;
    inside = hit;
  }
  if (clusters > 1) throw Error(ErrorKind::DegenerateMinimum, "minimum of H_i attained at more than one point");

  double margin = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j)
    if (j != i) margin = std::min(margin, out.seed.N[j] - out.seed.N[i]);
  out.seed.margin = margin;
  if (!(margin > 0.0))
    out.seed.warnings.push_back("DegenerateMinimum: N_j <= N_i for some j != i (family tie)");
  return out;
}

}  // namespace shockforge
