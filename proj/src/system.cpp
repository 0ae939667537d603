#include "shockforge/system.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace shockforge {

namespace {

constexpr double kPi = 3.141592653589793238462643;

void orient_columns(Mat& R, const EigenStructure* orient) {
  const int n = static_cast<int>(R.cols());
  for (int j = 0; j < n; ++j) {
    R.col(j).normalize();
    double s;
    if (orient != nullptr) {
      s = R.col(j).dot(orient->right.col(j));
    } else {
      int imax = 0;
      R.col(j).cwiseAbs().maxCoeff(&imax);
      s = R(imax, j);
    }
    if (s < 0.0) R.col(j) = -R.col(j);
  }
}

// Newton on the characteristic polynomial: p'/p = -tr((F - x I)^{-1}).
double polish_root(const Mat& F, double x) {
  const int n = static_cast<int>(F.rows());
  for (int it = 0; it < 2; ++it) {
    Mat S = F - x * Mat::Identity(n, n);
    Eigen::PartialPivLU<Mat> lu(S);
    const double tr = lu.inverse().trace();
    if (!std::isfinite(tr) || std::abs(tr) < 1e-300) break;
    const double dx = 1.0 / tr;
    if (!std::isfinite(dx) || std::abs(dx) > 1e-6 * (1.0 + std::abs(x))) break;
    x += dx;
  }
  return x;
}

}  // namespace

double fd_step(const Vec& u) { return 1e-5 * (1.0 + u.cwiseAbs().maxCoeff()); }

Mat FluxModel::jac(const Vec& u) const {
  if (jacobian) return jacobian(u);
  return jac_fd(u);
}

Mat FluxModel::jac_fd(const Vec& u) const {
  const double h = fd_step(u);
  Mat J(n, n);
  Vec up = u, um = u;
  for (int k = 0; k < n; ++k) {
    up[k] = u[k] + h;
    um[k] = u[k] - h;
    J.col(k) = (flux(up) - flux(um)) / (2.0 * h);
    up[k] = u[k];
    um[k] = u[k];
  }
  return J;
}

Vec eigenvalues(const Mat& F, double tol) {
  const int n = static_cast<int>(F.rows());
  Vec lam(n);
  if (n == 1) {
    lam[0] = F(0, 0);
    return lam;
  }
  if (n == 2) {
    const double h = 0.5 * (F(0, 0) + F(1, 1));
    const double det = F(0, 0) * F(1, 1) - F(0, 1) * F(1, 0);
    const double disc = h * h - det;
    if (disc <= 0.25 * tol * tol) throw Error(ErrorKind::NonStrictHyperbolicity, "2x2 spectrum not real and distinct");
    const double s = std::sqrt(disc);
    lam[0] = h - s;
    lam[1] = h + s;
    return lam;
  }
  Eigen::EigenSolver<Mat> es(F, false);
  const auto ev = es.eigenvalues();
  const double scale = 1.0 + F.cwiseAbs().maxCoeff();
  for (int k = 0; k < n; ++k) {
    if (std::abs(ev[k].imag()) > tol * scale) throw Error(ErrorKind::NonStrictHyperbolicity, "complex eigenvalue");
    lam[k] = ev[k].real();
  }
  std::sort(lam.data(), lam.data() + n);
  for (int k = 0; k + 1 < n; ++k)
    if (lam[k + 1] - lam[k] <= tol) throw Error(ErrorKind::NonStrictHyperbolicity, "eigenvalue gap below tolerance");
  return lam;
}

EigenStructure eigen_decompose(const Mat& F, const EigenStructure* orient, double tol) {
  const int n = static_cast<int>(F.rows());
  EigenStructure es;
  if (n == 1) {
    es.lambdas = Vec::Constant(1, F(0, 0));
    es.left = Mat::Ones(1, 1);
    es.right = Mat::Ones(1, 1);
    es.gap = std::numeric_limits<double>::infinity();
    return es;
  }
  Eigen::EigenSolver<Mat> solver(F, true);
  const auto ev = solver.eigenvalues();
  const auto evec = solver.eigenvectors();
  const double scale = 1.0 + F.cwiseAbs().maxCoeff();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int k = 0; k < n; ++k)
    if (std::abs(ev[k].imag()) > tol * scale)
      throw Error(ErrorKind::NonStrictHyperbolicity, "complex eigenvalue");
  std::sort(order.begin(), order.end(), [&](int a, int b) { return ev[a].real() < ev[b].real(); });

  es.lambdas.resize(n);
  es.right.resize(n, n);
  for (int k = 0; k < n; ++k) {
    es.lambdas[k] = polish_root(F, ev[order[k]].real());
    es.right.col(k) = evec.col(order[k]).real();
  }
  es.gap = std::numeric_limits<double>::infinity();
  for (int k = 0; k + 1 < n; ++k) es.gap = std::min(es.gap, es.lambdas[k + 1] - es.lambdas[k]);
  if (!(es.gap > tol)) throw Error(ErrorKind::NonStrictHyperbolicity, "eigenvalue gap below tolerance");

  orient_columns(es.right, orient);
  es.left = es.right.inverse();
  return es;
}

EigenStructure eigen_decompose(const FluxModel& model, const Vec& u, const EigenStructure* orient, double tol) {
  return eigen_decompose(model.jac(u), orient, tol);
}

RowVec lambda_gradient(const FluxModel& model, int j, const Vec& u) {
  const double h = fd_step(u);
  RowVec g(model.n);
  Vec up = u, um = u;
  for (int k = 0; k < model.n; ++k) {
    up[k] = u[k] + h;
    um[k] = u[k] - h;
    g[k] = (eigenvalues(model.jac(up))[j] - eigenvalues(model.jac(um))[j]) / (2.0 * h);
    up[k] = u[k];
    um[k] = u[k];
  }
  return g;
}

double genuine_nonlinearity(const FluxModel& model, int j, const Vec& u) {
  const EigenStructure es = eigen_decompose(model, u);
  return lambda_gradient(model, j, u).dot(es.right.col(j).transpose());
}

JacobianReport validate_jacobian(const FluxModel& model, const std::vector<Vec>& samples, double tol) {
  JacobianReport rep;
  if (!model.jacobian) return rep;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const Mat Ja = model.jacobian(samples[s]);
    const Mat Jf = model.jac_fd(samples[s]);
    const double scale = std::max(1.0, Jf.cwiseAbs().maxCoeff());
    for (int r = 0; r < model.n; ++r)
      for (int c = 0; c < model.n; ++c) {
        const double dev = std::abs(Ja(r, c) - Jf(r, c)) / scale;
        if (dev > rep.max_rel_dev) {
          rep.max_rel_dev = dev;
          rep.sample = static_cast<int>(s);
          rep.row = r;
          rep.col = c;
        }
      }
  }
  rep.pass = rep.max_rel_dev < tol;
  return rep;
}

FluxModel make_burgers() {
  FluxModel m;
  m.n = 1;
  m.label = "burgers";
  m.box = 10.0;
  m.flux = [](const Vec& u) { return Vec::Constant(1, 0.5 * u[0] * u[0]); };
  m.jacobian = [](const Vec& u) { return Mat::Constant(1, 1, u[0]); };
  return m;
}

FluxModel make_p_system(double gamma) {
  // State (v - 1, m); f = (-m, p(v) - p(1)) with p(v) = v^-gamma.
  FluxModel m;
  m.n = 2;
  m.label = "p_system";
  m.box = 0.5;
  m.flux = [gamma](const Vec& u) {
    Vec f(2);
    f[0] = -u[1];
    f[1] = std::pow(1.0 + u[0], -gamma) - 1.0;
    return f;
  };
  m.jacobian = [gamma](const Vec& u) {
    Mat J = Mat::Zero(2, 2);
    J(0, 1) = -1.0;
    J(1, 0) = -gamma * std::pow(1.0 + u[0], -gamma - 1.0);
    return J;
  };
  return m;
}

FluxModel make_euler3(double gamma, double velocity, double pressure) {
  const double rho0 = 1.0;
  const double m0 = rho0 * velocity;
  const double E0 = pressure / (gamma - 1.0) + 0.5 * rho0 * velocity * velocity;
  auto full = [gamma](double rho, double mom, double E) {
    const double v = mom / rho;
    const double p = (gamma - 1.0) * (E - 0.5 * mom * v);
    Vec f(3);
    f[0] = mom;
    f[1] = mom * v + p;
    f[2] = (E + p) * v;
    return f;
  };
  const Vec f0 = full(rho0, m0, E0);
  FluxModel m;
  m.n = 3;
  m.label = "euler3";
  m.box = 0.5;
  m.flux = [=](const Vec& u) { return Vec(full(rho0 + u[0], m0 + u[1], E0 + u[2]) - f0); };
  m.jacobian = [=](const Vec& u) {
    const double rho = rho0 + u[0], mom = m0 + u[1], E = E0 + u[2];
    const double v = mom / rho;
    const double p = (gamma - 1.0) * (E - 0.5 * mom * v);
    const double H = (E + p) / rho;
    Mat J(3, 3);
    J << 0.0, 1.0, 0.0,
        0.5 * (gamma - 3.0) * v * v, (3.0 - gamma) * v, gamma - 1.0,
        v * (0.5 * (gamma - 1.0) * v * v - H), H - (gamma - 1.0) * v * v, gamma * v;
    return J;
  };
  return m;
}

FluxModel make_synthetic(int n, std::uint64_t seed, double coupling) {
  // f_k(u) = d_k u_k + 1/2 sum_ab c_kab u_a u_b, c symmetric in (a, b), c_kkk = 1.
  std::vector<double> d(n);
  for (int k = 0; k < n; ++k) d[k] = n == 1 ? 0.0 : -1.0 + 2.0 * k / (n - 1);
  std::vector<double> c(static_cast<std::size_t>(n * n * n), 0.0);
  std::uint64_t s = seed ? seed : 0x9e3779b97f4a7c15ULL;
  auto next = [&s]() {
    // splitmix64, then 53-bit mantissa in [0, 1)
    s += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
  };
  auto at = [n](int k, int a, int b) { return static_cast<std::size_t>((k * n + a) * n + b); };
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) {
        const double v = (a == k && b == k) ? 1.0 : coupling * (2.0 * next() - 1.0);
        c[at(k, a, b)] = v;
        c[at(k, b, a)] = v;
      }
  FluxModel m;
  m.n = n;
  m.label = "synthetic_" + std::to_string(n);
  m.box = 0.3;
  m.flux = [=](const Vec& u) {
    Vec f(n);
    for (int k = 0; k < n; ++k) {
      double acc = d[k] * u[k];
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) acc += 0.5 * c[at(k, a, b)] * u[a] * u[b];
      f[k] = acc;
    }
    return f;
  };
  m.jacobian = [=](const Vec& u) {
    Mat J = Mat::Zero(n, n);
    for (int k = 0; k < n; ++k) {
      J(k, k) = d[k];
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) J(k, a) += c[at(k, a, b)] * u[b];
    }
    return J;
  };
  return m;
}

FluxModel make_linear(const Mat& C) {
  FluxModel m;
  m.n = static_cast<int>(C.rows());
  m.label = "linear";
  m.box = 1.0;
  m.flux = [C](const Vec& u) { return Vec(C * u); };
  m.jacobian = [C](const Vec&) { return C; };
  return m;
}

FluxModel make_polynomial(int n, const std::vector<Monomial>& terms, const std::string& label) {
  FluxModel m;
  m.n = n;
  m.label = label;
  m.box = 0.3;
  m.flux = [n, terms](const Vec& u) {
    Vec f = Vec::Zero(n);
    for (const auto& t : terms) {
      double v = t.coef;
      for (int a = 0; a < n; ++a)
        for (int p = 0; p < t.powers[a]; ++p) v *= u[a];
      f[t.component] += v;
    }
    return f;
  };
  m.jacobian = [n, terms](const Vec& u) {
    Mat J = Mat::Zero(n, n);
    for (const auto& t : terms)
      for (int a = 0; a < n; ++a) {
        if (t.powers[a] == 0) continue;
        double v = t.coef * t.powers[a];
        for (int b = 0; b < n; ++b) {
          const int p = t.powers[b] - (b == a ? 1 : 0);
          for (int q = 0; q < p; ++q) v *= u[b];
        }
        J(t.component, a) += v;
      }
    return J;
  };
  return m;
}

FluxModel make_model(const std::string& name, const std::map<std::string, double>& params) {
  auto get = [&](const std::string& k, double dflt) {
    auto it = params.find(k);
    return it == params.end() ? dflt : it->second;
  };
  if (name == "burgers") return make_burgers();
  if (name == "p_system") return make_p_system(get("gamma", 2.0));
  if (name == "euler3") {
    const double g = get("gamma", 1.4);
    return make_euler3(g, get("velocity", 0.0), get("pressure", 1.0 / g));
  }
  if (name.rfind("synthetic", 0) == 0) {
    int n = static_cast<int>(get("n", 3));
    if (name.size() > 10 && name[9] == '_') n = std::stoi(name.substr(10));
    return make_synthetic(n, static_cast<std::uint64_t>(get("seed", 7)), get("coupling", 0.3));
  }
  throw Error(ErrorKind::Config, "unknown system '" + name + "'");
}

double ScalarProfile::g(double x) const {
  if (x <= -half_width || x >= half_width) return 0.0;
  const double s = kPi * x / half_width;
  if (kind == "sine") return -amplitude * std::sin(s);
  if (kind == "hann") return -amplitude * 0.5 * (std::sin(s) + 0.5 * std::sin(2.0 * s));
  if (kind == "double") return -amplitude * std::sin(3.0 * s);
  if (kind == "skew") return amplitude * (-std::sin(s) + skew * std::sin(s) * std::sin(s));
  throw Error(ErrorKind::Config, "unknown profile '" + kind + "'");
}

double ScalarProfile::dg(double x) const {
  if (x <= -half_width || x >= half_width) return 0.0;
  const double k = kPi / half_width;
  const double s = k * x;
  if (kind == "sine") return -amplitude * k * std::cos(s);
  if (kind == "hann") return -amplitude * k * 0.5 * (std::cos(s) + std::cos(2.0 * s));
  if (kind == "double") return -amplitude * 3.0 * k * std::cos(3.0 * s);
  if (kind == "skew") return amplitude * k * (-std::cos(s) + skew * std::sin(2.0 * s));
  throw Error(ErrorKind::Config, "unknown profile '" + kind + "'");
}

InitialData make_wave_data(const ScalarProfile& prof, const Vec& direction, double epsilon) {
  InitialData d;
  d.epsilon = epsilon;
  d.a = -prof.half_width;
  d.b = prof.half_width;
  d.profile = [prof, direction](double x) { return Vec(prof.g(x) * direction); };
  d.dprofile = [prof, direction](double x) { return Vec(prof.dg(x) * direction); };
  return d;
}

bool initial_data_valid(const InitialData& data, int samples) {
  const double w = data.b - data.a;
  bool nonzero = false;
  for (int k = 0; k <= samples; ++k) {
    const double x = data.a + w * k / samples;
    if (data.profile(x).cwiseAbs().maxCoeff() > 0.0) nonzero = true;
    const double xl = data.a - w * (k + 1) / samples, xr = data.b + w * (k + 1) / samples;
    if (data.profile(xl).cwiseAbs().maxCoeff() != 0.0) return false;
    if (data.profile(xr).cwiseAbs().maxCoeff() != 0.0) return false;
  }
  return nonzero && data.epsilon > 0.0;
}

}  // namespace shockforge
