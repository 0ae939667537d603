#include "shockforge/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace shockforge {

void fd_weights(double x0, const double* x, int n, int m, double* c) {
  std::fill(c, c + (m + 1) * n, 0.0);
  double c1 = 1.0;
  double c4 = x[0] - x0;
  c[0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[k * n + i] = c1 * (k * c[(k - 1) * n + i - 1] - c5 * c[k * n + i - 1]) / c2;
        c[i] = -c1 * c5 * c[i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k * n + j] = (c4 * c[k * n + j] - k * c[(k - 1) * n + j]) / c3;
      c[j] = c4 * c[j] / c3;
    }
    c1 = c2;
  }
}

int locate(const std::vector<double>& x, double v) {
  const int n = static_cast<int>(x.size());
  if (v <= x.front()) return 0;
  if (v >= x.back()) return n - 2;
  const auto it = std::upper_bound(x.begin(), x.end(), v);
  return static_cast<int>(it - x.begin()) - 1;
}

int stencil_start(const std::vector<double>& x, double v, int width) {
  const int n = static_cast<int>(x.size());
  const int k = locate(x, v);
  int s = k - (width / 2 - 1);
  return std::clamp(s, 0, n - width);
}

void gauss_legendre01(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int k = 0; k < n; ++k) {
    double x = std::cos(M_PI * (k + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[k] = 0.5 * (1.0 - x);
    weights[k] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
}

namespace {
int locate_ptr(const double* x, int n, double v) {
  if (v <= x[0]) return 0;
  if (v >= x[n - 1]) return n - 2;
  return static_cast<int>(std::upper_bound(x, x + n, v) - x) - 1;
}

// Three-point slope with Fritsch-Carlson limiting: zero at extrema of the data,
// at most three times the smaller neighboring secant.
double limited_slope(double h0, double h1, double d0, double d1) {
  if (d0 * d1 <= 0.0) return 0.0;
  const double d = (h1 * d0 + h0 * d1) / (h0 + h1);
  const double cap = 3.0 * std::min(std::abs(d0), std::abs(d1));
  return std::abs(d) > cap ? std::copysign(cap, d) : d;
}

// One-sided three-point slope at an end node; h0, d0 belong to the end interval.
double end_slope(double h0, double h1, double d0, double d1) {
  const double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
  if (d * d0 <= 0.0) return 0.0;
  if (d0 * d1 <= 0.0 && std::abs(d) > 3.0 * std::abs(d0)) return 3.0 * d0;
  return d;
}

double pchip_slope(const double* x, const double* y, int stride, int n, int k) {
  auto del = [&](int a) { return (y[(a + 1) * stride] - y[a * stride]) / (x[a + 1] - x[a]); };
  if (n == 2) return del(0);
  if (k == 0) return end_slope(x[1] - x[0], x[2] - x[1], del(0), del(1));
  if (k == n - 1) return end_slope(x[n - 1] - x[n - 2], x[n - 2] - x[n - 3], del(n - 2), del(n - 3));
  return limited_slope(x[k] - x[k - 1], x[k + 1] - x[k], del(k - 1), del(k));
}
}  // namespace

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
  const int n = static_cast<int>(x_.size());
  d_.assign(n, 0.0);
  if (n < 2) return;
  for (int k = 0; k < n; ++k) d_[k] = pchip_slope(x_.data(), y_.data(), 1, n, k);
}

double MonotoneCubic::operator()(double v) const {
  const int k = locate(x_, v);
  const double h = x_[k + 1] - x_[k];
  const double t = (v - x_[k]) / h;
  const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
  const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
  return h00 * y_[k] + h10 * h * d_[k] + h01 * y_[k + 1] + h11 * h * d_[k + 1];
}

double MonotoneCubic::derivative(double v) const {
  const int k = locate(x_, v);
  const double h = x_[k + 1] - x_[k];
  const double t = (v - x_[k]) / h;
  const double d00 = 6 * t * t - 6 * t, d10 = 3 * t * t - 4 * t + 1;
  const double d01 = -6 * t * t + 6 * t, d11 = 3 * t * t - 2 * t;
  return (d00 * y_[k] + d01 * y_[k + 1]) / h + d10 * d_[k] + d11 * d_[k + 1];
}


double monotone_cubic_at(const double* x, const double* y, int stride, int n, double v) {
  if (n == 1) return y[0];
  const int k = locate_ptr(x, n, v);
  const double h = x[k + 1] - x[k];
  const double t = std::clamp((v - x[k]) / h, 0.0, 1.0);
  const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
  const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
  return h00 * y[k * stride] + h10 * h * pchip_slope(x, y, stride, n, k) + h01 * y[(k + 1) * stride] +
         h11 * h * pchip_slope(x, y, stride, n, k + 1);
}

double linear_at(const double* x, const double* y, int stride, int n, double v) {
  if (n == 1) return y[0];
  const int k = locate_ptr(x, n, v);
  const double t = std::clamp((v - x[k]) / (x[k + 1] - x[k]), 0.0, 1.0);
  return (1 - t) * y[k * stride] + t * y[(k + 1) * stride];
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LinearFit f;
  const int n = static_cast<int>(x.size());
  f.points = n;
  if (n < 2) return f;
  double mx = 0, my = 0;
  for (int k = 0; k < n; ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (int k = 0; k < n; ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double ss = 0;
    for (int k = 0; k < n; ++k) {
      const double r = y[k] - f.intercept - f.slope * x[k];
      ss += r * r;
    }
    f.stderr_slope = std::sqrt(ss / (n - 2) / sxx);
  }
  return f;
}

LinearFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (x[k] > 0.0 && std::abs(y[k]) > 0.0) {
      lx.push_back(std::log(x[k]));
      ly.push_back(std::log(std::abs(y[k])));
    }
  return fit_line(lx, ly);
}

std::vector<double> cardano(double p, double q) {
  std::vector<double> r;
  const double disc = q * q / 4.0 + p * p * p / 27.0;
  const double scale = std::max({1e-300, std::abs(q * q / 4.0), std::abs(p * p * p / 27.0)});
  if (std::abs(disc) <= 1e-14 * scale) {
    if (p == 0.0 && q == 0.0) return {0.0, 0.0, 0.0};
    const double u = std::cbrt(-q / 2.0);
    r = {2.0 * u, -u, -u};
  } else if (disc > 0.0) {
    const double s = std::sqrt(disc);
    r = {std::cbrt(-q / 2.0 + s) + std::cbrt(-q / 2.0 - s)};
  } else {
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
    const double th = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k) r.push_back(m * std::cos(th - 2.0 * M_PI * k / 3.0));
  }
  std::sort(r.begin(), r.end());
  return r;
}

double solve_bracketed(const std::function<double(double, double&)>& f, double lo, double hi, double tol,
                       int max_iter) {
  double dlo, dhi;
  double flo = f(lo, dlo), fhi = f(hi, dhi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (flo > 0.0) {
    std::swap(lo, hi);
    std::swap(flo, fhi);
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    double d;
    const double fx = f(x, d);
    if (fx == 0.0) return x;
    if (fx < 0.0) lo = x;
    else hi = x;
    double xn = (d != 0.0) ? x - fx / d : 0.5 * (lo + hi);
    if (!((xn - lo) * (xn - hi) < 0.0)) xn = 0.5 * (lo + hi);
    const double step = std::abs(xn - x);
    x = xn;
    if (step < tol * (1.0 + std::abs(x)) || std::abs(hi - lo) < tol * (1.0 + std::abs(x))) break;
  }
  return x;
}

void derivative4(const double* f, int n, double h, double* df, int si, int so) {
  auto F = [&](int k) { return f[k * si]; };
  if (n < 5) {
    for (int k = 0; k < n; ++k) {
      const int a = std::max(0, k - 1), b = std::min(n - 1, k + 1);
      df[k * so] = (F(b) - F(a)) / ((b - a) * h);
    }
    return;
  }
  for (int k = 2; k < n - 2; ++k) df[k * so] = (F(k - 2) - 8 * F(k - 1) + 8 * F(k + 1) - F(k + 2)) / (12 * h);
  df[0] = (-25 * F(0) + 48 * F(1) - 36 * F(2) + 16 * F(3) - 3 * F(4)) / (12 * h);
  df[so] = (-3 * F(0) - 10 * F(1) + 18 * F(2) - 6 * F(3) + F(4)) / (12 * h);
  df[(n - 2) * so] = (3 * F(n - 1) + 10 * F(n - 2) - 18 * F(n - 3) + 6 * F(n - 4) - F(n - 5)) / (12 * h);
  df[(n - 1) * so] = (25 * F(n - 1) - 48 * F(n - 2) + 36 * F(n - 3) - 16 * F(n - 4) + 3 * F(n - 5)) / (12 * h);
}

}  // namespace shockforge
