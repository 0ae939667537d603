#pragma once

#include "shockforge/core.hpp"

#include <functional>
#include <vector>

namespace shockforge {

/// Finite-difference weights for derivatives 0..m at x0 from nodes x
/// (Fornberg). Result c[k * n + j]: weight of node j for derivative k.
void fd_weights(double x0, const double* x, int n, int m, double* c);

/// Index of the interval [x[k], x[k+1]] containing v (clamped).
int locate(const std::vector<double>& x, double v);

/// First stencil index for `width` points centered on v, clamped to the grid.
int stencil_start(const std::vector<double>& x, double v, int width);

/// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre01(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Monotone piecewise cubic (Fritsch-Carlson) on strictly increasing nodes.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y);
  double operator()(double v) const;
  double derivative(double v) const;

 private:
  std::vector<double> x_, y_, d_;
};

/// Same interpolant evaluated from the local stencil of strided samples.
double monotone_cubic_at(const double* x, const double* y, int stride, int n, double v);
/// Piecewise linear, clamped to the end values.
double linear_at(const double* x, const double* y, int stride, int n, double v);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  int points = 0;
};

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);
/// Fit of log|y| against log x over samples with x, |y| > 0.
LinearFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

/// Real roots of h^3 + p h + q = 0, ascending; double roots repeated.
std::vector<double> cardano(double p, double q);

/// Safeguarded Newton on [lo, hi] with f(lo) f(hi) <= 0.
double solve_bracketed(const std::function<double(double, double&)>& f, double lo, double hi,
                       double tol = 1e-14, int max_iter = 200);

/// Central 4th-order first derivative on a uniform grid, one-sided at edges.
void derivative4(const double* f, int n, double h, double* df, int stride_in = 1, int stride_out = 1);

}  // namespace shockforge
