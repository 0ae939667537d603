#pragma once

#include "shockforge/core.hpp"

#include <functional>
#include <vector>

namespace shockforge {

/// Tensor-product Chebyshev interpolant of a vector map on a box.
class ChebChart {
 public:
  ChebChart() = default;
  ChebChart(int dim, int ncomp, int degree, const Vec& lo, const Vec& hi,
            const std::function<Vec(const Vec&)>& fn);

  bool contains(const Vec& x) const;
  Vec eval(const Vec& x) const;
  /// Value and Jacobian (ncomp x dim).
  Vec eval(const Vec& x, Mat& jac) const;

  int dim() const { return dim_; }
  int ncomp() const { return ncomp_; }
  int degree() const { return m_; }
  const std::vector<double>& coefficients() const { return coef_; }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }

  /// Rebuild from stored data (cache files).
  static ChebChart from_coefficients(int dim, int ncomp, int degree, const Vec& lo, const Vec& hi,
                                     std::vector<double> coef);

 private:
  void basis(const Vec& x, std::vector<double>& T, std::vector<double>* dT) const;
  void contract(const std::vector<const double*>& w, double* out) const;

  int dim_ = 0;
  int ncomp_ = 0;
  int m_ = 0;
  Vec lo_, hi_;
  std::vector<double> coef_;  ///< index ((k0 * (m+1) + k1) ...) * ncomp + c
};

}  // namespace shockforge
