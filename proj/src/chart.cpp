#include "shockforge/chart.hpp"

#include <cmath>

namespace shockforge {

namespace {
constexpr double kPi = 3.141592653589793238462643;
}

ChebChart::ChebChart(int dim, int ncomp, int degree, const Vec& lo, const Vec& hi,
                     const std::function<Vec(const Vec&)>& fn)
    : dim_(dim), ncomp_(ncomp), m_(degree), lo_(lo), hi_(hi) {
  const int m1 = m_ + 1;
  std::size_t total = 1;
  for (int d = 0; d < dim_; ++d) total *= static_cast<std::size_t>(m1);

  std::vector<double> nodes(m1);
  for (int k = 0; k < m1; ++k) nodes[k] = std::cos(kPi * (k + 0.5) / m1);

  std::vector<double> vals(total * ncomp_);
  std::vector<int> idx(dim_, 0);
  Vec x(dim_);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    for (int d = dim_ - 1; d >= 0; --d) {
      idx[d] = static_cast<int>(rem % m1);
      rem /= m1;
    }
    for (int d = 0; d < dim_; ++d) x[d] = 0.5 * (lo_[d] + hi_[d]) + 0.5 * (hi_[d] - lo_[d]) * nodes[idx[d]];
    const Vec f = fn(x);
    for (int c = 0; c < ncomp_; ++c) vals[flat * ncomp_ + c] = f[c];
  }

  // Discrete cosine transform along each axis.
  std::vector<double> C(static_cast<std::size_t>(m1 * m1));
  for (int j = 0; j < m1; ++j)
    for (int k = 0; k < m1; ++k)
      C[j * m1 + k] = (j == 0 ? 1.0 : 2.0) / m1 * std::cos(kPi * j * (k + 0.5) / m1);

  std::vector<double> tmp(vals.size());
  std::size_t stride = static_cast<std::size_t>(ncomp_);
  for (int d = dim_ - 1; d >= 0; --d) {
    const std::size_t block = stride * m1;
    const std::size_t nblocks = vals.size() / block;
    for (std::size_t b = 0; b < nblocks; ++b)
      for (std::size_t s = 0; s < stride; ++s)
        for (int j = 0; j < m1; ++j) {
          double acc = 0.0;
          for (int k = 0; k < m1; ++k) acc += C[j * m1 + k] * vals[b * block + k * stride + s];
          tmp[b * block + j * stride + s] = acc;
        }
    vals.swap(tmp);
    stride = block;
  }
  coef_ = std::move(vals);
}

ChebChart ChebChart::from_coefficients(int dim, int ncomp, int degree, const Vec& lo, const Vec& hi,
                                       std::vector<double> coef) {
  ChebChart c;
  c.dim_ = dim;
  c.ncomp_ = ncomp;
  c.m_ = degree;
  c.lo_ = lo;
  c.hi_ = hi;
  c.coef_ = std::move(coef);
  return c;
}

bool ChebChart::contains(const Vec& x) const {
  if (dim_ == 0) return false;
  for (int d = 0; d < dim_; ++d)
    if (!(x[d] >= lo_[d] && x[d] <= hi_[d])) return false;
  return true;
}

void ChebChart::basis(const Vec& x, std::vector<double>& T, std::vector<double>* dT) const {
  const int m1 = m_ + 1;
  T.assign(static_cast<std::size_t>(dim_ * m1), 0.0);
  if (dT) dT->assign(T.size(), 0.0);
  for (int d = 0; d < dim_; ++d) {
    const double scale = 2.0 / (hi_[d] - lo_[d]);
    const double s = (x[d] - 0.5 * (lo_[d] + hi_[d])) * scale;
    double* t = &T[d * m1];
    t[0] = 1.0;
    if (m1 > 1) t[1] = s;
    for (int k = 2; k < m1; ++k) t[k] = 2.0 * s * t[k - 1] - t[k - 2];
    if (dT) {
      double* dt = &(*dT)[d * m1];
      dt[0] = 0.0;
      if (m1 > 1) dt[1] = 1.0;
      for (int k = 2; k < m1; ++k) dt[k] = 2.0 * t[k - 1] + 2.0 * s * dt[k - 1] - dt[k - 2];
      for (int k = 0; k < m1; ++k) dt[k] *= scale;
    }
  }
}

void ChebChart::contract(const std::vector<const double*>& w, double* out) const {
  const int m1 = m_ + 1;
  std::size_t len = coef_.size();
  thread_local std::vector<double> a, b;
  a.assign(coef_.begin(), coef_.end());
  for (int d = 0; d < dim_; ++d) {
    const std::size_t rest = len / m1;
    b.assign(rest, 0.0);
    const double* wd = w[d];
    for (int k = 0; k < m1; ++k) {
      const double wk = wd[k];
      const double* src = &a[k * rest];
      for (std::size_t r = 0; r < rest; ++r) b[r] += wk * src[r];
    }
    a.swap(b);
    len = rest;
  }
  for (int c = 0; c < ncomp_; ++c) out[c] = a[c];
}

Vec ChebChart::eval(const Vec& x) const {
  std::vector<double> T;
  basis(x, T, nullptr);
  std::vector<const double*> w(dim_);
  for (int d = 0; d < dim_; ++d) w[d] = &T[d * (m_ + 1)];
  Vec out(ncomp_);
  contract(w, out.data());
  return out;
}

Vec ChebChart::eval(const Vec& x, Mat& jac) const {
  std::vector<double> T, dT;
  basis(x, T, &dT);
  std::vector<const double*> w(dim_);
  for (int d = 0; d < dim_; ++d) w[d] = &T[d * (m_ + 1)];
  Vec out(ncomp_);
  contract(w, out.data());
  jac.resize(ncomp_, dim_);
  Vec col(ncomp_);
  for (int e = 0; e < dim_; ++e) {
    w[e] = &dT[e * (m_ + 1)];
    contract(w, col.data());
    jac.col(e) = col;
    w[e] = &T[e * (m_ + 1)];
  }
  return out;
}

}  // namespace shockforge
