#pragma once

#include "shockforge/chart.hpp"
#include "shockforge/system.hpp"

#include <memory>
#include <string>
#include <vector>

namespace shockforge {

struct NormalizeOptions {
  double u_box = 0.2;      ///< half-width of the state box covered by the charts
  int chart_degree = 12;   ///< per-axis Chebyshev degree
  bool use_chart = true;   ///< off: every query integrates the characteristic ODE
  double rk_step = 4e-3;   ///< RK4 step in the transversal coordinate
  int max_chart_dim = 4;
};

/// Values needed pointwise in w coordinates.
struct PointW {
  Vec u;
  Vec w;
  Mat dwdu;
  EigenStructure F;  ///< eigenstructure of F(u)
  Vec lambdas;
  Mat left_w;        ///< rows: left eigenvectors of A(w)
};

class NormalizedSystem {
 public:
  FluxModel model;
  int i = 0;
  EigenStructure at0;
  Vec ri0;                       ///< unit r_i(0)
  std::vector<RowVec> zeta;      ///< n-1 rows, orthonormal, orthogonal to r_i(0)
  Vec k_consts;                  ///< n-1 values
  Mat Bn1;                       ///< (n-1) x (n-1)
  Mat M;                         ///< w = M * tilde(u)
  Mat Minv;
  Mat D0;                        ///< d tilde / du at 0
  Mat dwdu0;                     ///< M * D0
  Mat dudw0;
  NormalizeOptions opts;
  double w_box = 0.0;

  /// q_j(u) for j != i, ordered by j.
  Vec riemann_invariants(const Vec& u) const;
  Vec riemann_invariants_ode(const Vec& u) const;
  Vec tilde(const Vec& u) const;
  Vec to_w(const Vec& u) const;
  Mat dw_du(const Vec& u) const;
  Vec to_u(const Vec& w) const;
  Mat A(const Vec& w) const;
  EigenStructure eig_w(const Vec& w) const;
  /// p_jk = l_jk / l_jj from the left eigenvectors of A(w).
  Mat p_coeffs(const Vec& w) const;
  PointW at_w(const Vec& w) const;
  PointW at_u(const Vec& u) const;

  bool has_chart() const { return static_cast<bool>(fwd_); }
  const ChebChart* forward_chart() const { return fwd_.get(); }
  const ChebChart* inverse_chart() const { return inv_.get(); }
  void set_charts(std::shared_ptr<const ChebChart> fwd, std::shared_ptr<const ChebChart> inv) {
    fwd_ = std::move(fwd);
    inv_ = std::move(inv);
  }

 private:
  Vec tilde_from_q(const Vec& u, const Vec& q) const;
  std::shared_ptr<const ChebChart> fwd_, inv_;
};

/// Riemann invariants of the i-family: returns the family {q_j}.
std::function<Vec(const Vec&)> riemann_invariants(const FluxModel& model, int i,
                                                  const NormalizeOptions& opts = {});

NormalizedSystem build_transform(const FluxModel& model, int i, const NormalizeOptions& opts = {});

/// Writes/reads the chart coefficients; the key guards against stale files.
std::string transform_cache_key(const NormalizedSystem& ns);
void save_transform_cache(const NormalizedSystem& ns, const std::string& path);
bool load_transform_cache(NormalizedSystem& ns, const std::string& path);

struct NormalFormReport {
  double a0_offdiag = 0.0;      ///< property (4): max |A(0)_jk|, j != k
  bool a0_ordered = true;
  double col_i_offdiag = 0.0;   ///< property (2): max |a_ji(w)|, j != i
  double a_ii_dev = 0.0;        ///< property (2): max |a_ii(w) - lambda_i(w)|
  double r_i_angle = 0.0;       ///< property (3), radians
  double roundtrip = 0.0;       ///< property (1): max |to_u(to_w(u)) - u| / (1 + |u|)
  bool pass = false;
  std::vector<std::string> failed;
};

/// With `A_override`, the checks run against that matrix field instead.
NormalFormReport verify_normal_form(const NormalizedSystem& ns, const std::vector<Vec>& samples,
                                    const std::function<Mat(const Vec&)>& A_override = {});

struct BlowupSeed {
  double x0 = 0.0;
  Vec N;            ///< N_j = min_x H_j(x)
  double Hpp = 0.0;
  double margin = 0.0;
  std::vector<std::string> warnings;
};

struct Lifespan {
  double T_hat = 0.0;
  BlowupSeed seed;
  Vec dlambda;      ///< d lambda_j / d w_j at 0
};

/// Leading-order data in w: (dw/du)(0) u_0(x) and its derivative.
Vec leading_w0(const NormalizedSystem& ns, const InitialData& data, double x);
Vec leading_w0_prime(const NormalizedSystem& ns, const InitialData& data, double x);

Lifespan lifespan_estimate(const NormalizedSystem& ns, const InitialData& data, int grid = 4096);

}  // namespace shockforge
