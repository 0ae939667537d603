#pragma once

#include "shockforge/normalize.hpp"

#include <functional>
#include <string>
#include <vector>

namespace shockforge {

struct CharsolveOptions {
  double t0_frac = 0.5;      ///< handoff time as a fraction of T_hat
  double delta_ext = 1.0;    ///< extension past the blowup time
  double t_end = 0.0;        ///< 0: T_hat * (1 + fine_frac) + delta_ext + 0.3
  int ny = 513;
  int nt_fine = 320;         ///< uniform steps across the fine window
  double fine_frac = 0.12;   ///< fine window starts at T_hat * (1 - fine_frac)
  double grade_ratio = 0.9;  ///< geometric step ratio approaching the fine window
  double y_margin = 0.0;     ///< 0: lambda_star + 1.5
  int nx_smooth = 1024;
  double smooth_cfl = 2.0;   ///< semi-Lagrangian step in cells per unit speed
  int smooth_max_steps = 400;
  int max_sweeps = 40;
  double sweep_tol = 1e-14;
};

/// Solution of the original system on [0, t0] in u variables.
struct SmoothPhase {
  double t0 = 0.0;
  std::vector<double> x;
  std::vector<Vec> u;          ///< handoff state u(x, t0)
  std::vector<double> snap_t;  ///< a few stored levels
  std::vector<std::vector<Vec>> snap_u;
  double min_K = 1.0;          ///< smallest i-characteristic stretching on [0, t0]
  double sup_u = 0.0;
  double ya = 0.0, yb = 0.0;   ///< image of the data support along i-characteristics
  std::vector<double> xi;      ///< i-characteristic labels at t = 0 ...
  std::vector<double> X;       ///< ... and their positions at t0
  std::function<Vec(double)> exact;  ///< set when the state is known in closed form (n = 1)

  Vec state(double xq) const;  ///< quintic interpolation of the handoff state
  /// Starting point at t = 0 of the i-characteristic through (y, t0).
  double label(double y) const;
};

SmoothPhase smooth_evolve(const NormalizedSystem& ns, const InitialData& data, double t0,
                          const CharsolveOptions& opts = {});

struct PhiSample {
  double phi = 0, phi_y = 0, phi_yy = 0, phi_yyy = 0, phi_t = 0, phi_yt = 0, phi_yyt = 0;
};

struct Branch {
  double y = 0.0;
  Vec u;
  Vec w;
};

/// Blowup-system fields on the (y, t) mesh. States are stored in u variables;
/// v = w(u) is produced on demand.
class CharGrid {
 public:
  int n = 1;
  int i = 0;
  double t0 = 0.0;
  int deriv_order = 4;
  std::vector<double> y;
  std::vector<double> t;
  std::vector<double> phi;  ///< [level * ny + k]
  std::vector<double> K;
  std::vector<double> u;    ///< [(level * ny + k) * n + c]
  Vec boundary_left, boundary_right;
  int sweeps = 0;
  double sweep_residual = 0.0;
  long boundary_gap_hits = 0;
  const NormalizedSystem* ns = nullptr;

  int ny() const { return static_cast<int>(y.size()); }
  int nt() const { return static_cast<int>(t.size()); }
  double dy() const { return y[1] - y[0]; }
  Vec u_node(int level, int k) const;
  void set_u(int level, int k, const Vec& v);

  PhiSample sample(double yq, double tq) const;
  Vec u_at(double yq, double tq, Vec* du_dy = nullptr, Vec* du_dt = nullptr) const;
  Vec v_at(double yq, double tq) const { return ns->to_w(u_at(yq, tq)); }
  double K_at(double yq, double tq) const { return sample(yq, tq).phi_y; }
  /// min over y nodes of K at a grid level
  double min_K(int level, int* argmin = nullptr) const;
  /// h_i = l_i dv/dy, h_j = l_j dv/dt (j != i)
  Vec characteristic_derivatives(double yq, double tq) const;

  void write_csv(const std::string& path, int stride_y = 1, int stride_t = 1) const;
  void save(const std::string& path) const;
  bool load(const std::string& path);
};

CharGrid solve_blowup_system(const NormalizedSystem& ns, const SmoothPhase& handoff, double T_hat,
                             const CharsolveOptions& opts = {});

/// All y with phi(y, t) = x, ascending, each Newton-polished.
std::vector<Branch> sample_physical(const CharGrid& grid, double x, double t);

/// Domain half-width rate 2 max |lambda_k(0)|, floored at 1.
double lambda_star(const NormalizedSystem& ns);

}  // namespace shockforge
