#pragma once

#include "shockforge/singularity.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace shockforge {

struct ShockfitOptions {
  double delta_start = 1e-3;  ///< first level at T_eps + delta_start
  double t_span = 1.0;        ///< last level at T_eps + t_span
  double t_ratio = 1.1;       ///< geometric growth of the early steps
  int nt_uniform = 200;       ///< steps across t_span once the grading saturates
  double z_h0 = 1e-7;         ///< mesh spacing at the shock
  double z_ratio = 1.1;
  int nz_uniform = 200;       ///< cells per unit of the outer half-width
  double z_margin = 0.1;      ///< half-width left at the last level
  double epsilon = 0.1;       ///< data amplitude; sets the default conv_tol
  double conv_tol = 0.0;      ///< 0: 1e-10 epsilon
  int max_iters = 60;
  double rh_tol = 1e-12;
  double entropy_slack = 0.0;
  double weight_C = 1.0;      ///< weighted norm |dw_i| + (C + 1) sum |dw_j|
  int foot_iterations = 3;
};

/// Fields on the shock frame z = x - phi(t); index k runs over |z| on both sides.
struct ShockFrameField {
  int n = 1;
  int i = 0;
  double T_eps = 0.0;
  double x_eps = 0.0;
  double phi_start = 0.0;      ///< phi at the first level
  double lambda_star = 1.0;
  double z_margin = 0.0;
  std::vector<double> t;
  std::vector<double> zabs;    ///< ascending, zabs[0] = 0
  std::vector<int> active;     ///< nodes carried at each level (non-increasing)
  std::vector<double> w_minus, w_plus;  ///< [(level * nz + k) * n + c]

  int nt() const { return static_cast<int>(t.size()); }
  int nz() const { return static_cast<int>(zabs.size()); }
  /// Domain of determinacy: lambda_star (t_end - t) + z_margin.
  double half_width(double tt) const;
  Vec at(int side, int level, int k) const;  ///< side -1 or +1
  void set(int side, int level, int k, const Vec& w);
  /// Monotone cubic in z, linear in t.
  Vec sample(int side, double z, double tt) const;
  void save(const std::string& path) const;
  bool load(const std::string& path);
};

struct ShockCurve {
  double T_eps = 0.0;
  std::vector<double> t, phi, sigma;
  std::vector<Vec> w_minus, w_plus;  ///< traces at z = 0-, 0+
  std::vector<Vec> jumps;            ///< [w] = w(0-) - w(0+)
  std::vector<std::array<double, 4>> margins;  ///< Lax margins; +inf where a neighbor family is absent
  std::vector<double> rh_residual;
  double entropy_margin = 0.0;       ///< min over levels after the first of all margins

  void write_csv(const std::string& path) const;
};

struct IterateDiag {
  std::vector<double> diff_i, diff_j, weighted, contraction_ratios, rh_residuals;
  double cubic_ratio = 0.0;  ///< max_t max_j |[w_j]| / |[w_i]|^3
  int iterations = 0;
  bool converged = false;
  long geometry_violations = 0;  ///< i-feet on the wrong side of the shock
  double conv_tol = 0.0;

  void write_json(const std::string& path) const;
};

/// lambda_i of the Gauss-Legendre average of F between the two states.
double sigma_average(const FluxModel& model, int i, const Vec& u_minus, const Vec& u_plus);

/// Four strict Lax inequalities as margins.
std::array<double, 4> lax_margins(const NormalizedSystem& ns, const Vec& w_minus, const Vec& w_plus,
                                  double sigma);

struct RhResult {
  Vec w_minus, w_plus;
  double sigma = 0.0;
  double residual = 0.0;
  int iterations = 0;
  std::array<double, 4> margins{};
};

/// Known traces: w_minus[j] for j >= i and w_plus[j] for j <= i. The remaining
/// entries and sigma_seed (NaN: averaged speed) seed the Newton solve.
RhResult rh_closure(const NormalizedSystem& ns, const Vec& w_minus, const Vec& w_plus,
                    double sigma_seed, const ShockfitOptions& opts = {});

/// w on side -1 / +1 at physical (x, t); called outward from the shock at each level.
using BranchData = std::function<Vec(double x, double t, int side)>;

struct FirstApproximation {
  ShockFrameField field;       ///< w^0 at every level
  ShockCurve seed;             ///< phi^0 with the jumps of w^0
  std::vector<double> sigma0;  ///< d phi^0 / dt at the levels
};

ShockFrameField make_shock_frame(const NormalizedSystem& ns, double T_eps, double x_eps,
                                 const ShockfitOptions& opts);
FirstApproximation first_approximation(const NormalizedSystem& ns, double T_eps, double x_eps,
                                       const std::function<double(double)>& phi0,
                                       const BranchData& data, const ShockfitOptions& opts);
/// Outer branches of the multivalued solution around the pre-shock curve.
FirstApproximation init_first_approximation(const CharGrid& grid, const BlowupPoint& bp,
                                            const EnvelopeBranches& br, const PreshockCurve& pc,
                                            const ShockfitOptions& opts);

struct ShockSolution {
  ShockFrameField field;
  ShockCurve curve;
  IterateDiag diag;
};

ShockSolution iterate_to_convergence(const NormalizedSystem& ns, const FirstApproximation& init,
                                     const ShockfitOptions& opts);

struct CubicJumpReport {
  struct Family {
    int j = 0;
    double limit = 0.0;   ///< [w_j] / [w_i]^3 extrapolated to T_eps
    double max_abs = 0.0;
    double spread = 0.0;  ///< (max - min) / |limit| over the levels used
    double slope = 0.0;   ///< log |[w_j]| against log |[w_i]|
    int points = 0;
  };
  std::vector<Family> families;
  double noise_floor = 0.0;
};

CubicJumpReport cubic_jump_diagnostic(const ShockCurve& curve, int i);

struct AppendixReport {
  double separation_c = 0.0;  ///< min of ((s-T)^3 + xi^2) / ((t-T)^3 + z^2) along traced i-characteristics
  double C_hat = 0.0;         ///< max of (int |d_z lambda_i| ds - ln 3/2) / (eps sqrt(t - T)), floored at 0
  double max_integral = 0.0;
  int paths = 0;
};

/// Traces i-characteristics backward from sample points of the converged field.
AppendixReport appendix_diagnostics(const NormalizedSystem& ns, const ShockSolution& sol, double epsilon);

}  // namespace shockforge
