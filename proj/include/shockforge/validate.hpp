#pragma once

#include "shockforge/shockfit.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace shockforge {

struct FVOptions {
  int cells = 4096;
  double cfl = 0.9;
  double x_lo = 0.0, x_hi = 0.0;  ///< equal: data support padded by the largest speed times t_end, plus one
  std::string scheme = "auto";    ///< godunov (scalar only), hll, or auto
};

struct FVSolution {
  std::string scheme;
  double cfl = 0.0;
  double dx = 0.0;
  std::vector<double> x;               ///< cell centres
  std::vector<double> t;               ///< output times
  std::vector<std::vector<Vec>> u;     ///< cell averages at the output times
  long steps = 0;
  double max_step_defect = 0.0;        ///< per step: change of sum u dx against boundary fluxes, relative
  double conservation_defect = 0.0;    ///< same over the whole run

  /// argmax over interfaces in [lo, hi] of |l (u_{k+1} - u_k)| with a 3-cell parabolic refinement.
  double shock_position(int level, const RowVec& l, double lo, double hi) const;
  void write_csv(const std::string& path, int stride = 1) const;
};

/// First-order finite volumes with transmissive ends. `times` ascending.
FVSolution fv_reference(const FluxModel& model, const InitialData& data, const std::vector<double>& times,
                        const FVOptions& opts = {});

/// Exact Godunov flux of a scalar law.
double godunov_flux(const FluxModel& model, double u_left, double u_right);
Vec hll_flux(const FluxModel& model, const Vec& u_left, const Vec& u_right);

/// Piecewise-smooth solution in u variables with one discontinuity.
struct PiecewiseSolution {
  int n = 1;
  std::function<Vec(double x, double t, int side)> state;  ///< side -1 left of the shock, +1 right
  std::function<double(double t)> shock;
  double t_lo = 0.0, t_hi = 0.0;
};

/// Converged shock-fit field in u variables: cubic in z, cubic Lagrange in t.
/// The discontinuity is moved to phi(t) + sigma_shift (t - t_first).
PiecewiseSolution piecewise_from_shockfit(const NormalizedSystem& ns, const ShockSolution& sol,
                                          double sigma_shift = 0.0);

/// psi = b((x - xc - speed (t - tc)) / rx) b((t - tc) / rt) with b(s) = exp(1 - 1 / (1 - s^2)).
/// Without compact_in_time the time factor is 1; the slab [tc - rt, tc + rt] bounds it.
struct TestFunction {
  double xc = 0.0, tc = 0.0, rx = 0.1, rt = 0.1, speed = 0.0;
  bool compact_in_time = true;

  double value(double x, double t) const;
  double d_x(double x, double t) const;
  double d_t(double x, double t) const;
};

struct WeakOptions {
  double tol = 1e-11;  ///< change between panel doublings, relative to the norm
  int min_panels = 4;
  int max_panels = 128;
};

struct WeakResidual {
  double residual = 0.0;  ///< max over components
  double norm = 0.0;      ///< L1 norms of psi, psi_x, psi_t, and psi on the time faces
  int panels = 0;
  bool converged = false;
};

/// |int int (u psi_t + f(u) psi_x) + int u psi (t_a) - int u psi (t_b)|.
WeakResidual weak_residual(const FluxModel& model, const PiecewiseSolution& s, const TestFunction& psi,
                           const WeakOptions& opts = {});

/// Test functions centred on the shock and riding with it; half compact in time.
std::vector<TestFunction> straddling_tests(const ShockSolution& sol, int count, std::uint64_t seed);

/// Shock position for Burgers with u0 supported in [a, b]: equal areas cut by the
/// chord between the outer characteristic feet.
double equal_area_shock(const std::function<double(double)>& u0, const std::function<double(double)>& du0,
                        double a, double b, double t);

/// Blowup point of Burgers from the closed-form characteristic map x = xi + u0(xi) t,
/// with labels taken at t0.
BlowupPoint burgers_blowup(const InitialData& data, double t0);

struct FVComparison {
  bool done = false;
  double dx = 0.0;
  double max_cells = 0.0;  ///< max |x_fv - phi| / dx
  double conservation_defect = 0.0;
  std::vector<double> t, x_fv, x_fit;
};

struct WeakSummary {
  bool done = false;
  int count = 0;
  double worst_ratio = 0.0;  ///< max residual / norm over straddling functions
  double smooth_residual = 0.0;
  double shifted_slope = 0.0;  ///< log-log slope of the residual against a sigma shift
  std::vector<WeakResidual> rows;
};

struct EqualAreaComparison {
  bool done = false;
  double max_error = 0.0;
  std::vector<double> t, x_oracle, x_fit;
};

/// Everything the scaling suite reads from one pipeline run.
struct RunArtifacts {
  std::string system;
  std::string profile;
  int n = 1, i = 0;
  double epsilon = 0.0;
  double min_N = 0.0;
  double t_handoff = 0.0;  ///< labels of the characteristic grid are taken here
  double analytic_eps_T = std::numeric_limits<double>::quiet_NaN();
  BlowupPoint bp;
  bool has_exact_blowup = false;
  BlowupPoint exact_blowup;
  bool has_cusp = false;
  CuspChart cusp;
  bool has_holder = false;
  HolderReport holder;
  bool has_shock = false;
  ShockCurve curve;
  IterateDiag diag;
  CubicJumpReport cubic;
  AppendixReport appendix;
  bool has_refined = false;
  ShockCurve refined_curve;
  IterateDiag refined_diag;
  CubicJumpReport refined_cubic;
  AppendixReport refined_appendix;
  FVComparison fv;
  WeakSummary weak;
  EqualAreaComparison equal_area;
  std::map<std::string, double> seconds;
};

struct ScalingRow {
  int criterion = 0;
  std::string name;
  std::string comparison;  ///< abs, rel, below, above
  double target = 0.0;
  double tolerance = 0.0;
  double fitted = 0.0;
  double stderr_fit = 0.0;
  std::string status = "skipped";  ///< pass, fail, skipped
  std::string detail;
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  bool all_pass() const;  ///< no failed row
  const ScalingRow* find(const std::string& name) const;
  void write_json(const std::string& path) const;
};

struct ScalingOptions {
  bool require_two_eps = true;
  double tau_lo = 1e-3, tau_hi = 0.5;  ///< window for the jump fits
  double path_tau_hi = 1.0;            ///< upper end of the shock-path window
};

ScalingReport scaling_suite(const std::vector<RunArtifacts>& runs, const ScalingOptions& opts = {});

/// y = a + b tau + c tau^p + d tau^(p+1) by unweighted least squares. The affine part
/// absorbs offsets in the anchor point; d absorbs the next order over a wide window.
struct PowerCorrection {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0, p = 0.0;
  double rms = 0.0;
};
PowerCorrection fit_power_correction(const std::vector<double>& tau, const std::vector<double>& y, double p_lo = 1.0,
                                     double p_hi = 3.0);

/// Extrapolation to eps = 0 of eps T through all samples (Neville).
double extrapolate_to_zero(const std::vector<double>& eps, const std::vector<double>& values);

}  // namespace shockforge
