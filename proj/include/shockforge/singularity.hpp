#pragma once

#include "shockforge/charsolve.hpp"

#include <functional>
#include <string>
#include <vector>

namespace shockforge {

/// phi(y, t) with derivatives on a rectangle; a CharGrid or a closed form.
struct PhiField {
  std::function<PhiSample(double, double)> eval;
  double y_lo = 0.0, y_hi = 0.0, t_lo = 0.0, t_hi = 0.0;
};

PhiField phi_field(const CharGrid& grid);

struct BlowupPoint {
  double y_eps = 0.0;
  double T_eps = 0.0;
  double x_eps = 0.0;
  double lambda_at_bp = 0.0;  ///< phi_t at the point, i.e. lambda_i there
  double phi_y = 0.0, phi_yy = 0.0;
  double phi_yyy = 0.0, phi_yt = 0.0, phi_yyt = 0.0;
  double t_first_zero = 0.0;  ///< first zero of min_y K(., t)
  int newton_iterations = 0;
  Vec u, w;                   ///< state there (empty for closed-form fields)

  double alpha() const { return phi_yyy / 6.0; }
  double beta() const { return -phi_yt; }
};

struct DetectOptions {
  double newton_tol = 1e-9;   ///< interpolation noise on phi_yy sits near 1e-11
  double fd_floor = 1e-8;
  int max_iter = 60;
};

BlowupPoint detect_blowup(const CharGrid& grid, const DetectOptions& opts = {});
/// Newton on (phi_y, phi_yy) = 0 from a seed; the first-zero time is found by
/// bisection on [t_before, seed_t].
BlowupPoint detect_blowup(const PhiField& f, double y_seed, double t_seed, double t_before,
                          const DetectOptions& opts = {});

/// Fold geometry at one time t > T_eps.
struct EnvelopeSample {
  double t = 0.0;
  double y_center = 0.0;  ///< phi_yy = 0 between the branches
  double eta_minus = 0.0, eta_plus = 0.0;
  double x_minus = 0.0, x_plus = 0.0;  ///< x_- = phi(eta_-) > x_+ = phi(eta_+)
};

EnvelopeSample envelope_at(const PhiField& f, const BlowupPoint& bp, double t,
                           const EnvelopeSample* seed = nullptr);

struct EnvelopeBranches {
  std::vector<EnvelopeSample> samples;  ///< ascending t
  double max_residual = 0.0;            ///< max |K(eta, t)|

  /// Samples bracketing t, interpolated in sqrt(t - T_eps); used as Newton seeds.
  EnvelopeSample seed_at(const BlowupPoint& bp, double t) const;
};

/// Geometric tau = t - T_eps samples on [tau_min, tau_max].
EnvelopeBranches envelope_branches(const PhiField& f, const BlowupPoint& bp, double tau_min,
                                   double tau_max, int samples = 64);

struct CuspChart {
  std::vector<double> tau, A, B;
  double A_slope = 0.0;         ///< A ~ A_slope tau + ...
  double A_curv = 0.0;
  double B_at_T = 0.0;          ///< intercept of the B fit
  double B_slope = 0.0;
  double width_exponent = 0.0;  ///< log-log slope of (x_- - x_+)/2 against tau
  double width_coef = 0.0;      ///< c in (x_- - x_+)/2 = c tau^{3/2} (1 + O(tau))
  double normalized_coef = 0.0; ///< c sqrt(alpha) / beta^{3/2}; the unfolding gives 2 sqrt(3)/9
  double eta_exponent = 0.0;
  double eta_normalized = 0.0;  ///< half-gap coefficient times sqrt(alpha / beta); 1/sqrt(3) expected
  double max_reconstruction = 0.0;
};

/// (9 / (4 sqrt 3)) (x_- - x_+) raised to 2/3.
double chart_A(double x_minus, double x_plus);
CuspChart cusp_chart(const EnvelopeBranches& br, const BlowupPoint& bp);

enum class Region { BeforeBlowup, OutsidePlus, OutsideMinus, InsideCusp, OnEnvelope };
const char* to_string(Region r);

struct Root {
  std::string tag;  ///< y_-, y_0, y_+ or y (single)
  double y = 0.0;
  Vec u, w;
};

struct MultiState {
  Region region = Region::BeforeBlowup;
  std::vector<Root> roots;  ///< ascending y
  double d_eps = 0.0;
  double max_residual = 0.0;
};

struct ClassifyOptions {
  double edge_tol = 1e-9;
};

MultiState classify_and_roots(const PhiField& f, const BlowupPoint& bp, const EnvelopeBranches& br,
                              double x, double t, const ClassifyOptions& opts = {});
/// Same, with states attached from the grid.
MultiState classify_and_roots(const CharGrid& grid, const BlowupPoint& bp, const EnvelopeBranches& br,
                              double x, double t, const ClassifyOptions& opts = {});

/// d_eps = (t - T)^3 + (x - x_eps - lambda (t - T))^2; |t - T|^3 before the blowup.
double d_eps(const BlowupPoint& bp, double x, double t);

struct PreshockCurve {
  std::vector<double> t, phi0, x_minus, x_plus;
  double linear_coef = 0.0;     ///< fitted d phi0 / dt at T_eps
  double quadratic_coef = 0.0;
  double d_exponent = 0.0;      ///< log-log slope of d_eps(phi0(t), t) in t - T_eps
  int halvings = 0;
};

PreshockCurve preshock_curve(const CharGrid& grid, const BlowupPoint& bp, const EnvelopeBranches& br,
                             double tau_max, int steps = 200);

struct HolderFit {
  std::string quantity;
  double slope = 0.0;
  double target = 0.0;
  double decades = 0.0;
  int points = 0;
};

struct HolderReport {
  std::vector<HolderFit> fits;
  std::vector<double> d, dy, dxy, dwi, dwj;  ///< raw samples, all rays
  const HolderFit* find(const std::string& q) const;
};

struct HolderOptions {
  double d_min = 1e-10;
  double d_max = 1e-5;
  int per_ray = 24;
};

HolderReport holder_probe(const CharGrid& grid, const BlowupPoint& bp, const EnvelopeBranches& br,
                          const HolderOptions& opts = {});

}  // namespace shockforge
