#pragma once

#include "shockforge/core.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace shockforge {

// Field indices are 0-based throughout the library; the CLI accepts 1-based.

struct FluxModel {
  int n = 1;
  std::string label;
  std::function<Vec(const Vec&)> flux;
  std::function<Mat(const Vec&)> jacobian;  ///< empty: central differences
  double box = 0.5;                         ///< admissible states: |u|_inf < box

  Vec f(const Vec& u) const { return flux(u); }
  Mat jac(const Vec& u) const;
  Mat jac_fd(const Vec& u) const;
};

struct EigenStructure {
  Vec lambdas;   ///< ascending
  Mat left;      ///< row j is l_j
  Mat right;     ///< column j is r_j, unit 2-norm
  double gap = 0.0;

  int n() const { return static_cast<int>(lambdas.size()); }
  RowVec l(int j) const { return left.row(j); }
  Vec r(int j) const { return right.col(j); }
};

constexpr double kHyperbolicityTol = 1e-8;

double fd_step(const Vec& u);

/// Eigen-decomposition of a small real matrix with real distinct spectrum.
/// With `orient`, r_j is flipped to have positive overlap with orient->r(j);
/// otherwise its largest-magnitude component is made positive.
EigenStructure eigen_decompose(const Mat& F, const EigenStructure* orient = nullptr,
                               double tol = kHyperbolicityTol);
EigenStructure eigen_decompose(const FluxModel& model, const Vec& u,
                               const EigenStructure* orient = nullptr,
                               double tol = kHyperbolicityTol);

/// Ascending real eigenvalues only (closed form for n <= 2).
Vec eigenvalues(const Mat& F, double tol = kHyperbolicityTol);

double genuine_nonlinearity(const FluxModel& model, int j, const Vec& u);

/// Gradient of lambda_j by central differences.
RowVec lambda_gradient(const FluxModel& model, int j, const Vec& u);

struct JacobianReport {
  double max_rel_dev = 0.0;
  bool pass = true;
  int sample = -1;
  int row = -1;
  int col = -1;
};

JacobianReport validate_jacobian(const FluxModel& model, const std::vector<Vec>& samples,
                                 double tol = 1e-6);

FluxModel make_burgers();
FluxModel make_p_system(double gamma = 2.0);
/// Full Euler in conserved perturbation variables around a rest state with unit
/// density; the default pressure gives unit sound speed.
FluxModel make_euler3(double gamma = 1.4, double velocity = 0.0, double pressure = 1.0 / 1.4);
FluxModel make_synthetic(int n, std::uint64_t seed, double coupling = 0.3);
FluxModel make_linear(const Mat& C);

struct Monomial {
  int component = 0;
  double coef = 0.0;
  std::vector<int> powers;
};
FluxModel make_polynomial(int n, const std::vector<Monomial>& terms, const std::string& label = "polynomial");

/// Built-in family by name: burgers, p_system, euler3, synthetic_n (n from
/// "n"), with numeric parameters taken from `params` when present.
FluxModel make_model(const std::string& name, const std::map<std::string, double>& params);

struct InitialData {
  double epsilon = 0.1;
  double a = -1.0;
  double b = 1.0;
  std::function<Vec(double)> profile;   ///< u_0, zero outside [a, b]
  std::function<Vec(double)> dprofile;  ///< u_0'

  Vec u(double x) const { return epsilon * profile(x); }
};

/// Scalar profile g on [-L, L]: "sine" is -sin(pi x / L), "hann" is the
/// smoother -(sin s + sin(2s)/2)/2 with s = pi x / L. Both have min g' at 0
/// equal to -pi/L. "double" is -sin(3 pi x / L), whose g' has several equal minima.
/// "skew" is -sin s + skew sin^2 s, whose shock moves.
struct ScalarProfile {
  std::string kind = "sine";
  double half_width = 3.141592653589793;
  double amplitude = 1.0;
  double skew = 0.3;
  double g(double x) const;
  double dg(double x) const;
};

InitialData make_wave_data(const ScalarProfile& prof, const Vec& direction, double epsilon);

/// Sampled checks of the InitialData invariants.
bool initial_data_valid(const InitialData& data, int samples = 400);

}  // namespace shockforge
