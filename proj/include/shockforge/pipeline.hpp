#pragma once

#include "shockforge/config.hpp"
#include "shockforge/validate.hpp"

#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace shockforge {

/// Error raised inside a named pipeline stage.
class StageFailure : public Error {
 public:
  StageFailure(const std::string& stage, const Error& cause);
  const std::string& stage() const { return stage_; }
  ErrorKind cause() const { return kind(); }

 private:
  std::string stage_;
};

enum class StopAfter { Blowup, Singularity, Shock, All };

struct PipelineOptions {
  StopAfter stop = StopAfter::All;
  bool write = true;           ///< artifact tree under the run directory
  std::ostream* log = nullptr; ///< stage timings; never written to the tree
};

struct RunResult {
  RunArtifacts artifacts;
  ScalingReport report;  ///< single-run rows
  std::string dir;
};

/// One amplitude through every stage. Stage errors surface as StageFailure.
RunResult run_pipeline(const RunConfig& cfg, double eps, const std::string& dir, const PipelineOptions& opts = {});

struct SweepResult {
  std::vector<RunResult> runs;  ///< in the order of the amplitudes given
  ScalingReport report;         ///< aggregate over all runs
  double extrapolated_eps_T = 0.0;
  double predicted_eps_T = 0.0;  ///< -1 / min N
};

/// Runs every amplitude in its own subdirectory "eps_<value>", at most `threads`
/// at a time, then aggregates. `threads` <= 0 reads SHOCKFORGE_THREADS.
SweepResult run_sweep(const RunConfig& cfg, const std::vector<double>& eps, const std::string& dir, int threads,
                      const PipelineOptions& opts = {});

int thread_cap();
std::string eps_dirname(double eps);

struct ClassifiedPoint {
  double x = 0.0, t = 0.0;
  MultiState state;
};

/// Runs up to the envelope and classifies (x, t) points against the cusp.
std::vector<ClassifiedPoint> classify_points(const RunConfig& cfg, double eps,
                                             const std::vector<std::pair<double, double>>& points);

/// Reads "x,t" rows; a header line is skipped.
std::vector<std::pair<double, double>> read_points_csv(const std::string& path);
void write_classified_csv(const std::string& path, const std::vector<ClassifiedPoint>& pts);

}  // namespace shockforge
