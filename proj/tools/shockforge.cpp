#include "shockforge/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace shockforge;
namespace fs = std::filesystem;

namespace {

enum Exit { kPass = 0, kStageFailure = 1, kConfigError = 2, kAcceptanceFailure = 3 };

void print_rows(const ScalingReport& rep) {
  for (const ScalingRow& r : rep.rows) {
    if (r.status == "skipped") continue;
    std::printf("  [%d] %-24s %-4s fitted %-12.6g target %-10.4g (%s)  %s\n", r.criterion, r.name.c_str(),
                r.status.c_str(), r.fitted, r.target, r.comparison.c_str(), r.detail.c_str());
  }
}

int summarize(const ScalingReport& rep) {
  print_rows(rep);
  std::printf("%s\n", rep.all_pass() ? "all rows pass" : "some rows fail");
  return rep.all_pass() ? kPass : kAcceptanceFailure;
}

RunConfig config_with_overrides(const std::string& path, const std::string& out) {
  RunConfig cfg = load_run_config(path);
  if (!out.empty()) cfg.out_dir = out;
  return cfg;
}

int report_dir(const std::string& dir) {
  for (const char* name : {"scaling_report.json", "report.json"}) {
    const fs::path p = fs::path(dir) / name;
    if (!fs::exists(p)) continue;
    std::ifstream is(p);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      std::fprintf(stderr, "error: %s: %s\n", p.string().c_str(), e.what());
      return kConfigError;
    }
    std::printf("%s\n", p.string().c_str());
    for (const auto& r : j["rows"]) {
      if (r["status"] == "skipped") continue;
      const double fitted = r["fitted"].is_number() ? r["fitted"].get<double>() : NAN;
      std::printf("  [%d] %-24s %-4s fitted %-12.6g  %s\n", r["criterion"].get<int>(),
                  r["name"].get<std::string>().c_str(), r["status"].get<std::string>().c_str(), fitted,
                  r["detail"].get<std::string>().c_str());
    }
    const bool pass = j["all_pass"].get<bool>();
    std::printf("%s\n", pass ? "all rows pass" : "some rows fail");
    return pass ? kPass : kAcceptanceFailure;
  }
  std::fprintf(stderr, "error: no report.json or scaling_report.json in %s\n", dir.c_str());
  return kConfigError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shockforge: smooth small data to a formed entropy shock"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "no stage timings on stderr");

  std::string config, out, eps_list, points, points_out, dir;
  double eps_one = 0.0;

  auto* run = app.add_subcommand("run", "full pipeline for each amplitude in the config");
  run->add_option("--config", config, "configuration file")->required();
  run->add_option("--out", out, "output directory (overrides output.dir)");

  auto* sweep = app.add_subcommand("sweep", "pipeline over a list of amplitudes, in parallel");
  sweep->add_option("--config", config, "configuration file")->required();
  sweep->add_option("--eps", eps_list, "comma separated amplitudes (overrides data.epsilon)");
  sweep->add_option("--out", out, "output directory");

  auto* sing = app.add_subcommand("singularity", "cusp geometry tools");
  sing->require_subcommand(1);
  auto* classify = sing->add_subcommand("classify", "classify (x, t) points against the cusp");
  classify->add_option("--config", config, "configuration file")->required();
  classify->add_option("--points", points, "CSV of x,t rows")->required();
  classify->add_option("--eps", eps_one, "amplitude (default: first of data.epsilon)");
  classify->add_option("--out", points_out, "output CSV (default: stdout)");

  auto* val = app.add_subcommand("validate", "scaling suite");
  val->require_subcommand(1);
  auto* all = val->add_subcommand("all", "every amplitude of the config, then scaling_report.json");
  all->add_option("--config", config, "configuration file")->required();
  all->add_option("--out", out, "output directory");

  auto* rep = app.add_subcommand("report", "print the rows of a finished run or sweep");
  rep->add_option("--dir", dir, "run or sweep directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kPass : kConfigError;
  }

  PipelineOptions po;
  po.log = quiet ? nullptr : &std::cerr;
  try {
    if (*rep) return report_dir(dir);

    RunConfig cfg = config_with_overrides(config, out);
    if (*classify) {
      const double e = eps_one > 0.0 ? eps_one : cfg.eps.front();
      const auto pts = classify_points(cfg, e, read_points_csv(points));
      if (points_out.empty()) {
        write_classified_csv("/dev/stdout", pts);
      } else {
        write_classified_csv(points_out, pts);
      }
      return kPass;
    }
    if (*sweep && !eps_list.empty()) {
      cfg.eps = parse_number_list(eps_list, "--eps");
      validate_run_config(cfg);
    }
    if (*run && cfg.eps.size() == 1) {
      const RunResult r = run_pipeline(cfg, cfg.eps.front(), cfg.out_dir, po);
      std::printf("%s eps=%g: T_eps %.10g, x_eps %.10g\n", cfg.system.c_str(), cfg.eps.front(), r.artifacts.bp.T_eps,
                  r.artifacts.bp.x_eps);
      return summarize(r.report);
    }
    const SweepResult s = run_sweep(cfg, cfg.eps, cfg.out_dir, thread_cap(), po);
    for (const RunResult& r : s.runs)
      std::printf("%s eps=%g: T_eps %.10g, eps T_eps %.10g\n", cfg.system.c_str(), r.artifacts.epsilon,
                  r.artifacts.bp.T_eps, r.artifacts.epsilon * r.artifacts.bp.T_eps);
    std::printf("extrapolated eps T_eps %.8g, -1/min N %.8g\n", s.extrapolated_eps_T, s.predicted_eps_T);
    return summarize(s.report);
  } catch (const StageFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kStageFailure;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == ErrorKind::Config ? kConfigError : kStageFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kStageFailure;
  }
}
