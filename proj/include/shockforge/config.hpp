#pragma once

#include "shockforge/system.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace shockforge {

/// Parsed "[section]" / "key = value" text. Keys are stored as "section.key".
struct ConfigFile {
  std::map<std::string, std::string> values;
  std::map<std::string, int> lines;  ///< line of each key, for messages
  std::vector<std::string> terms;    ///< repeated "term = ..." lines of [flux], in order
  std::vector<int> term_lines;
  std::string source;

  bool has(const std::string& key) const { return values.count(key) != 0; }
};

/// Throws Error(Config) with "source:line:column: message" on malformed input.
ConfigFile parse_config(const std::string& text, const std::string& source = "<config>");
ConfigFile load_config(const std::string& path);

struct RunConfig {
  // [system]
  std::string system = "burgers";
  std::map<std::string, double> params;  ///< [params] section, passed to make_model
  int family = 1;                        ///< 1-based index of the compressed family
  std::uint64_t seed = 7;                ///< synthetic systems
  int dim = 3;                           ///< synthetic and polynomial systems
  std::vector<Monomial> terms;           ///< polynomial systems
  // [data]
  ScalarProfile profile;
  std::vector<double> eps;
  // [grid]
  int nx_smooth = 1024;
  int ny = 513;
  int nt_fine = 320;
  int fv_cells = 4096;
  int shock_nt = 200;
  int shock_nz = 200;
  double z_ratio = 1.1;
  double t_ratio = 1.1;
  double u_box = 0.2;
  // [tolerances]
  double newton_tol = 1e-9;
  double rh_tol = 1e-12;
  double conv_tol = 0.0;  ///< 0: scaled with eps
  double edge_tol = 1e-9;
  double delta_start = 1e-3;
  double delta_ext = 1.0;
  // [validate]
  bool refine = true;
  std::string fv = "auto";  ///< auto (n <= 2), on, off
  int weak_tests = 20;
  std::uint64_t weak_seed = 1;
  // [output]
  std::string out_dir = "out";
  std::string cache_dir;  ///< empty: no transform cache
  bool svg = true;

  FluxModel model() const;
  int index() const { return family - 1; }
};

/// Reads and checks a run configuration. Throws Error(Config) naming the field.
RunConfig run_config_from(const ConfigFile& file);
RunConfig load_run_config(const std::string& path);
void validate_run_config(const RunConfig& cfg);

/// Comma separated list of numbers.
std::vector<double> parse_number_list(const std::string& text, const std::string& field);

}  // namespace shockforge
