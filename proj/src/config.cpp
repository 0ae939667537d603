#include "shockforge/config.hpp"

#include "shockforge/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace shockforge {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail_at(const std::string& source, int line, int column, const std::string& msg) {
  std::ostringstream os;
  os << source << ":" << line << ":" << column << ": " << msg;
  throw Error(ErrorKind::Config, os.str());
}

bool name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

const std::set<std::string> kSections = {"system", "params", "flux", "data", "grid", "tolerances", "validate", "output"};

const std::set<std::string> kKeys = {
    "system.name",          "system.family",       "system.seed",       "system.dim",
    "data.profile",         "data.amplitude",      "data.half_width",   "data.skew",
    "data.epsilon",         "grid.nx_smooth",      "grid.ny",           "grid.nt_fine",
    "grid.fv_cells",        "grid.shock_nt",       "grid.shock_nz",     "grid.z_ratio",
    "grid.t_ratio",         "grid.u_box",          "tolerances.newton_tol", "tolerances.rh_tol",
    "tolerances.conv_tol",  "tolerances.edge_tol", "tolerances.delta_start", "tolerances.delta_ext",
    "validate.refine",      "validate.fv",         "validate.weak_tests", "validate.seed",
    "output.dir",           "output.cache_dir",    "output.svg"};

}  // namespace

ConfigFile parse_config(const std::string& text, const std::string& source) {
  ConfigFile cf;
  cf.source = source;
  std::istringstream is(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = raw;
    if (const auto h = s.find('#'); h != std::string::npos) s = s.substr(0, h);
    if (trim(s).empty()) continue;
    const int lead = static_cast<int>(s.find_first_not_of(" \t"));
    if (s[lead] == '[') {
      const auto close = s.find(']', lead);
      if (close == std::string::npos) fail_at(source, line, static_cast<int>(s.size()) + 1, "expected ']'");
      if (!trim(s.substr(close + 1)).empty())
        fail_at(source, line, static_cast<int>(close) + 2, "unexpected text after section header");
      section = trim(s.substr(lead + 1, close - lead - 1));
      if (!kSections.count(section)) fail_at(source, line, lead + 2, "unknown section '" + section + "'");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail_at(source, line, static_cast<int>(s.size()) + 1, "expected '='");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) fail_at(source, line, lead + 1, "missing key before '='");
    for (std::size_t k = 0; k < key.size(); ++k)
      if (!name_char(key[k]))
        fail_at(source, line, lead + static_cast<int>(k) + 1, std::string("invalid character '") + key[k] + "' in key");
    if (section.empty()) fail_at(source, line, lead + 1, "key '" + key + "' outside any section");
    const std::string value = trim(s.substr(eq + 1));
    const int vcol = static_cast<int>(eq) + 2;
    if (value.empty()) fail_at(source, line, vcol, "missing value for '" + key + "'");
    if (section == "flux") {
      if (key != "term") fail_at(source, line, lead + 1, "the [flux] section only takes 'term' lines");
      cf.terms.push_back(value);
      cf.term_lines.push_back(line);
      continue;
    }
    const std::string full = section + "." + key;
    if (section != "params" && !kKeys.count(full)) fail_at(source, line, lead + 1, "unknown key '" + full + "'");
    if (cf.values.count(full)) fail_at(source, line, lead + 1, "duplicate key '" + full + "'");
    cf.values[full] = value;
    cf.lines[full] = line;
  }
  return cf;
}

ConfigFile load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Config, "cannot read config file " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return parse_config(os.str(), path);
}

std::vector<double> parse_number_list(const std::string& text, const std::string& field) {
  std::vector<double> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0' || !std::isfinite(v))
      throw Error(ErrorKind::Config, "field '" + field + "': '" + item + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorKind::Config, "field '" + field + "' is empty");
  return out;
}

namespace {

struct Reader {
  const ConfigFile& cf;

  std::string where(const std::string& key) const {
    std::ostringstream os;
    os << cf.source << ":" << cf.lines.at(key) << ": field '" << key << "'";
    return os.str();
  }
  double number(const std::string& key, double dflt) const {
    if (!cf.has(key)) return dflt;
    const std::string& v = cf.values.at(key);
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (*end != '\0' || !std::isfinite(x)) throw Error(ErrorKind::Config, where(key) + ": '" + v + "' is not a number");
    return x;
  }
  long integer(const std::string& key, long dflt) const {
    if (!cf.has(key)) return dflt;
    const std::string& v = cf.values.at(key);
    char* end = nullptr;
    const long x = std::strtol(v.c_str(), &end, 10);
    if (*end != '\0') throw Error(ErrorKind::Config, where(key) + ": '" + v + "' is not an integer");
    return x;
  }
  std::string text(const std::string& key, const std::string& dflt) const {
    return cf.has(key) ? cf.values.at(key) : dflt;
  }
  bool flag(const std::string& key, bool dflt) const {
    if (!cf.has(key)) return dflt;
    const std::string& v = cf.values.at(key);
    if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "off" || v == "no" || v == "0") return false;
    throw Error(ErrorKind::Config, where(key) + ": '" + v + "' is not a boolean");
  }
};

Monomial parse_term(const std::string& text, const std::string& where, int n) {
  std::istringstream is(text);
  Monomial m;
  if (!(is >> m.component >> m.coef)) throw Error(ErrorKind::Config, where + ": expected 'component coef powers...'");
  int p = 0;
  while (is >> p) m.powers.push_back(p);
  if (!is.eof()) throw Error(ErrorKind::Config, where + ": powers must be integers");
  m.component -= 1;
  if (m.component < 0 || m.component >= n) throw Error(ErrorKind::Config, where + ": component out of range");
  if (static_cast<int>(m.powers.size()) != n) throw Error(ErrorKind::Config, where + ": expected one power per unknown");
  int degree = 0;
  for (int q : m.powers) {
    if (q < 0) throw Error(ErrorKind::Config, where + ": negative power");
    degree += q;
  }
  if (degree > 4) throw Error(ErrorKind::Config, where + ": total degree above 4");
  return m;
}

bool power_of_two_in_range(long v) { return v >= 256 && v <= 65536 && (v & (v - 1)) == 0; }

}  // namespace

RunConfig run_config_from(const ConfigFile& cf) {
  const Reader r{cf};
  RunConfig c;
  if (!cf.has("system.name")) throw Error(ErrorKind::Config, cf.source + ": missing required field 'system.name'");
  c.system = r.text("system.name", c.system);
  c.family = static_cast<int>(r.integer("system.family", c.family));
  c.seed = static_cast<std::uint64_t>(r.integer("system.seed", static_cast<long>(c.seed)));
  c.dim = static_cast<int>(r.integer("system.dim", c.dim));
  for (const auto& [k, v] : cf.values)
    if (k.rfind("params.", 0) == 0) c.params[k.substr(7)] = r.number(k, 0.0);
  if (c.system == "polynomial") {
    if (cf.terms.empty()) throw Error(ErrorKind::Config, cf.source + ": a polynomial system needs [flux] term lines");
    for (std::size_t k = 0; k < cf.terms.size(); ++k) {
      std::ostringstream os;
      os << cf.source << ":" << cf.term_lines[k] << ": field 'flux.term'";
      c.terms.push_back(parse_term(cf.terms[k], os.str(), c.dim));
    }
  }

  c.profile.kind = r.text("data.profile", c.profile.kind);
  c.profile.amplitude = r.number("data.amplitude", c.profile.amplitude);
  c.profile.half_width = r.number("data.half_width", c.profile.half_width);
  c.profile.skew = r.number("data.skew", c.profile.skew);
  if (!cf.has("data.epsilon")) throw Error(ErrorKind::Config, cf.source + ": missing required field 'data.epsilon'");
  c.eps = parse_number_list(cf.values.at("data.epsilon"), r.where("data.epsilon"));

  c.nx_smooth = static_cast<int>(r.integer("grid.nx_smooth", c.nx_smooth));
  c.ny = static_cast<int>(r.integer("grid.ny", c.ny));
  c.nt_fine = static_cast<int>(r.integer("grid.nt_fine", c.nt_fine));
  c.fv_cells = static_cast<int>(r.integer("grid.fv_cells", c.fv_cells));
  c.shock_nt = static_cast<int>(r.integer("grid.shock_nt", c.shock_nt));
  c.shock_nz = static_cast<int>(r.integer("grid.shock_nz", c.shock_nz));
  c.z_ratio = r.number("grid.z_ratio", c.z_ratio);
  c.t_ratio = r.number("grid.t_ratio", c.t_ratio);
  c.u_box = r.number("grid.u_box", c.u_box);

  c.newton_tol = r.number("tolerances.newton_tol", c.newton_tol);
  c.rh_tol = r.number("tolerances.rh_tol", c.rh_tol);
  c.conv_tol = r.number("tolerances.conv_tol", c.conv_tol);
  if (cf.has("tolerances.conv_tol") && !(c.conv_tol > 0.0))
    throw Error(ErrorKind::Config, r.where("tolerances.conv_tol") + ": must be positive");
  c.edge_tol = r.number("tolerances.edge_tol", c.edge_tol);
  c.delta_start = r.number("tolerances.delta_start", c.delta_start);
  c.delta_ext = r.number("tolerances.delta_ext", c.delta_ext);

  c.refine = r.flag("validate.refine", c.refine);
  c.fv = r.text("validate.fv", c.fv);
  c.weak_tests = static_cast<int>(r.integer("validate.weak_tests", c.weak_tests));
  c.weak_seed = static_cast<std::uint64_t>(r.integer("validate.seed", static_cast<long>(c.weak_seed)));

  c.out_dir = r.text("output.dir", c.out_dir);
  c.cache_dir = r.text("output.cache_dir", c.cache_dir);
  c.svg = r.flag("output.svg", c.svg);
  validate_run_config(c);
  return c;
}

void validate_run_config(const RunConfig& c) {
  auto bad = [](const std::string& field, const std::string& msg) {
    throw Error(ErrorKind::Config, "field '" + field + "': " + msg);
  };
  if (c.eps.empty()) bad("data.epsilon", "the list of amplitudes is empty");
  for (double e : c.eps)
    if (!(e > 0.0)) bad("data.epsilon", "amplitudes must be positive");
  if (c.family < 1) bad("system.family", "family indices start at 1");
  if (!power_of_two_in_range(c.nx_smooth)) bad("grid.nx_smooth", "must be a power of two in [256, 65536]");
  if (!power_of_two_in_range(c.fv_cells)) bad("grid.fv_cells", "must be a power of two in [256, 65536]");
  if (!power_of_two_in_range(c.ny - 1L)) bad("grid.ny", "ny - 1 must be a power of two in [256, 65536]");
  if (c.nt_fine < 16) bad("grid.nt_fine", "at least 16 steps");
  if (c.shock_nt < 8) bad("grid.shock_nt", "at least 8 steps");
  if (c.shock_nz < 8) bad("grid.shock_nz", "at least 8 cells");
  if (!(c.z_ratio > 1.0)) bad("grid.z_ratio", "must exceed 1");
  if (!(c.t_ratio > 1.0)) bad("grid.t_ratio", "must exceed 1");
  if (!(c.u_box > 0.0)) bad("grid.u_box", "must be positive");
  const std::pair<const char*, double> tols[] = {{"tolerances.newton_tol", c.newton_tol},
                                                  {"tolerances.rh_tol", c.rh_tol},
                                                  {"tolerances.edge_tol", c.edge_tol},
                                                  {"tolerances.delta_start", c.delta_start},
                                                  {"tolerances.delta_ext", c.delta_ext}};
  for (const auto& [name, v] : tols)
    if (!(v > 0.0)) bad(name, "must be positive");
  if (c.conv_tol < 0.0) bad("tolerances.conv_tol", "must be positive");
  if (c.fv != "auto" && c.fv != "on" && c.fv != "off") bad("validate.fv", "one of auto, on, off");
  if (c.weak_tests < 0) bad("validate.weak_tests", "must be nonnegative");
  if (c.out_dir.empty()) bad("output.dir", "must not be empty");
}

RunConfig load_run_config(const std::string& path) { return run_config_from(load_config(path)); }

FluxModel RunConfig::model() const {
  if (system == "polynomial") return make_polynomial(dim, terms);
  std::map<std::string, double> p = params;
  if (system.rfind("synthetic", 0) == 0) {
    p.emplace("seed", static_cast<double>(seed));
    p.emplace("n", static_cast<double>(dim));
  }
  return make_model(system, p);
}

}  // namespace shockforge
