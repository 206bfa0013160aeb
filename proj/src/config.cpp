#include "stfem/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "stfem/problems.hpp"

namespace stfem {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string where(const std::string& source, int line) {
  return source + ":" + std::to_string(line) + ": ";
}

HkConvention parse_hk(const std::string& name) {
  if (name == "temporal") return HkConvention::temporal;
  if (name == "min") return HkConvention::min;
  if (name == "max") return HkConvention::max;
  fail(ErrorKind::config, "unknown h_K convention '" + name + "'");
}

MajorantKind parse_estimator(const std::string& name) {
  if (name == "eta1" || name == "1") return MajorantKind::eta1;
  if (name == "eta2" || name == "2") return MajorantKind::eta2;
  fail(ErrorKind::config, "unknown estimator '" + name + "'");
}

}  // namespace

ConfigFile ConfigFile::parse(std::istream& is, const std::string& source) {
  ConfigFile cfg;
  cfg.source_ = source;
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::config, where(source, number) + "expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(ErrorKind::config, where(source, number) + "missing key");
    if (value.empty()) {
      fail(ErrorKind::config, where(source, number) + "missing value for '" + key + "'");
    }
    const auto it = cfg.entries_.find(key);
    if (it != cfg.entries_.end()) {
      fail(ErrorKind::config, where(source, number) + "duplicate key '" + key +
                                  "' (first set on line " + std::to_string(it->second.line) + ")");
    }
    cfg.entries_.emplace(key, Entry{value, number});
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::config, "cannot open config file '" + path + "'");
  return parse(in, path);
}

std::optional<std::string> ConfigFile::raw(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.value;
}

void ConfigFile::bad_value(const std::string& key, const std::string& expected) const {
  const Entry& e = entries_.at(key);
  fail(ErrorKind::config, where(source_, e.line) + "'" + key + "' expects " + expected +
                              ", got '" + e.value + "'");
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
  return raw(key).value_or(fallback);
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  double x = 0.0;
  const char* end = v->data() + v->size();
  const auto [ptr, ec] = std::from_chars(v->data(), end, x);
  if (ec != std::errc() || ptr != end) bad_value(key, "a number");
  return x;
}

long ConfigFile::get_int(const std::string& key, long fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  // Accept 2e6 style values when they are integral.
  double x = 0.0;
  const char* end = v->data() + v->size();
  const auto [ptr, ec] = std::from_chars(v->data(), end, x);
  if (ec != std::errc() || ptr != end || x != static_cast<double>(static_cast<long>(x))) {
    bad_value(key, "an integer");
  }
  return static_cast<long>(x);
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  bad_value(key, "a boolean");
}

std::vector<int> ConfigFile::get_ints(const std::string& key, std::vector<int> fallback) const {
  auto v = raw(key);
  if (!v) return fallback;
  std::replace(v->begin(), v->end(), ',', ' ');
  std::istringstream is(*v);
  std::vector<int> out;
  std::string tok;
  while (is >> tok) {
    int x = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) bad_value(key, "a list of integers");
    out.push_back(x);
  }
  if (out.empty()) bad_value(key, "a list of integers");
  return out;
}

void ConfigFile::check_keys(const std::vector<std::string>& known) const {
  for (const auto& [key, e] : entries_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      fail(ErrorKind::config, where(source_, e.line) + "unknown key '" + key + "'");
    }
  }
}

ProblemSpec StudyConfig::make_problem() const {
  if (problem == "slit") {
    SlitGeometry g;
    if (geometry == "unit_square") {
      g = SlitGeometry::unit_square;
    } else if (geometry == "classical") {
      g = SlitGeometry::classical;
    } else {
      fail(ErrorKind::config, "unknown slit geometry '" + geometry + "'");
    }
    return slit_problem(g, alpha);
  }
  if (problem == "smooth") return smooth_problem(spatial_dim);
  if (problem == "sin-x-t3") return anisotropic_problem();
  if (problem == "t-x-1mx") return quadratic_in_space_problem();
  fail(ErrorKind::config, "unknown problem '" + problem + "'");
}

const std::vector<std::string>& study_config_keys() {
  static const std::vector<std::string> keys = {
      "problem", "geometry", "alpha", "dim", "degree", "cells", "theta0", "hk",
      "quadrature.extra", "quadrature.singular_extra", "quadrature.singular_pieces",
      "solver.preconditioner", "solver.restart", "solver.max_iterations",
      "adapt.mode", "adapt.sigma", "adapt.chi", "adapt.max_levels", "adapt.max_dofs",
      "adapt.nested", "adapt.rtol_coarse", "adapt.rtol_inner",
      "estimator.kind", "estimator.delta", "estimator.beta", "estimator.mu", "estimator.gamma",
      "estimator.c_f", "estimator.outer", "estimator.cg_steps", "estimator.jacobi",
      "estimator.direct", "estimator.rtol",
  };
  return keys;
}

StudyConfig study_config_from(const ConfigFile& f) {
  f.check_keys(study_config_keys());
  StudyConfig c;
  c.problem = f.get_string("problem", c.problem);
  c.geometry = f.get_string("geometry", c.geometry);
  c.alpha = f.get_double("alpha", c.alpha);
  c.spatial_dim = static_cast<int>(f.get_int("dim", c.spatial_dim));
  // Building the problem here reports bad names before any work starts.
  const ProblemSpec problem = c.make_problem();
  const int D = problem.domain.dim;

  StudySetup& s = c.setup;
  s.degree = static_cast<int>(f.get_int("degree", 1));
  require(s.degree >= 1 && s.degree <= 3, ErrorKind::config, "degree must be 1, 2 or 3");
  s.initial_cells = f.get_ints("cells", std::vector<int>(D, 2));
  require(static_cast<int>(s.initial_cells.size()) == D, ErrorKind::config,
          "cells needs one entry per space-time axis (" + std::to_string(D) + ")");

  s.stabilization.theta0 = f.get_double("theta0", s.stabilization.theta0);
  s.stabilization.convention = parse_hk(f.get_string("hk", "temporal"));

  s.quadrature.extra = static_cast<int>(f.get_int("quadrature.extra", s.quadrature.extra));
  s.quadrature.singular_extra =
      static_cast<int>(f.get_int("quadrature.singular_extra", s.quadrature.singular_extra));
  s.quadrature.singular_pieces =
      static_cast<int>(f.get_int("quadrature.singular_pieces", s.quadrature.singular_pieces));

  try {
    s.solver.preconditioner = parse_preconditioner(f.get_string("solver.preconditioner", "sgs"));
  } catch (const Error& e) {
    fail(ErrorKind::config, e.what());
  }
  s.solver.fgmres.restart = static_cast<int>(f.get_int("solver.restart", s.solver.fgmres.restart));
  s.solver.fgmres.max_iterations =
      static_cast<int>(f.get_int("solver.max_iterations", s.solver.fgmres.max_iterations));

  AdaptConfig& a = s.adapt;
  a.mode = parse_refinement_mode(f.get_string("adapt.mode", "anisotropic"));
  a.sigma = f.get_double("adapt.sigma", a.sigma);
  a.chi = f.get_double("adapt.chi", s.degree == 1 ? 0.1 : 0.15);
  a.max_levels = static_cast<int>(f.get_int("adapt.max_levels", a.max_levels));
  a.max_dofs = f.get_int("adapt.max_dofs", D == 3 ? 2'000'000 : 100'000);
  a.nested = f.get_bool("adapt.nested", a.nested);
  a.rtol_coarse = f.get_double("adapt.rtol_coarse", a.rtol_coarse);
  a.rtol_inner = f.get_double("adapt.rtol_inner", a.rtol_inner);
  a.estimator = parse_estimator(f.get_string("estimator.kind", "eta1"));

  EstimatorConfig& e = s.estimator;
  e.kind = a.estimator;
  e.delta = f.get_double("estimator.delta", e.delta);
  e.beta = f.get_double("estimator.beta", e.beta);
  e.mu = f.get_double("estimator.mu", e.mu);
  e.gamma = f.get_double("estimator.gamma", e.gamma);
  e.c_f = f.get_double("estimator.c_f", e.c_f);
  e.minimize.outer = static_cast<int>(f.get_int("estimator.outer", e.minimize.outer));
  e.minimize.cg_steps = static_cast<int>(f.get_int("estimator.cg_steps", e.minimize.cg_steps));
  e.minimize.jacobi = f.get_bool("estimator.jacobi", e.minimize.jacobi);
  e.minimize.direct = f.get_bool("estimator.direct", e.minimize.direct);
  e.minimize.rtol = f.get_double("estimator.rtol", e.minimize.rtol);
  require(e.minimize.outer >= 0 && e.minimize.cg_steps >= 0, ErrorKind::config,
          "estimator.outer and estimator.cg_steps must be non-negative");

  // Range checks with config errors instead of parameter errors.
  try {
    a.validate();
    MajorantParams::make(e.delta, std::max(e.beta, e.mu + 1e-12), e.mu, e.gamma, 1.0);
  } catch (const Error& err) {
    fail(ErrorKind::config, err.what());
  }
  return c;
}

StudyConfig load_study_config(const std::string& path) {
  return study_config_from(ConfigFile::load(path));
}

}  // namespace stfem
