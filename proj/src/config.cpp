#include "cayley/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>

#include "cayley/errors.hpp"
#include "cayley/gluing.hpp"
#include "cayley/io.hpp"
#include "cayley/patches.hpp"

namespace cayley {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& value) {
  const char* c = value.c_str();
  char* end = nullptr;
  double x = std::strtod(c, &end);
  if (end == c || *end != '\0' || !std::isfinite(x)) {
    std::ostringstream os;
    os << key << " = '" << value << "' is not a finite number";
    throw ConfigInvalid(os.str());
  }
  return x;
}

int parse_int(const std::string& key, const std::string& value) {
  const char* c = value.c_str();
  char* end = nullptr;
  long x = std::strtol(c, &end, 10);
  if (end == c || *end != '\0') {
    std::ostringstream os;
    os << key << " = '" << value << "' is not an integer";
    throw ConfigInvalid(os.str());
  }
  return static_cast<int>(x);
}

std::uint64_t parse_seed(const std::string& key, const std::string& value) {
  if (!value.empty() && value[0] == '-')
    throw ConfigInvalid(key + " must be a non-negative integer");
  const char* c = value.c_str();
  char* end = nullptr;
  unsigned long long x = std::strtoull(c, &end, 10);
  if (end == c || *end != '\0') {
    std::ostringstream os;
    os << key << " = '" << value << "' is not an integer";
    throw ConfigInvalid(os.str());
  }
  return static_cast<std::uint64_t>(x);
}

std::vector<double> parse_number_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= value.size()) {
    std::size_t comma = value.find(',', pos);
    std::string tok = trim(comma == std::string::npos ? value.substr(pos)
                                                      : value.substr(pos, comma - pos));
    if (tok.empty()) throw ConfigInvalid(key + " has an empty list entry");
    out.push_back(parse_number(key, tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// shortest round-trip decimal form
std::string num(double x) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream os;
      os << "line " << lineno << " is not key = value: '" << line << "'";
      throw ConfigInvalid(os.str());
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      std::ostringstream os;
      os << "line " << lineno << " has an empty key";
      throw ConfigInvalid(os.str());
    }
    if (!seen.insert(key).second) throw ConfigInvalid("duplicate key '" + key + "'");

    if (key == "scenario")
      cfg.scenario = value;
    else if (key == "eps")
      cfg.eps = parse_number(key, value);
    else if (key == "t") {
      cfg.t_list = parse_number_list(key, value);
      cfg.t_set = true;
    }
    else if (key == "nu")
      cfg.nu = parse_number(key, value);
    else if (key == "nu_p")
      cfg.nu_p = parse_number(key, value);
    else if (key == "nu_pp")
      cfg.nu_pp = parse_number(key, value);
    else if (key == "R0")
      cfg.R0 = parse_number(key, value);
    else if (key == "r0")
      cfg.r0 = parse_number(key, value);
    else if (key == "p")
      cfg.p = parse_number(key, value);
    else if (key == "k")
      cfg.k = parse_int(key, value);
    else if (key == "delta")
      cfg.delta = parse_number(key, value);
    else if (key == "mu")
      cfg.mu = parse_number(key, value);
    else if (key == "lambda")
      cfg.lambda = parse_number(key, value);
    else if (key == "link_res")
      cfg.link_res = parse_int(key, value);
    else if (key == "radial_n") {
      cfg.radial_n = parse_int(key, value);
      cfg.radial_set = true;
    }
    else if (key == "out_dir")
      cfg.out_dir = value;
    else if (key == "seed")
      cfg.seed = parse_seed(key, value);
    else
      throw ConfigInvalid("unknown key '" + key + "'");
  }
  return cfg;
}

void RunConfig::validate() const {
  std::ostringstream os;
  if (scenario != "quadric" && scenario != "exact-cone") {
    os << "scenario must be quadric or exact-cone, got '" << scenario << "'";
    throw ConfigInvalid(os.str());
  }
  if (!(eps > 0.0 && eps < 1.0)) {
    os << "eps = " << eps << " must lie in (0, 1)";
    throw ConfigInvalid(os.str());
  }
  if (!(nu > 0.0 && nu < 1.0)) {
    os << "nu = " << nu << " must lie in (0, 1)";
    throw ConfigInvalid(os.str());
  }
  if (!(nu_p > 0.0 && nu_p < nu)) {
    os << "nu_p = " << nu_p << " must lie in (0, nu) with nu = " << nu;
    throw ConfigInvalid(os.str());
  }
  if (!(nu_pp > 0.0 && nu_pp < nu_p)) {
    os << "nu_pp = " << nu_pp << " must lie in (0, nu_p) with nu_p = " << nu_p;
    throw ConfigInvalid(os.str());
  }
  if (!(R0 > 0.0 && R0 < 1.0)) {
    os << "R0 = " << R0 << " must lie in (0, 1)";
    throw ConfigInvalid(os.str());
  }
  if (!(r0 > 0.0)) {
    os << "r0 = " << r0 << " must be positive";
    throw ConfigInvalid(os.str());
  }
  if (t_list.empty()) throw ConfigInvalid("t needs at least one scale");
  for (double t : t_list) {
    if (!(t > 0.0 && t < 1.0)) {
      os << "t = " << t << " must lie in (0, 1)";
      throw ConfigInvalid(os.str());
    }
    double neck = std::pow(t, nu);
    if (!(neck < R0)) {
      os << "t = " << t << " puts the neck radius t^nu = " << neck
         << " outside the conical chart R0 = " << R0;
      throw ConfigInvalid(os.str());
    }
    if (!(r0 * t < 0.5 * neck)) {
      os << "r0 = " << r0 << " puts the joining radius r0 t = " << r0 * t
         << " past the half-neck radius " << 0.5 * neck << " at t = " << t;
      throw ConfigInvalid(os.str());
    }
  }
  if (!(p > 1.0)) {
    os << "p = " << p << " must exceed 1";
    throw ConfigInvalid(os.str());
  }
  if (k < 0 || k > 2) {
    os << "k = " << k << " must lie in {0, 1, 2}";
    throw ConfigInvalid(os.str());
  }
  if (!(mu > 1.0 && mu < 2.0)) {
    os << "mu = " << mu << " must lie in (1, 2)";
    throw ConfigInvalid(os.str());
  }
  if (!(lambda < 1.0)) {
    os << "lambda = " << lambda << " must lie below 1";
    throw ConfigInvalid(os.str());
  }
  double cap = (mu * (lambda - 2.0) + 1.0) / (lambda - mu);
  if (!(delta > 1.0 && delta < cap)) {
    os << "delta = " << delta << " must lie in (1, " << cap
       << ") for lambda = " << lambda << ", mu = " << mu;
    throw ConfigInvalid(os.str());
  }
  if (link_res < 4) {
    os << "link_res = " << link_res << " must be >= 4";
    throw ConfigInvalid(os.str());
  }
  if (radial_n < 8) {
    os << "radial_n = " << radial_n << " must be >= 8";
    throw ConfigInvalid(os.str());
  }
  if (out_dir.empty()) throw ConfigInvalid("out_dir must not be empty");
}

std::string RunConfig::resolved_text() const {
  std::string out;
  out += "scenario = " + scenario + "\n";
  out += "eps = " + num(eps) + "\n";
  out += "t = ";
  for (std::size_t i = 0; i < t_list.size(); ++i) {
    if (i) out += ", ";
    out += num(t_list[i]);
  }
  out += "\n";
  out += "nu = " + num(nu) + "\n";
  out += "nu_p = " + num(nu_p) + "\n";
  out += "nu_pp = " + num(nu_pp) + "\n";
  out += "R0 = " + num(R0) + "\n";
  out += "r0 = " + num(r0) + "\n";
  out += "p = " + num(p) + "\n";
  out += "k = " + std::to_string(k) + "\n";
  out += "delta = " + num(delta) + "\n";
  out += "mu = " + num(mu) + "\n";
  out += "lambda = " + num(lambda) + "\n";
  out += "link_res = " + std::to_string(link_res) + "\n";
  out += "radial_n = " + std::to_string(radial_n) + "\n";
  out += "out_dir = " + out_dir + "\n";
  out += "seed = " + std::to_string(seed) + "\n";
  return out;
}

void echo_config(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.out_dir + "'");
  write_text_file(cfg.out_dir + "/config_resolved.cfg", cfg.resolved_text());
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg = parse_config_text(read_text_file(path));
  cfg.validate();
  echo_config(cfg);
  return cfg;
}

GluedImmersion scenario_from_config(const RunConfig& cfg, double t) {
  GluingData d;
  d.scales = {t};
  d.nu = cfg.nu;
  d.nu_p = cfg.nu_p;
  d.nu_pp = cfg.nu_pp;
  d.r0 = cfg.r0;
  d.R0 = cfg.R0;
  ParametricPatch cs = make_quadric_cone(1e-3, d.R0, cfg.link_res);
  ParametricPatch ac = cfg.scenario == "quadric"
                           ? make_quadric_smoothing(cfg.eps, 6.0, cfg.link_res)
                           : make_quadric_cone(0.21, 6.0, cfg.link_res);
  return build_glued_immersion(cs, {ac}, d, cfg.radial_n);
}

}  // namespace cayley
