#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace cayley {

struct GluedImmersion;

// Run configuration for the scenario commands, loaded from a key=value
// text file ('#' comments, one pair per line, see FORMATS.md). Unset keys
// keep the defaults below; unknown or duplicate keys are rejected.
struct RunConfig {
  std::string scenario = "quadric";  // quadric | exact-cone

  // geometry: cap smoothing scale, gluing scales, neck exponents, chart radii
  double eps = 0.2;
  std::vector<double> t_list = {0.02};
  double nu = 0.8;
  double nu_p = 0.68;
  double nu_pp = 0.56;
  double R0 = 0.9;
  double r0 = 0.5;

  // analysis: norm exponent, derivative count, weight, cone rates
  double p = 2.0;
  int k = 1;
  double delta = 1.25;
  double mu = 1.5;
  double lambda = -1.0;

  int link_res = 6;
  int radial_n = 96;
  std::string out_dir = "out";
  std::uint64_t seed = 0;

  // set when the key appeared explicitly (file or flag); the error-scan
  // command substitutes its own scan defaults when these were left alone
  bool t_set = false;
  bool radial_set = false;

  // ConfigInvalid naming the offending key; checks every inequality the
  // glued construction needs (0 < nu_pp < nu_p < nu < 1, the radius chain
  // 0 < r0 t < t^nu / 2 < t^nu < R0 < 1 per scale, delta below the cap
  // fixed by (lambda, mu), p > 1, 0 <= k <= 2, resolution floors)
  void validate() const;

  // canonical echo: every key in fixed order, floats in full precision
  std::string resolved_text() const;
};

// parse + defaults, no validation (callers may override fields first)
RunConfig parse_config_text(const std::string& text);

// read, parse, validate, then echo the resolved config to
// <out_dir>/config_resolved.cfg (directory created if missing)
RunConfig load_config(const std::string& path);

// write resolved_text() to <out_dir>/config_resolved.cfg
void echo_config(const RunConfig& cfg);

// glued immersion per the config's geometry block at one scale t
GluedImmersion scenario_from_config(const RunConfig& cfg, double t);

}  // namespace cayley
