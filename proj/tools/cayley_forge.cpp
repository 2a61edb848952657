// cayley-forge: batch front end over the library.
//
// Commands: check-plane, angle-test, critical-rates, index-change, index,
// glue, alpha-scan, error-scan, iterate, norms.  Every command echoes the
// resolved configuration and writes its reports under the configured output
// directory; nothing is written anywhere else.  Exit codes: 0 success,
// 2 invalid input or config, 3 numerical failure.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cayley/config.hpp"
#include "cayley/errors.hpp"
#include "cayley/flow.hpp"
#include "cayley/gluing.hpp"
#include "cayley/io.hpp"
#include "cayley/spectra.hpp"
#include "cayley/spin7.hpp"
#include "cayley/weights.hpp"

namespace {

using namespace cayley;

const char kUsage[] =
    "usage: cayley-forge <command> [flags]\n"
    "\n"
    "commands\n"
    "  check-plane     --frame V,V,V,V             calibration data of a 4-plane\n"
    "  angle-test      --frame1 ... --frame2 ...   characteristic-angle criterion\n"
    "  critical-rates  [--range LO HI]             critical weights of the flat cone\n"
    "  index-change    --from A --to B [--range LO HI]\n"
    "  index           --sigma S --euler E --self-int I --dim-s D\n"
    "  glue            [--dump-seams]              assemble the glued immersions\n"
    "  alpha-scan                                  cutoff decay across scales\n"
    "  error-scan                                  initial-defect scaling fit\n"
    "  iterate         [--no-cache]                contraction iteration to a Cayley immersion\n"
    "  norms           [--field FILE]              weighted norm report\n"
    "\n"
    "common flags: --config FILE, --out DIR, --seed N, --t V[,V...]\n"
    "scan commands also take --svg (log-log scatter plus fitted line)\n"
    "env: CAYLEY_FORGE_THREADS sets the worker pool for scale sweeps\n"
    "frame vectors: e1..e8 (optionally -e3) or eight ':'-separated reals\n"
    "exit codes: 0 ok, 2 invalid input or config, 3 numerical failure\n";

// ---------- flag handling ----------

struct Flags {
  std::map<std::string, std::vector<std::string>> vals;

  bool has(const std::string& name) const { return vals.count(name) != 0; }
  const std::string& one(const std::string& name) const { return vals.at(name)[0]; }
};

int flag_arity(const std::string& name) {
  if (name == "--svg" || name == "--no-cache" || name == "--dump-seams") return 0;
  if (name == "--range") return 2;
  return 1;
}

Flags parse_flags(int argc, char** argv, const std::set<std::string>& allowed,
                  const std::string& cmd) {
  Flags f;
  for (int i = 2; i < argc;) {
    std::string tok = argv[i];
    if (tok.rfind("--", 0) != 0)
      throw ConfigInvalid("unexpected argument '" + tok + "' for command '" + cmd + "'");
    if (!allowed.count(tok))
      throw ConfigInvalid("unknown flag '" + tok + "' for command '" + cmd + "'");
    if (f.vals.count(tok)) throw ConfigInvalid("duplicate flag '" + tok + "'");
    int arity = flag_arity(tok);
    if (i + arity >= argc) {
      std::ostringstream os;
      os << "flag '" << tok << "' needs " << arity << (arity == 1 ? " value" : " values");
      throw ConfigInvalid(os.str());
    }
    std::vector<std::string> vs;
    for (int k = 1; k <= arity; ++k) vs.push_back(argv[i + k]);
    f.vals.emplace(tok, std::move(vs));
    i += 1 + arity;
  }
  return f;
}

double arg_number(const std::string& flag, const std::string& value) {
  const char* c = value.c_str();
  char* end = nullptr;
  double x = std::strtod(c, &end);
  if (end == c || *end != '\0' || !std::isfinite(x))
    throw ConfigInvalid(flag + " = '" + value + "' is not a finite number");
  return x;
}

int arg_int(const std::string& flag, const std::string& value) {
  const char* c = value.c_str();
  char* end = nullptr;
  long x = std::strtol(c, &end, 10);
  if (end == c || *end != '\0')
    throw ConfigInvalid(flag + " = '" + value + "' is not an integer");
  return static_cast<int>(x);
}

std::uint64_t arg_seed(const std::string& value) {
  if (!value.empty() && value[0] == '-')
    throw ConfigInvalid("--seed must be a non-negative integer");
  const char* c = value.c_str();
  char* end = nullptr;
  unsigned long long x = std::strtoull(c, &end, 10);
  if (end == c || *end != '\0')
    throw ConfigInvalid("--seed = '" + value + "' is not an integer");
  return static_cast<std::uint64_t>(x);
}

std::vector<double> arg_number_list(const std::string& flag, const std::string& value) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= value.size()) {
    std::size_t comma = value.find(',', pos);
    std::string tok = comma == std::string::npos ? value.substr(pos)
                                                 : value.substr(pos, comma - pos);
    if (tok.empty()) throw ConfigInvalid(flag + " has an empty list entry");
    out.push_back(arg_number(flag, tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// config from --config plus the common overrides; callers adjust and validate
RunConfig make_config(const Flags& f) {
  RunConfig cfg;
  if (f.has("--config")) cfg = parse_config_text(read_text_file(f.one("--config")));
  if (f.has("--out")) cfg.out_dir = f.one("--out");
  if (f.has("--seed")) cfg.seed = arg_seed(f.one("--seed"));
  if (f.has("--t")) {
    cfg.t_list = arg_number_list("--t", f.one("--t"));
    cfg.t_set = true;
  }
  return cfg;
}

// ---------- output helpers ----------

// shortest decimal that round-trips; integral values keep a ".0" tail
std::string jnum(double x) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof(buf), x);
  std::string s(buf, r.ptr);
  if (std::isfinite(x) && s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string seed_line(std::uint64_t seed) {
  return "# seed = " + std::to_string(seed) + "\n";
}

void emit(const RunConfig& cfg, const std::string& name, const std::string& text) {
  write_text_file(cfg.out_dir + "/" + name, text);
}

void emit(const RunConfig& cfg, const std::string& name,
          const std::vector<unsigned char>& bytes) {
  write_binary_file(cfg.out_dir + "/" + name, bytes);
}

// ---------- SVG scatter plots ----------

struct PlotPoint {
  double x = 0.0;
  double y = 0.0;
};

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt4g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// fixed 640x480 log-log (caller passes already-transformed coordinates)
// scatter with an optional least-squares line and a corner annotation
std::string scatter_svg(const std::string& title, const std::string& xlabel,
                        const std::string& ylabel, const std::vector<PlotPoint>& pts,
                        const std::string& note, std::uint64_t seed) {
  const double W = 640.0, H = 480.0, L = 70.0, R = 610.0, T = 50.0, B = 430.0;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const PlotPoint& p : pts) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  if (pts.empty()) xmin = ymin = 0.0, xmax = ymax = 1.0;
  if (xmax - xmin < 1e-12) xmin -= 1.0, xmax += 1.0;
  if (ymax - ymin < 1e-12) ymin -= 1.0, ymax += 1.0;
  double xpad = 0.05 * (xmax - xmin), ypad = 0.08 * (ymax - ymin);
  xmin -= xpad, xmax += xpad, ymin -= ypad, ymax += ypad;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (R - L); };
  auto py = [&](double y) { return B - (y - ymin) / (ymax - ymin) * (B - T); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  s << "<!-- seed = " << seed << " -->\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H
    << "\" fill=\"white\"/>\n";
  s << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << R - L << "\" height=\""
    << B - T << "\" fill=\"none\" stroke=\"black\"/>\n";
  s << "<text x=\"" << (L + R) / 2 << "\" y=\"25\" text-anchor=\"middle\" "
    << "font-family=\"monospace\" font-size=\"15\">" << title << "</text>\n";
  s << "<text x=\"" << (L + R) / 2 << "\" y=\"465\" text-anchor=\"middle\" "
    << "font-family=\"monospace\" font-size=\"13\">" << xlabel << "</text>\n";
  s << "<text x=\"18\" y=\"" << (T + B) / 2 << "\" text-anchor=\"middle\" "
    << "font-family=\"monospace\" font-size=\"13\" transform=\"rotate(-90 18 "
    << (T + B) / 2 << ")\">" << ylabel << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    double fx = xmin + (xmax - xmin) * k / 4.0;
    double fy = ymin + (ymax - ymin) * k / 4.0;
    s << "<line x1=\"" << fmt2(px(fx)) << "\" y1=\"" << B << "\" x2=\"" << fmt2(px(fx))
      << "\" y2=\"" << B + 5 << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << fmt2(px(fx)) << "\" y=\"" << B + 18
      << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">"
      << fmt4g(fx) << "</text>\n";
    s << "<line x1=\"" << L - 5 << "\" y1=\"" << fmt2(py(fy)) << "\" x2=\"" << L
      << "\" y2=\"" << fmt2(py(fy)) << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << L - 8 << "\" y=\"" << fmt2(py(fy) + 4)
      << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" << fmt4g(fy)
      << "</text>\n";
  }
  if (pts.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, m = static_cast<double>(pts.size());
    for (const PlotPoint& p : pts) sx += p.x, sy += p.y, sxx += p.x * p.x, sxy += p.x * p.y;
    double den = m * sxx - sx * sx;
    if (std::abs(den) > 1e-30) {
      double a = (m * sxy - sx * sy) / den;
      double b = (sy - a * sx) / m;
      s << "<line x1=\"" << fmt2(px(xmin)) << "\" y1=\"" << fmt2(py(a * xmin + b))
        << "\" x2=\"" << fmt2(px(xmax)) << "\" y2=\"" << fmt2(py(a * xmax + b))
        << "\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n";
    }
  }
  for (const PlotPoint& p : pts)
    s << "<circle cx=\"" << fmt2(px(p.x)) << "\" cy=\"" << fmt2(py(p.y))
      << "\" r=\"3.5\" fill=\"#d62728\"/>\n";
  s << "<text x=\"" << L + 10 << "\" y=\"" << T + 20
    << "\" font-family=\"monospace\" font-size=\"13\">" << note << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

// ---------- frame parsing ----------

Vec8 parse_vector_token(const std::string& flag, const std::string& tok) {
  std::string t = tok;
  double sign = 1.0;
  if (!t.empty() && t[0] == '-' && t.size() > 1 && t[1] == 'e') {
    sign = -1.0;
    t.erase(0, 1);
  }
  if (!t.empty() && t[0] == 'e' && t.find(':') == std::string::npos) {
    int k = arg_int(flag, t.substr(1));
    if (k < 1 || k > 8)
      throw ConfigInvalid(flag + ": basis vector '" + tok + "' is outside e1..e8");
    return sign * basis8(k - 1);
  }
  std::vector<double> comps;
  std::size_t pos = 0;
  while (pos <= t.size()) {
    std::size_t colon = t.find(':', pos);
    std::string piece = colon == std::string::npos ? t.substr(pos)
                                                   : t.substr(pos, colon - pos);
    comps.push_back(arg_number(flag, piece));
    if (colon == std::string::npos) break;
    pos = colon + 1;
  }
  if (comps.size() != 8)
    throw ConfigInvalid(flag + ": vector '" + tok + "' needs 8 ':'-separated components");
  Vec8 v;
  std::copy(comps.begin(), comps.end(), v.begin());
  return v;
}

OrientedPlane4 parse_frame(const std::string& flag, const std::string& spec) {
  std::vector<std::string> toks;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    std::size_t comma = spec.find(',', pos);
    toks.push_back(comma == std::string::npos ? spec.substr(pos)
                                              : spec.substr(pos, comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (toks.size() != 4)
    throw ConfigInvalid(flag + " needs 4 comma-separated vectors, got " +
                        std::to_string(toks.size()));
  OrientedPlane4 p;
  for (int i = 0; i < 4; ++i)
    p.frame[static_cast<std::size_t>(i)] = parse_vector_token(flag, toks[static_cast<std::size_t>(i)]);
  if (!p.is_orthonormal(1e-9))
    throw ConfigInvalid(flag + ": the 4 vectors are not orthonormal within 1e-9");
  return p;
}

// ---------- worker pool for scale sweeps ----------

int pool_size() {
  const char* e = std::getenv("CAYLEY_FORGE_THREADS");
  if (!e) return 4;
  char* end = nullptr;
  long n = std::strtol(e, &end, 10);
  if (end == e || *end != '\0' || n < 1)
    throw ConfigInvalid(std::string("CAYLEY_FORGE_THREADS = '") + e +
                        "' must be a positive integer");
  return static_cast<int>(n);
}

// runs fn(0..count-1) on the pool; rethrows the lowest-index failure
template <class Fn>
void sweep(int count, Fn&& fn) {
  int nt = std::min(pool_size(), count);
  if (nt <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errs(static_cast<std::size_t>(count));
  std::vector<std::thread> pool;
  for (int w = 0; w < nt; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          errs[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  for (std::thread& th : pool) th.join();
  for (const std::exception_ptr& e : errs)
    if (e) std::rethrow_exception(e);
}

GluedScenario scenario_enum(const RunConfig& cfg) {
  return cfg.scenario == "quadric" ? GluedScenario::Quadric : GluedScenario::ExactCone;
}

// ---------- commands ----------

int cmd_check_plane(const Flags& f) {
  RunConfig cfg = make_config(f);
  cfg.validate();
  if (!f.has("--frame")) throw ConfigInvalid("check-plane requires --frame");
  OrientedPlane4 p = parse_frame("--frame", f.one("--frame"));
  echo_config(cfg);
  double phi = phi0_eval(p);
  double tn = tau_eval(p).norm();
  bool cay = phi >= 1.0 - 1e-9 && tn <= 1e-9;
  std::string json = "{\"phi\": " + jnum(phi) + ", \"tau_norm\": " + jnum(tn) +
                     ", \"cayley\": " + (cay ? "true" : "false") +
                     ", \"seed\": " + std::to_string(cfg.seed) + "}\n";
  emit(cfg, "check_plane.json", json);
  std::fputs(json.c_str(), stdout);
  return 0;
}

int cmd_angle_test(const Flags& f) {
  RunConfig cfg = make_config(f);
  cfg.validate();
  if (!f.has("--frame1") || !f.has("--frame2"))
    throw ConfigInvalid("angle-test requires --frame1 and --frame2");
  OrientedPlane4 p1 = parse_frame("--frame1", f.one("--frame1"));
  OrientedPlane4 p2 = parse_frame("--frame2", f.one("--frame2"));
  echo_config(cfg);
  AngleReport rep = angle_criterion(p1, p2);
  std::ostringstream js;
  js << "{\"angles\": [";
  for (int i = 0; i < 4; ++i)
    js << (i ? ", " : "") << jnum(rep.angles[static_cast<std::size_t>(i)]);
  js << "], \"sum\": " << jnum(rep.sum) << ", \"passes\": " << (rep.passes ? "true" : "false")
     << ", \"intersection_sign\": " << rep.intersection_sign
     << ", \"degenerate\": " << (rep.degenerate ? "true" : "false")
     << ", \"seed\": " << cfg.seed << "}\n";
  emit(cfg, "angle_test.json", js.str());
  std::fputs(js.str().c_str(), stdout);
  return 0;
}

int cmd_critical_rates(const Flags& f) {
  RunConfig cfg = make_config(f);
  cfg.validate();
  double lo = -4.0, hi = 2.0;
  if (f.has("--range")) {
    lo = arg_number("--range", f.vals.at("--range")[0]);
    hi = arg_number("--range", f.vals.at("--range")[1]);
  }
  echo_config(cfg);
  RateTable tb = flat_plane_rate_table(lo, hi);
  std::string csv = seed_line(cfg.seed) + rate_table_to_csv(tb);
  emit(cfg, "critical_rates.csv", csv);
  std::fputs(csv.c_str(), stdout);
  return 0;
}

int cmd_index_change(const Flags& f) {
  RunConfig cfg = make_config(f);
  cfg.validate();
  if (!f.has("--from") || !f.has("--to"))
    throw ConfigInvalid("index-change requires --from and --to");
  double from = arg_number("--from", f.one("--from"));
  double to = arg_number("--to", f.one("--to"));
  double lo = from, hi = to;
  if (f.has("--range")) {
    lo = arg_number("--range", f.vals.at("--range")[0]);
    hi = arg_number("--range", f.vals.at("--range")[1]);
  }
  echo_config(cfg);
  RateTable tb = flat_plane_rate_table(lo, hi);
  int jump = index_change(tb, from, to);
  std::string json = "{\"from\": " + jnum(from) + ", \"to\": " + jnum(to) +
                     ", \"index_change\": " + std::to_string(jump) +
                     ", \"seed\": " + std::to_string(cfg.seed) + "}\n";
  emit(cfg, "index_change.json", json);
  std::printf("%d\n", jump);
  return 0;
}

int cmd_index(const Flags& f) {
  RunConfig cfg = make_config(f);
  cfg.validate();
  for (const char* req : {"--sigma", "--euler", "--self-int", "--dim-s"})
    if (!f.has(req))
      throw ConfigInvalid(std::string("index requires ") + req);
  int sigma = arg_int("--sigma", f.one("--sigma"));
  int euler = arg_int("--euler", f.one("--euler"));
  int self_int = arg_int("--self-int", f.one("--self-int"));
  int dim_s = arg_int("--dim-s", f.one("--dim-s"));
  echo_config(cfg);
  int idx = compact_index_formula(sigma, euler, self_int, dim_s);
  std::string json = "{\"sigma\": " + std::to_string(sigma) +
                     ", \"euler\": " + std::to_string(euler) +
                     ", \"self_int\": " + std::to_string(self_int) +
                     ", \"dim_s\": " + std::to_string(dim_s) +
                     ", \"index\": " + std::to_string(idx) +
                     ", \"seed\": " + std::to_string(cfg.seed) + "}\n";
  emit(cfg, "index.json", json);
  std::printf("%d\n", idx);
  return 0;
}

int cmd_glue(const Flags& f) {
  RunConfig cfg = make_config(f);
  cfg.validate();
  echo_config(cfg);
  int n = static_cast<int>(cfg.t_list.size());
  std::vector<GluedImmersion> runs(static_cast<std::size_t>(n));
  sweep(n, [&](int i) {
    runs[static_cast<std::size_t>(i)] =
        scenario_from_config(cfg, cfg.t_list[static_cast<std::size_t>(i)]);
  });
  std::ostringstream sum;
  sum << "{\"seed\": " << cfg.seed << ", \"runs\": [\n";
  for (int i = 0; i < n; ++i) {
    const GluedImmersion& g = runs[static_cast<std::size_t>(i)];
    MarginScan ms = alpha_cayley_scan(g);
    std::string tag = "glue_" + std::to_string(i);
    std::vector<unsigned char> nodes = glued_node_block(g);
    std::string header = glued_header_json(g);
    while (!header.empty() && header.back() == '\n') header.pop_back();
    std::ostringstream js;
    js << "{\"seed\": " << cfg.seed << ",\n\"t\": "
       << jnum(cfg.t_list[static_cast<std::size_t>(i)]) << ",\n\"min_margin\": "
       << jnum(ms.min_margin) << ",\n\"argmin\": " << ms.argmin << ",\n\"nodes_file\": \""
       << tag << ".bin\",\n\"nodes_fnv1a\": " << fnv1a(nodes.data(), nodes.size())
       << ",\n\"glued\": " << header << "}\n";
    emit(cfg, tag + ".json", js.str());
    emit(cfg, tag + ".bin", nodes);
    if (f.has("--dump-seams"))
      emit(cfg, tag + "_seams.csv", seed_line(cfg.seed) + seam_csv(seam_diagnostics(g)));
    sum << (i ? ",\n" : "") << "{\"t\": " << jnum(cfg.t_list[static_cast<std::size_t>(i)])
        << ", \"nodes\": " << g.node_count() << ", \"min_margin\": " << jnum(ms.min_margin)
        << ", \"header\": \"" << tag << ".json\", \"nodes_file\": \"" << tag << ".bin\"}";
  }
  sum << "\n]}\n";
  emit(cfg, "glue.json", sum.str());
  std::fputs(sum.str().c_str(), stdout);
  return 0;
}

int cmd_alpha_scan(const Flags& f) {
  RunConfig cfg = make_config(f);
  cfg.validate();
  echo_config(cfg);
  int n = static_cast<int>(cfg.t_list.size());
  std::vector<AlphaDecay> rows(static_cast<std::size_t>(n));
  sweep(n, [&](int i) {
    GluedImmersion g = scenario_from_config(cfg, cfg.t_list[static_cast<std::size_t>(i)]);
    rows[static_cast<std::size_t>(i)] = alpha_decay_scan(g, g.data);
  });
  std::string csv = seed_line(cfg.seed) + "t,sup_rho_grad_alpha,normalized,argmax\n";
  std::vector<PlotPoint> pts;
  for (int i = 0; i < n; ++i) {
    const AlphaDecay& a = rows[static_cast<std::size_t>(i)];
    double t = cfg.t_list[static_cast<std::size_t>(i)];
    csv += fmt_double(t) + "," + fmt_double(a.sup_rho_grad_alpha) + "," +
           fmt_double(a.normalized) + "," + std::to_string(a.argmax) + "\n";
    pts.push_back({std::log10(t), std::log10(std::max(a.normalized, 1e-300))});
  }
  emit(cfg, "alpha_scan.csv", csv);
  if (f.has("--svg")) {
    double slope = 0.0;
    if (n >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (const PlotPoint& p : pts) sx += p.x, sy += p.y, sxx += p.x * p.x, sxy += p.x * p.y;
      slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    emit(cfg, "alpha_scan.svg",
         scatter_svg("cutoff decay", "log10 t", "log10 sup rho|grad alpha| |log t|", pts,
                     "fitted slope = " + fmt4g(slope), cfg.seed));
  }
  std::fputs(csv.c_str(), stdout);
  return 0;
}

int cmd_error_scan(const Flags& f) {
  RunConfig cfg = make_config(f);
  // scan defaults: a 5-scale geometric sweep at the finer scan resolution
  if (!cfg.t_set)
    cfg.t_list = {0.08, 0.08 / std::sqrt(2.0), 0.04, 0.04 / std::sqrt(2.0), 0.02};
  if (!cfg.radial_set) cfg.radial_n = 192;
  cfg.validate();
  echo_config(cfg);
  ErrorScanResult r = initial_error_scan(scenario_enum(cfg), cfg.t_list, cfg.nu, cfg.mu,
                                         cfg.delta, cfg.p, cfg.k, cfg.link_res, cfg.radial_n);
  std::string csv = seed_line(cfg.seed) + error_scan_csv(r);
  emit(cfg, "error_scan.csv", csv);
  std::string json = "{\"slope\": " + jnum(r.slope) + ", \"predicted\": " + jnum(r.predicted) +
                     ", \"lambda\": " + jnum(r.lambda) +
                     ", \"delta_cap\": " + jnum(r.delta_cap) +
                     ", \"seed\": " + std::to_string(cfg.seed) + "}\n";
  emit(cfg, "error_scan.json", json);
  if (f.has("--svg")) {
    std::vector<PlotPoint> pts;
    for (std::size_t i = 0; i < r.t_values.size(); ++i)
      pts.push_back({std::log10(r.t_values[i]), std::log10(std::max(r.f_norms[i], 1e-300))});
    emit(cfg, "error_scan.svg",
         scatter_svg("initial defect scaling", "log10 t", "log10 |F(0)|", pts,
                     "fitted slope = " + fmt4g(r.slope) + ", predicted = " +
                         fmt4g(r.predicted),
                     cfg.seed));
  }
  std::fputs(csv.c_str(), stdout);
  return 0;
}

int cmd_iterate(const Flags& f) {
  RunConfig cfg = make_config(f);
  cfg.validate();
  echo_config(cfg);
  std::ostringstream sum;
  sum << "{\"seed\": " << cfg.seed << ", \"runs\": [\n";
  for (std::size_t i = 0; i < cfg.t_list.size(); ++i) {
    double t = cfg.t_list[i];
    IterationParams prm;
    prm.p = cfg.p;
    prm.k = cfg.k;
    prm.delta = cfg.delta;
    if (!f.has("--no-cache")) {
      // the assembled operator depends on the full geometry block
      std::string key = cfg.scenario + "|" + jnum(cfg.eps) + "|" + jnum(t) + "|" +
                        jnum(cfg.nu) + "|" + jnum(cfg.nu_p) + "|" + jnum(cfg.nu_pp) + "|" +
                        jnum(cfg.R0) + "|" + jnum(cfg.r0) + "|" +
                        std::to_string(cfg.link_res) + "|" + std::to_string(cfg.radial_n) +
                        "|" + std::to_string(prm.clamp_layers);
      char hex[24];
      std::snprintf(hex, sizeof(hex), "%016llx",
                    static_cast<unsigned long long>(fnv1a(key)));
      prm.cache_path = cfg.out_dir + "/operator_" + hex + ".bin";
    }
    GluedImmersion g = scenario_from_config(cfg, t);
    IterationResult r = iterate_to_cayley(g, prm);
    std::string tag = "iterate_" + std::to_string(i);
    emit(cfg, tag + ".csv", seed_line(cfg.seed) + iteration_csv(r));
    emit(cfg, tag + "_v.bin", normal_field_block(r.v_final));
    if (f.has("--svg")) {
      std::vector<PlotPoint> pts;
      for (const IterationStep& st : r.history)
        pts.push_back({static_cast<double>(st.iter),
                       std::log10(std::max(st.step_norm, 1e-300))});
      emit(cfg, tag + ".svg",
           scatter_svg("contraction history", "iteration", "log10 step norm", pts,
                       "final |F| / initial |F| = " +
                           fmt4g(r.final_f_norm / std::max(r.initial_f_norm, 1e-300)),
                       cfg.seed));
    }
    sum << (i ? ",\n" : "") << "{\"t\": " << jnum(t)
        << ", \"converged\": " << (r.converged ? "true" : "false")
        << ", \"iterations\": " << r.history.size()
        << ", \"initial_f_norm\": " << jnum(r.initial_f_norm)
        << ", \"final_f_norm\": " << jnum(r.final_f_norm)
        << ", \"initial_margin\": " << jnum(r.initial_margin)
        << ", \"final_margin\": " << jnum(r.final_margin) << ", \"history\": \"" << tag
        << ".csv\", \"v_final\": \"" << tag << "_v.bin\"}";
  }
  sum << "\n]}\n";
  emit(cfg, "iterate.json", sum.str());
  std::fputs(sum.str().c_str(), stdout);
  return 0;
}

int cmd_norms(const Flags& f) {
  RunConfig cfg = make_config(f);
  cfg.validate();
  echo_config(cfg);
  int n = static_cast<int>(cfg.t_list.size());
  NormalField loaded;
  bool has_field = f.has("--field");
  if (has_field) loaded = read_normal_field_block(read_binary_file(f.one("--field")));
  struct Row {
    int nodes = 0;
    double min_margin = 0.0;
    double field_norm = 0.0;
    double defect_norm = 0.0;
  };
  std::vector<Row> rows(static_cast<std::size_t>(n));
  WeightedNormSpec spec_v{cfg.p, cfg.k + 1, cfg.delta};
  WeightedNormSpec spec_f{cfg.p, cfg.k, cfg.delta - 1.0};
  sweep(n, [&](int i) {
    GluedImmersion g = scenario_from_config(cfg, cfg.t_list[static_cast<std::size_t>(i)]);
    NormalField v = has_field
                        ? loaded
                        : NormalField(static_cast<std::size_t>(g.node_count()), Vec4{0, 0, 0, 0});
    Row& row = rows[static_cast<std::size_t>(i)];
    row.nodes = g.node_count();
    row.min_margin = alpha_cayley_scan(g).min_margin;
    row.field_norm = weighted_sobolev_norm(v, g, spec_v);
    row.defect_norm = weighted_sobolev_norm(glued_F(g, v), g, spec_f);
  });
  std::string csv = seed_line(cfg.seed) + "t,nodes,min_margin,field_norm,defect_norm\n";
  std::vector<PlotPoint> pts;
  for (int i = 0; i < n; ++i) {
    const Row& row = rows[static_cast<std::size_t>(i)];
    double t = cfg.t_list[static_cast<std::size_t>(i)];
    csv += fmt_double(t) + "," + std::to_string(row.nodes) + "," +
           fmt_double(row.min_margin) + "," + fmt_double(row.field_norm) + "," +
           fmt_double(row.defect_norm) + "\n";
    pts.push_back({std::log10(t), std::log10(std::max(row.defect_norm, 1e-300))});
  }
  emit(cfg, "norms.csv", csv);
  if (f.has("--svg")) {
    double slope = 0.0;
    if (n >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (const PlotPoint& p : pts) sx += p.x, sy += p.y, sxx += p.x * p.x, sxy += p.x * p.y;
      slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    emit(cfg, "norms.svg",
         scatter_svg("defect norm across scales", "log10 t", "log10 |F(v)|", pts,
                     "fitted slope = " + fmt4g(slope), cfg.seed));
  }
  std::fputs(csv.c_str(), stdout);
  return 0;
}

const std::set<std::string> kCommon = {"--config", "--out", "--seed"};

std::set<std::string> with_common(std::initializer_list<const char*> extra) {
  std::set<std::string> s = kCommon;
  for (const char* e : extra) s.insert(e);
  return s;
}

int dispatch(int argc, char** argv) {
  if (argc < 2 || std::strcmp(argv[1], "--help") == 0 || std::strcmp(argv[1], "-h") == 0) {
    std::fputs(kUsage, stdout);
    return 0;
  }
  std::string cmd = argv[1];
  if (cmd == "check-plane")
    return cmd_check_plane(parse_flags(argc, argv, with_common({"--frame"}), cmd));
  if (cmd == "angle-test")
    return cmd_angle_test(parse_flags(argc, argv, with_common({"--frame1", "--frame2"}), cmd));
  if (cmd == "critical-rates")
    return cmd_critical_rates(parse_flags(argc, argv, with_common({"--range"}), cmd));
  if (cmd == "index-change")
    return cmd_index_change(
        parse_flags(argc, argv, with_common({"--from", "--to", "--range"}), cmd));
  if (cmd == "index")
    return cmd_index(parse_flags(
        argc, argv, with_common({"--sigma", "--euler", "--self-int", "--dim-s"}), cmd));
  if (cmd == "glue")
    return cmd_glue(parse_flags(argc, argv, with_common({"--t", "--dump-seams"}), cmd));
  if (cmd == "alpha-scan")
    return cmd_alpha_scan(parse_flags(argc, argv, with_common({"--t", "--svg"}), cmd));
  if (cmd == "error-scan")
    return cmd_error_scan(parse_flags(argc, argv, with_common({"--t", "--svg"}), cmd));
  if (cmd == "iterate")
    return cmd_iterate(
        parse_flags(argc, argv, with_common({"--t", "--svg", "--no-cache"}), cmd));
  if (cmd == "norms")
    return cmd_norms(parse_flags(argc, argv, with_common({"--t", "--svg", "--field"}), cmd));
  throw UnknownCommand("'" + cmd +
                       "'; available: check-plane, angle-test, critical-rates, "
                       "index-change, index, glue, alpha-scan, error-scan, iterate, norms");
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
}
