#pragma once

// Command-line front end. Every subcommand resolves its configuration from
// defaults, an optional JSON document (--config) and flags (flags win), echoes
// the resolved values as "# " header lines, and writes its primary output.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sphereshrink/sphereshrink.hpp"

namespace sphereshrink::cli {

using json = nlohmann::ordered_json;

enum ExitCode { kOk = 0, kNumeric = 1, kConfig = 2, kStrict = 3 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Kind { integer, real, boolean, text, real_or_auto, real_list, matrix_or_diag };

struct Param {
  std::string name;
  Kind kind;
  json fallback;
  std::string help;
};

// ---------------------------------------------------------------------------
// Parameter tables

inline const std::vector<Param>& all_params() {
  static const std::vector<Param> params{
      {"family", Kind::text, "gaussian", "gaussian | polyexp | mixdiff | tabulated"},
      {"p", Kind::integer, 5, "dimension"},
      {"scale", Kind::real, 1.0, "radial scale sigma"},
      {"alpha", Kind::real, 2.0, "polyexp alpha; Gegenbauer alpha for verify"},
      {"beta", Kind::real, 0.5, "polyexp beta"},
      {"a", Kind::real, 0.5, "mixdiff a; Gegenbauer a for verify"},
      {"b", Kind::real, 0.5, "mixdiff b"},
      {"table", Kind::text, "", "CSV file of (r, f) rows for the tabulated family"},
      {"prior", Kind::text, "harmonic", "harmonic | power | flat | log_thickened"},
      {"prior_k", Kind::real, 0.0, "power prior exponent"},
      {"prior_n", Kind::integer, 1, "log_thickened depth"},
      {"prior_c", Kind::real, 2.0, "log_thickened offset"},
      {"prior_top", Kind::real, 1.0, "power of the last log factor"},
      {"gamma", Kind::real_or_auto, "auto", "H_1 exponent, or auto"},
      {"kernel_n", Kind::integer, 1, "beta kernel log depth"},
      {"kernel_c", Kind::real_or_auto, "auto", "beta kernel offset, auto = e-tower"},
      {"r_min", Kind::real, 0.0, "phi output grid start (0: 0.01 scale)"},
      {"r_max", Kind::real, 0.0, "phi output grid end (0: profile range)"},
      {"points", Kind::integer, 200, "phi output points"},
      {"interp_tol", Kind::real, 1e-6, "phi profile interpolation tolerance"},
      {"format", Kind::text, "text", "text | json (csv commands ignore it)"},
      {"estimator", Kind::text, "harmonic", "identity | harmonic | gb | constant"},
      {"constant", Kind::real, 1.0, "multiplier for the constant estimator"},
      {"theta", Kind::text, "0:10:1", "theta norms, start:stop:step or comma list"},
      {"n", Kind::integer, 200000, "samples per theta"},
      {"seed", Kind::integer, 42, "random seed"},
      {"paired", Kind::boolean, true, "common random numbers"},
      {"loss_q", Kind::matrix_or_diag, nullptr, "loss matrix (JSON) or diagonal list"},
      {"direction", Kind::real_list, nullptr, "theta direction, default e1"},
      {"i_list", Kind::text, "1,10,100", "H-sequence indices"},
      {"eps", Kind::real, 0.1, "slope band epsilon"},
      {"eta_scale", Kind::real, 1e6, "eta for the T/beta H_i ~ i check"},
      {"blyth_i", Kind::text, "1,4,16,64", "Blyth indices"},
      {"identity", Kind::text, "all", "gegenbauer | min_power | kernel_mass | all"},
      {"t", Kind::real, 2.0, "min_power argument"},
      {"tol", Kind::real, 1e-8, "identity tolerance"},
      {"r_list", Kind::text, "10,100,1000", "probe radii"},
      {"strict", Kind::boolean, false, "exit 3 on verdict-level failure"},
  };
  return params;
}

inline const Param& param(const std::string& name) {
  for (const auto& p : all_params()) {
    if (p.name == name) return p;
  }
  throw std::logic_error("unknown parameter " + name);
}

inline std::vector<std::string> keys_for(const std::string& cmd) {
  const std::vector<std::string> model{"family", "p", "scale", "alpha", "beta", "a", "b", "table"};
  const std::vector<std::string> shape{"prior", "prior_k", "prior_n", "prior_c", "prior_top"};
  std::vector<std::string> prior = shape;
  prior.push_back("gamma");
  const std::vector<std::string> kernel{"kernel_n", "kernel_c"};
  auto cat = [](std::initializer_list<std::vector<std::string>> parts) {
    std::vector<std::string> out;
    for (const auto& part : parts) out.insert(out.end(), part.begin(), part.end());
    out.push_back("strict");
    return out;
  };
  if (cmd == "model-info") return cat({model, {"format"}});
  if (cmd == "phi") return cat({model, {"r_min", "r_max", "points", "interp_tol"}});
  if (cmd == "check") return cat({model, {"format"}});
  if (cmd == "risk") {
    return cat({model, shape, {"estimator", "constant", "theta", "n", "seed", "paired", "loss_q", "direction"}});
  }
  if (cmd == "hseq") return cat({kernel, {"i_list", "eps", "eta_scale", "format"}});
  if (cmd == "prior") return cat({model, prior, kernel, {"blyth_i", "format"}});
  if (cmd == "verify") return cat({model, {"identity", "t", "tol"}});
  if (cmd == "probe") return cat({model, shape, {"r_list"}});
  throw std::logic_error("unknown subcommand " + cmd);
}

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> cmds{"model-info", "phi", "check", "risk", "hseq", "prior", "verify", "probe"};
  return cmds;
}

inline std::string describe(const std::string& cmd) {
  static const std::map<std::string, std::string> text{
      {"model-info", "normalising constant, moments, tail profile and monotonicity verdicts"},
      {"phi", "CSV of phi*(r) and the shrinkage multiplier"},
      {"check", "minimaxity condition table"},
      {"risk", "Monte Carlo risk curve against the identity estimator"},
      {"hseq", "property audit of the H_i approximation sequence"},
      {"prior", "prior audit, classification, Blyth and Brown diagnostics"},
      {"verify", "closed-form integral identity checks"},
      {"probe", "asymptotic ratios m/g and M/g along r"},
  };
  return text.at(cmd);
}

// ---------------------------------------------------------------------------
// Value parsing

inline std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + item + "'");
    }
    if (used != item.size()) throw ConfigError("not a number: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

// start:stop:step (inclusive) or a comma list
inline std::vector<double> parse_range(const std::string& text) {
  if (text.find(':') == std::string::npos) return parse_list(text);
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(parse_list(item).front());
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
    throw ConfigError("range must be start:stop:step with step > 0 and stop >= start");
  }
  std::vector<double> out;
  const auto count = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  for (long j = 0; j <= count; ++j) out.push_back(parts[0] + static_cast<double>(j) * parts[2]);
  return out;
}

inline json parse_flag(const Param& p, const std::string& text) {
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw ConfigError("--" + p.name + ": expected a number, got '" + s + "'");
    }
    if (used != s.size()) throw ConfigError("--" + p.name + ": expected a number, got '" + s + "'");
    return v;
  };
  switch (p.kind) {
    case Kind::integer: {
      const double v = number(text);
      if (v != std::floor(v)) throw ConfigError("--" + p.name + ": expected an integer");
      return static_cast<long long>(v);
    }
    case Kind::real: return number(text);
    case Kind::boolean:
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw ConfigError("--" + p.name + ": expected true or false");
    case Kind::text: return text;
    case Kind::real_or_auto: return text == "auto" ? json("auto") : json(number(text));
    case Kind::real_list:
    case Kind::matrix_or_diag: return parse_list(text);
  }
  return text;
}

// Type check of a value coming from the JSON document.
inline json check_json(const Param& p, const json& v) {
  const auto bad = [&] { return ConfigError("config key '" + p.name + "' has the wrong type"); };
  switch (p.kind) {
    case Kind::integer:
      if (!v.is_number_integer()) throw bad();
      return v;
    case Kind::real:
      if (!v.is_number()) throw bad();
      return v.get<double>();
    case Kind::boolean:
      if (!v.is_boolean()) throw bad();
      return v;
    case Kind::text:
      if (!v.is_string()) throw bad();
      return v;
    case Kind::real_or_auto:
      if (v.is_number()) return v.get<double>();
      if (v.is_string() && v.get<std::string>() == "auto") return v;
      throw bad();
    case Kind::real_list:
      if (v.is_null()) return v;
      if (!v.is_array()) throw bad();
      for (const auto& e : v) {
        if (!e.is_number()) throw bad();
      }
      return v;
    case Kind::matrix_or_diag:
      if (v.is_null()) return v;
      if (!v.is_array()) throw bad();
      for (const auto& e : v) {
        if (e.is_array()) {
          for (const auto& x : e) {
            if (!x.is_number()) throw bad();
          }
        } else if (!e.is_number()) {
          throw bad();
        }
      }
      return v;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Resolved configuration

class RunConfig {
 public:
  RunConfig(std::string command, json values) : command_(std::move(command)), values_(std::move(values)) {}

  [[nodiscard]] const std::string& command() const { return command_; }
  [[nodiscard]] const json& values() const { return values_; }
  [[nodiscard]] bool has(const std::string& key) const { return values_.contains(key); }
  [[nodiscard]] double real(const std::string& key) const { return values_.at(key).get<double>(); }
  [[nodiscard]] long long integer(const std::string& key) const { return values_.at(key).get<long long>(); }
  [[nodiscard]] bool boolean(const std::string& key) const { return values_.at(key).get<bool>(); }
  [[nodiscard]] std::string text(const std::string& key) const { return values_.at(key).get<std::string>(); }
  [[nodiscard]] std::optional<double> real_or_auto(const std::string& key) const {
    const auto& v = values_.at(key);
    if (v.is_string()) return std::nullopt;
    return v.get<double>();
  }

  void echo(std::ostream& out) const {
    out << "# sphereshrink " << command_ << "\n";
    for (const auto& [k, v] : values_.items()) out << "# " << k << " = " << v.dump() << "\n";
  }

 private:
  std::string command_;
  json values_;
};

inline RunConfig resolve(const std::string& command, const std::optional<std::string>& config_path,
                         const std::map<std::string, std::string>& flags) {
  const auto keys = keys_for(command);
  json values = json::object();
  for (const auto& k : keys) values[k] = param(k).fallback;
  if (config_path) {
    std::ifstream in(*config_path);
    if (!in) throw ConfigError("cannot open config file " + *config_path);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [k, v] : doc.items()) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
        throw ConfigError("unknown config key '" + k + "' for " + command);
      }
      values[k] = check_json(param(k), v);
    }
  }
  for (const auto& [k, text] : flags) values[k] = parse_flag(param(k), text);
  return RunConfig(command, std::move(values));
}

// ---------------------------------------------------------------------------
// Builders

inline Tabulated read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open table " + path);
  Tabulated t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double r = 0.0, f = 0.0;
    if (!(row >> r >> f)) continue;  // header row
    t.r.push_back(r);
    t.f.push_back(f);
  }
  return t;
}

inline FamilyParams family_from(const RunConfig& cfg) {
  const std::string fam = cfg.text("family");
  if (fam == "gaussian") return Gaussian{};
  if (fam == "polyexp" || fam == "poly_exp") return PolyExp{cfg.real("alpha"), cfg.real("beta")};
  if (fam == "mixdiff" || fam == "mixture_diff") return MixtureDiff{cfg.real("a"), cfg.real("b")};
  if (fam == "tabulated") {
    if (cfg.text("table").empty()) throw ConfigError("tabulated family needs --table");
    return read_table(cfg.text("table"));
  }
  throw ConfigError("unknown family '" + fam + "' (expected gaussian, polyexp, mixdiff or tabulated)");
}

inline int dimension_from(const RunConfig& cfg) {
  const long long p = cfg.integer("p");
  if (p < 3 || p > 1000) throw ConfigError("p must be between 3 and 1000");
  return static_cast<int>(p);
}

inline RadialDensity model_from(const RunConfig& cfg) {
  try {
    return RadialDensity::normalize(family_from(cfg), dimension_from(cfg), cfg.real("scale"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline BetaKernel kernel_from(const RunConfig& cfg) {
  const long long n = cfg.integer("kernel_n");
  if (n < 1 || n > 4) throw ConfigError("kernel_n must be between 1 and 4");
  const auto c = cfg.real_or_auto("kernel_c");
  try {
    return c ? BetaKernel(LogTower{static_cast<int>(n), *c}) : BetaKernel::standard(static_cast<int>(n));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline RadialPrior prior_from(const RunConfig& cfg, int p) {
  const std::string kind = cfg.text("prior");
  try {
    if (kind == "harmonic") return RadialPrior::harmonic(p);
    if (kind == "power") return RadialPrior::power(cfg.real("prior_k"), p);
    if (kind == "flat") return RadialPrior::flat(p);
    if (kind == "log_thickened") {
      return RadialPrior::log_thickened(static_cast<int>(cfg.integer("prior_n")), cfg.real("prior_c"), p,
                                        cfg.real("prior_top"));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown prior '" + kind + "' (expected harmonic, power, flat or log_thickened)");
}

// Applies the configured gamma, or the smallest passing one when "auto".
inline RadialPrior with_resolved_gamma(const RadialPrior& prior, const RunConfig& cfg, const BetaKernel& kernel,
                                       std::optional<double>& chosen) {
  if (auto g = cfg.real_or_auto("gamma")) {
    if (!(*g > 0.0) || *g > 2.0) throw ConfigError("gamma must be in (0, 2]");
    chosen = *g;
  } else {
    chosen = default_gamma(prior, kernel);
  }
  RadialPrior out = prior;
  if (chosen) out.with_gamma(*chosen);
  return out;
}

// ---------------------------------------------------------------------------
// Output helpers

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline json jnum(double v) {
  if (std::isfinite(v)) return v;
  return num(v);
}

// "key: value" lines for a flat or nested JSON report.
inline void write_text(std::ostream& out, const json& report, const std::string& prefix = "") {
  for (const auto& [k, v] : report.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      write_text(out, v, key);
    } else if (v.is_array() && !v.empty() && v.front().is_object()) {
      for (std::size_t j = 0; j < v.size(); ++j) write_text(out, v[j], key + "[" + std::to_string(j) + "]");
    } else if (v.is_number_float()) {
      out << key << ": " << num(v.get<double>()) << "\n";
    } else if (v.is_string()) {
      out << key << ": " << v.get<std::string>() << "\n";
    } else {
      out << key << ": " << v.dump() << "\n";
    }
  }
}

inline void write_report(std::ostream& out, const RunConfig& cfg, const json& report) {
  if (cfg.has("format") && cfg.text("format") == "json") {
    out << report.dump(2) << "\n";
  } else {
    write_text(out, report);
  }
}

// Static single-series line chart.
inline void write_svg(const std::string& path, const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const std::vector<double>& xs, const std::vector<double>& ys) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  const double w = 640, h = 420, ml = 70, mr = 20, mt = 40, mb = 50;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t j = 0; j < xs.size() && j < ys.size(); ++j) {
    if (std::isfinite(xs[j]) && std::isfinite(ys[j])) pts.emplace_back(xs[j], ys[j]);
  }
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!pts.empty()) {
    x0 = x1 = pts.front().first;
    y0 = y1 = pts.front().second;
    for (const auto& [x, y] : pts) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto sx = [&](double x) { return ml + (x - x0) / (x1 - x0) * (w - ml - mr); };
  auto sy = [&](double y) { return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb); };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\"" << h - mb
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << ml << "\" y=\"" << h - mb + 18 << "\" font-size=\"11\">" << num(x0) << "</text>\n";
  out << "<text x=\"" << w - mr << "\" y=\"" << h - mb + 18 << "\" text-anchor=\"end\" font-size=\"11\">" << num(x1)
      << "</text>\n";
  out << "<text x=\"" << ml - 6 << "\" y=\"" << h - mb << "\" text-anchor=\"end\" font-size=\"11\">" << num(y0)
      << "</text>\n";
  out << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 10 << "\" text-anchor=\"end\" font-size=\"11\">" << num(y1)
      << "</text>\n";
  out << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\" font-size=\"13\">"
      << xlabel << "</text>\n";
  out << "<text x=\"16\" y=\"" << (mt + h - mb) / 2 << "\" font-size=\"13\" transform=\"rotate(-90 16 "
      << (mt + h - mb) / 2 << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
  out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (const auto& [x, y] : pts) out << num(sx(x)) << "," << num(sy(y)) << " ";
  out << "\"/>\n</svg>\n";
}

struct Outputs {
  std::ostream* out = &std::cout;
  std::optional<std::string> svg;
  int threads = 1;
};

// ---------------------------------------------------------------------------
// Subcommands; each returns an exit code.

inline json monotonicity_json(const MonotonicityVerdict& v) {
  return {{"property", to_string(v.property)},
          {"verdict", v.describe()},
          {"max_violation", jnum(v.max_violation)},
          {"tol", v.tol},
          {"closed_form", v.closed_form},
          {"grid_points", v.grid.size()},
          {"grid_min", jnum(v.grid.front())},
          {"grid_max", jnum(v.grid.back())}};
}

inline int cmd_model_info(const RunConfig& cfg, const Outputs& io) {
  const auto model = model_from(cfg);
  const int p = model.dimension();
  json report;
  report["model"] = model.id();
  report["p"] = p;
  report["norm_const"] = jnum(model.norm_const());
  report["second_moment"] = model.moment_converges(2.0) ? jnum(model.moment(2.0)) : json("divergent");
  report["inverse_second_moment"] = model.moment_converges(-2.0) ? jnum(model.moment(-2.0)) : json("divergent");
  report["c_f"] = jnum(c_f(model));
  report["inf_f_ratio"] = jnum(inf_ratio(model));
  report["phi_limit"] = model.moment_converges(2.0) ? jnum(phi_limit(model)) : json("undefined");
  report["r_max"] = jnum(r_max(model));
  const auto tp = model.tail_profile();
  report["tail"] = {{"r0", jnum(tp.r0)}, {"L", jnum(tp.L)}, {"s", jnum(tp.s)}, {"capped", tp.capped}};
  json mono = json::array();
  for (auto prop : {MonotoneProperty::f_nonincreasing, MonotoneProperty::F_over_f_nondecreasing,
                    MonotoneProperty::F_over_t2f_nonincreasing}) {
    mono.push_back(monotonicity_json(probe_monotone(model, prop)));
  }
  report["monotonicity"] = mono;
  cfg.echo(*io.out);
  write_report(*io.out, cfg, report);
  return kOk;
}

inline int cmd_phi(const RunConfig& cfg, const Outputs& io) {
  const auto model = model_from(cfg);
  ProfileOptions opts;
  opts.interp_tol = cfg.real("interp_tol");
  const auto profile = ShrinkageProfile::build(model, opts);
  const double lo = cfg.real("r_min") > 0.0 ? cfg.real("r_min") : 1e-2 * model.scale();
  const double hi = cfg.real("r_max") > 0.0 ? cfg.real("r_max") : profile.r_grid().back();
  const long long points = cfg.integer("points");
  if (points < 2) throw ConfigError("points must be at least 2");
  if (!(hi > lo)) throw ConfigError("r_max must exceed r_min");
  cfg.echo(*io.out);
  *io.out << "# interpolation_error = " << num(profile.interpolation_error()) << "\n";
  *io.out << "r,phi_star,multiplier,limit_value\n";
  std::vector<double> xs, ys;
  for (long long j = 0; j < points; ++j) {
    const double r = lo * std::pow(hi / lo, static_cast<double>(j) / static_cast<double>(points - 1));
    const double phi = profile.phi(r);
    *io.out << num(r) << "," << num(phi) << "," << num(profile.multiplier(r)) << "," << num(profile.limit_value())
            << "\n";
    xs.push_back(r);
    ys.push_back(phi);
  }
  if (io.svg) write_svg(*io.svg, "phi*(r) " + model.id(), "r", "phi*", xs, ys);
  const bool ok = profile.interpolation_error() <= opts.interp_tol;
  return (!ok && cfg.boolean("strict")) ? kStrict : kOk;
}

inline json minimax_json(const MinimaxReport& rep) {
  json conds = json::array();
  for (const auto& c : rep.conditions) {
    json hyps = json::array();
    for (const auto& h : c.hypotheses) hyps.push_back({{"name", h.name}, {"holds", h.holds}, {"detail", h.detail}});
    conds.push_back({{"id", to_string(c.id)},
                     {"condition", condition_label(c.id)},
                     {"applicable", c.applicable},
                     {"inapplicable_reason", c.inapplicable_reason},
                     {"hypotheses", hyps},
                     {"bound", jnum(c.bound)},
                     {"phi_limit", jnum(c.phi_limit)},
                     {"satisfied", c.satisfied}});
  }
  json mono = json::array();
  for (const auto& m : rep.monotonicity) mono.push_back(monotonicity_json(m));
  return {{"model", rep.model_id},
          {"p", rep.p},
          {"second_moment", jnum(rep.second_moment)},
          {"inverse_second_moment", jnum(rep.inverse_moment)},
          {"inf_f_ratio", jnum(rep.inf_f_ratio)},
          {"phi_limit", jnum(rep.phi_limit)},
          {"monotonicity", mono},
          {"conditions", conds},
          {"overall", to_string(rep.overall)}};
}

inline void write_minimax_table(std::ostream& out, const MinimaxReport& rep) {
  out << "model: " << rep.model_id << "  p = " << rep.p << "\n";
  out << "E|X|^2 = " << num(rep.second_moment) << "  E|X|^-2 = " << num(rep.inverse_moment)
      << "  inf F/f = " << num(rep.inf_f_ratio) << "  phi limit = " << num(rep.phi_limit) << "\n";
  for (const auto& m : rep.monotonicity) out << "  " << to_string(m.property) << ": " << m.describe() << "\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-26s %-11s %-14s %-14s %s\n", "condition", "applicable", "bound", "phi_limit",
                "satisfied");
  out << line;
  for (const auto& c : rep.conditions) {
    std::snprintf(line, sizeof line, "%-26s %-11s %-14s %-14s %s\n", to_string(c.id), c.applicable ? "yes" : "no",
                  num(c.bound).c_str(), num(c.phi_limit).c_str(), c.satisfied ? "yes" : "no");
    out << line;
  }
  out << "overall: " << to_string(rep.overall);
  if (rep.overall == Overall::not_certified) out << " (no sufficient condition met)";
  out << "\n";
}

inline int cmd_check(const RunConfig& cfg, const Outputs& io) {
  const auto model = model_from(cfg);
  const auto rep = evaluate_conditions(model);
  cfg.echo(*io.out);
  if (cfg.text("format") == "json") {
    *io.out << minimax_json(rep).dump(2) << "\n";
  } else {
    write_minimax_table(*io.out, rep);
  }
  return (rep.overall != Overall::minimax_certified && cfg.boolean("strict")) ? kStrict : kOk;
}

inline std::optional<Eigen::MatrixXd> loss_from(const RunConfig& cfg, int p) {
  const auto& v = cfg.values().at("loss_q");
  if (v.is_null()) return std::nullopt;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(p, p);
  if (!v.empty() && v.front().is_array()) {
    if (static_cast<int>(v.size()) != p) throw ConfigError("loss_q must be p x p");
    for (int i = 0; i < p; ++i) {
      if (static_cast<int>(v[i].size()) != p) throw ConfigError("loss_q must be p x p");
      for (int j = 0; j < p; ++j) q(i, j) = v[i][j].get<double>();
    }
  } else {
    if (static_cast<int>(v.size()) != p) throw ConfigError("diagonal loss_q must have p entries");
    for (int i = 0; i < p; ++i) q(i, i) = v[i].get<double>();
  }
  return q;
}

inline int cmd_risk(const RunConfig& cfg, const Outputs& io) {
  const auto model = model_from(cfg);
  const int p = model.dimension();
  RiskConfig rc;
  const long long n = cfg.integer("n");
  if (n < 1 || n > 2000000000LL) throw ConfigError("n must be a positive sample count");
  rc.samples = static_cast<int>(n);
  if (cfg.integer("seed") < 0) throw ConfigError("seed must be nonnegative");
  rc.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  rc.theta_norms = parse_range(cfg.text("theta"));
  for (double t : rc.theta_norms) {
    if (!(t >= 0.0)) throw ConfigError("theta norms must be nonnegative");
  }
  rc.paired = cfg.boolean("paired");
  rc.loss_q = loss_from(cfg, p);
  if (!cfg.values().at("direction").is_null()) rc.direction = cfg.values().at("direction").get<std::vector<double>>();
  rc.threads = io.threads;

  RadialEstimator est;
  const std::string kind = cfg.text("estimator");
  if (kind == "identity") {
    est = RadialEstimator::identity();
  } else if (kind == "harmonic") {
    est = RadialEstimator::harmonic(model);
  } else if (kind == "gb") {
    const auto prior = prior_from(cfg, p);
    const double theta_max = *std::max_element(rc.theta_norms.begin(), rc.theta_norms.end());
    est = RadialEstimator::generalized_bayes(prior, model, theta_max + 2.0 * r_max(model));
  } else if (kind == "constant") {
    est = RadialEstimator::constant(cfg.real("constant"));
  } else {
    throw ConfigError("unknown estimator '" + kind + "' (expected identity, harmonic, gb or constant)");
  }
  std::optional<RiskCurve> curve;
  try {
    curve = estimate_risk(model, est, rc);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  cfg.echo(*io.out);
  if (curve->direction_specific) *io.out << "# note = risk is direction-specific for a non-scalar loss matrix\n";
  *io.out << "theta_norm,risk,se,baseline,diff,diff_se,verdict\n";
  std::vector<double> xs, ys;
  for (const auto& e : curve->entries) {
    *io.out << num(e.theta_norm) << "," << num(e.risk) << "," << num(e.std_error) << "," << num(e.baseline) << ","
            << num(e.diff) << "," << num(e.diff_std_error) << "," << to_string(row_verdict(e)) << "\n";
    xs.push_back(e.theta_norm);
    ys.push_back(e.risk);
  }
  bool dominates = false;
  if (curve->paired) {
    const auto dom = dominance_report(*curve);
    dominates = dom.verdict == DominanceKind::dominates;
    *io.out << "# dominance = " << dom.describe() << "\n";
  }
  if (io.svg) write_svg(*io.svg, "risk " + est.label + " " + model.id(), "|theta|", "risk", xs, ys);
  return (!dominates && cfg.boolean("strict")) ? kStrict : kOk;
}

inline int cmd_hseq(const RunConfig& cfg, const Outputs& io) {
  const auto kernel = kernel_from(cfg);
  const auto i_list = parse_list(cfg.text("i_list"));
  for (double i : i_list) {
    if (!(i > 0.0)) throw ConfigError("H-sequence indices must be positive");
  }
  const auto audit = audit_h_sequence(kernel, i_list, {}, cfg.real("eps"), cfg.real("eta_scale"));
  json report{{"kernel_n", kernel.tower().n},
              {"kernel_c", jnum(kernel.tower().c)},
              {"i_list", i_list},
              {"monotone_in_i", audit.monotone_in_i},
              {"limit_in_i", audit.limit_in_i},
              {"scaling_law", audit.scaling_law},
              {"scaling_worst", jnum(audit.scaling_worst)},
              {"eta_scale", jnum(audit.eta_scale)},
              {"derivative_vanishes", audit.derivative_vanishes},
              {"vanish_worst", jnum(audit.vanish_worst)},
              {"derivative_bound", audit.derivative_bound},
              {"bound_worst", jnum(audit.bound_worst)},
              {"slope_band", audit.slope_band},
              {"eta0", audit.eta0 ? jnum(*audit.eta0) : json("none")},
              {"slope_min", jnum(audit.slope_min)},
              {"slope_max", jnum(audit.slope_max)},
              {"all_pass", audit.all()}};
  cfg.echo(*io.out);
  write_report(*io.out, cfg, report);
  return (!audit.all() && cfg.boolean("strict")) ? kStrict : kOk;
}

inline json divergence_json(const DivergenceReport& r) {
  return {{"verdict", to_string(r.verdict)}, {"partial_value", jnum(r.value)}, {"blocks", r.increments.size()}};
}

inline int cmd_prior(const RunConfig& cfg, const Outputs& io) {
  const auto model = model_from(cfg);
  const int p = model.dimension();
  const auto kernel = kernel_from(cfg);
  std::optional<double> gamma;
  const auto prior = with_resolved_gamma(prior_from(cfg, p), cfg, kernel, gamma);
  const auto audit = prior_assumption_audit(prior);
  const auto& pr = audit.profile;
  const auto cls = classify_prior(prior, model);
  json report;
  report["prior"] = prior.id();
  report["p"] = p;
  report["gamma"] = gamma ? jnum(*gamma) : json("none passes");
  report["assumptions"] = {{"t0", jnum(pr.t0)}, {"t1", jnum(pr.t1)}, {"t2", jnum(pr.t2)}, {"t3", jnum(pr.t3)},
                           {"t4", jnum(pr.t4)}, {"r1", jnum(pr.r1)}, {"t0_passes", audit.t0_passes}};
  report["properness"] = divergence_json(properness_index(prior, kernel, gamma.value_or(prior.gamma())));
  report["brown"] = divergence_json(brown_diagnostic(prior));
  json c{{"verdict", to_string(cls.verdict)},
         {"rv_index", jnum(cls.rv_index)},
         {"tail_s", jnum(cls.tail_s)},
         {"fg1", cls.fg1},
         {"reason", cls.reason}};
  if (cls.boundary) {
    c["boundary_max_ratio"] = jnum(cls.boundary->max_ratio);
    c["boundary_top_slope"] = jnum(cls.boundary->top_slope);
    c["boundary_verified"] = cls.boundary->verified;
  }
  report["classification"] = c;
  const auto i_list = parse_list(cfg.text("blyth_i"));
  const auto blyth = blyth_decay(prior, kernel, i_list, gamma.value_or(prior.gamma()));
  json entries = json::array();
  for (const auto& e : blyth.entries) entries.push_back({{"i", jnum(e.i)}, {"J", jnum(e.J)}});
  report["blyth"] = {{"entries", entries},
                     {"strictly_decreasing", blyth.strictly_decreasing},
                     {"last_over_first", jnum(blyth.last_over_first)}};
  cfg.echo(*io.out);
  write_report(*io.out, cfg, report);
  return (cls.verdict == PriorClass::uncertified && cfg.boolean("strict")) ? kStrict : kOk;
}

inline int cmd_verify(const RunConfig& cfg, const Outputs& io) {
  const std::string which = cfg.text("identity");
  const double tol = cfg.real("tol");
  std::vector<IdentityCheck> checks;
  std::vector<double> tols;
  auto add = [&](IdentityCheck c, double t) {
    checks.push_back(std::move(c));
    tols.push_back(t);
  };
  auto domain = [](auto&& fn) {
    try {
      return fn();
    } catch (const NumericError& e) {
      if (e.kind() == NumericErrorKind::domain) throw ConfigError(e.what());
      throw;
    }
  };
  if (which == "gegenbauer") {
    add(domain([&] { return gegenbauer_identity(cfg.real("alpha"), cfg.real("a")); }), tol);
  } else if (which == "min_power") {
    const double t = cfg.real("t");
    add(domain([&] { return min_power_identity(dimension_from(cfg), t); }), t == 1.0 ? std::max(tol, 1e-5) : tol);
  } else if (which == "kernel_mass") {
    const auto model = model_from(cfg);
    add(domain([&] { return kernel_mass_identity(model, cfg.real("alpha")); }), tol);
  } else if (which == "all") {
    for (double al : {0.5, 1.0, 1.5, 2.5, 4.0}) {
      for (double a : {-0.9, -0.5, 0.0, 0.5, 0.9}) add(gegenbauer_identity(al, a), tol);
    }
    for (int p : {3, 4, 5, 8}) {
      for (double t : {0.1, 0.5, 1.0, 2.0, 10.0}) add(min_power_identity(p, t), t == 1.0 ? std::max(tol, 1e-5) : tol);
    }
    const auto model = model_from(cfg);
    for (double al : {0.0, 1.0, 2.0}) add(kernel_mass_identity(model, al), tol);
  } else {
    throw ConfigError("unknown identity '" + which + "' (expected gegenbauer, min_power, kernel_mass or all)");
  }
  cfg.echo(*io.out);
  *io.out << "identity,params,lhs,rhs,rel_error,pass\n";
  bool all_pass = true;
  for (std::size_t j = 0; j < checks.size(); ++j) {
    const auto& c = checks[j];
    std::string params;
    for (const auto& [k, v] : c.params) params += (params.empty() ? "" : ";") + k + "=" + num(v);
    const bool pass = c.rel_error <= tols[j];
    all_pass = all_pass && pass;
    *io.out << c.id << "," << params << "," << num(c.lhs) << "," << num(c.rhs) << "," << num(c.rel_error) << ","
            << (pass ? "true" : "false") << "\n";
  }
  return (!all_pass && cfg.boolean("strict")) ? kStrict : kOk;
}

inline int cmd_probe(const RunConfig& cfg, const Outputs& io) {
  const auto model = model_from(cfg);
  const auto prior = prior_from(cfg, model.dimension());
  const auto r_list = parse_list(cfg.text("r_list"));
  for (double r : r_list) {
    if (!(r > 0.0)) throw ConfigError("probe radii must be positive");
  }
  const auto probe = asymptotic_ratio_probe(prior, model, r_list);
  cfg.echo(*io.out);
  *io.out << "# m_exponent = " << num(probe.m_exponent) << "\n";
  *io.out << "r,m_ratio,M_ratio,M_inv_ratio,m_log_dev,M_log_dev,M_inv_log_dev\n";
  std::vector<double> xs, ys;
  bool decreasing = true;
  for (std::size_t j = 0; j < probe.rows.size(); ++j) {
    const auto& row = probe.rows[j];
    *io.out << num(row.r) << "," << num(row.m_ratio) << "," << num(row.M_ratio) << "," << num(row.M_inv_ratio) << ","
            << num(row.m_log_dev) << "," << num(row.M_log_dev) << "," << num(row.M_inv_log_dev) << "\n";
    xs.push_back(std::log10(row.r));
    ys.push_back(row.m_log_dev / std::log(10.0));
    if (j > 0 && !(row.m_log_dev < probe.rows[j - 1].m_log_dev)) decreasing = false;
  }
  if (io.svg) write_svg(*io.svg, "log10 |m/g - 1| " + prior.id(), "log10 r", "log10 |m/g - 1|", xs, ys);
  return (!decreasing && cfg.boolean("strict")) ? kStrict : kOk;
}

inline int dispatch(const RunConfig& cfg, const Outputs& io) {
  const auto& c = cfg.command();
  if (c == "model-info") return cmd_model_info(cfg, io);
  if (c == "phi") return cmd_phi(cfg, io);
  if (c == "check") return cmd_check(cfg, io);
  if (c == "risk") return cmd_risk(cfg, io);
  if (c == "hseq") return cmd_hseq(cfg, io);
  if (c == "prior") return cmd_prior(cfg, io);
  if (c == "verify") return cmd_verify(cfg, io);
  if (c == "probe") return cmd_probe(cfg, io);
  throw ConfigError("unknown subcommand " + c);
}

inline int threads_from_env() {
  const char* env = std::getenv("SPHERESHRINK_THREADS");
  if (!env || !*env) return 1;
  try {
    const int v = std::stoi(env);
    return v < 0 ? 1 : v;
  } catch (const std::exception&) {
    throw ConfigError("SPHERESHRINK_THREADS must be a nonnegative integer");
  }
}

// Full command line -> exit code. Diagnostics go to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Harmonic-prior shrinkage estimation toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Print help for every subcommand");
  struct Sub {
    CLI::App* app = nullptr;
    std::map<std::string, std::string> values;
    std::string config;
    std::string out;
    std::string svg;
    int threads = -1;
    bool strict = false;
  };
  std::map<std::string, Sub> subs;
  for (const auto& name : subcommands()) {
    auto& s = subs[name];
    s.app = app.add_subcommand(name, describe(name));
    s.app->add_option("--config", s.config, "JSON config document");
    s.app->add_option("--out", s.out, "output file (default stdout)");
    s.app->add_option("--threads", s.threads, "worker threads (0 = auto)");
    if (name == "phi" || name == "risk" || name == "probe") s.app->add_option("--svg", s.svg, "SVG line plot");
    for (const auto& key : keys_for(name)) {
      if (key == "strict") {
        s.app->add_flag("--strict", s.strict, param(key).help);
        continue;
      }
      std::string names = "--" + key;
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      if (dashed != key) names += ",--" + dashed;
      s.app->add_option_function<std::string>(
          names, [&s, key](const std::string& v) { s.values[key] = v; }, param(key).help);
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? kOk : kConfig;
  }
  for (auto& [name, s] : subs) {
    if (!s.app->parsed()) continue;
    try {
      if (s.strict) s.values["strict"] = "true";
      const auto cfg = resolve(name, s.config.empty() ? std::nullopt : std::optional<std::string>(s.config), s.values);
      Outputs io;
      io.threads = s.threads >= 0 ? s.threads : threads_from_env();
      if (!s.svg.empty()) io.svg = s.svg;
      std::ofstream file;
      std::ostringstream buffer;
      io.out = &buffer;
      const int code = dispatch(cfg, io);
      if (s.out.empty()) {
        out << buffer.str();
      } else {
        file.open(s.out, std::ios::binary);
        if (!file) throw ConfigError("cannot write " + s.out);
        file << buffer.str();
      }
      return code;
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << "\n";
      return kConfig;
    } catch (const NumericError& e) {
      err << "numeric error: " << e.what() << "\n";
      return kNumeric;
    } catch (const std::invalid_argument& e) {
      err << "config error: " << e.what() << "\n";
      return kConfig;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kNumeric;
    }
  }
  return kConfig;
}

}  // namespace sphereshrink::cli
