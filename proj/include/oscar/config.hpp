#pragma once

// Run configuration and its plain-text "key = value" file format.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oscar/errors.hpp"
#include "oscar/params.hpp"
#include "oscar/spectral.hpp"

namespace oscar {

struct RunConfig {
  std::string mode = "gaussian";  // unitary, gaussian, sme, compare, sweep, classify
  SystemParams params = reference_params();
  InitialCondition ic = reference_initial_condition(reference_params());
  std::size_t n_samples = std::size_t{1} << 19;
  double dt_int = 1e-3;
  std::uint64_t seed = 0;
  std::size_t ensemble = 1;
  std::vector<double> sweep;
  std::string out_dir = ".";
  int dim = 48;                  // Fock truncation for the SME
  std::string signal = "zbar";   // classification input: zbar or photocurrent
  double min_shift = 0.0;        // 0 selects Gamma / (4 pi)
  double band_halfwidth = 0.0;   // 0 selects 10 * max(Gamma / 2 pi, df)
  bool noise = true;             // false zeroes every Wiener increment
};

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline int substeps(const RunConfig& c) {
  const double ratio = c.params.dt / c.dt_int;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-9 * ratio) throw ConfigError("dt_int must divide dt");
  return static_cast<int>(n);
}

inline double sampling_time(const RunConfig& c) { return static_cast<double>(c.n_samples) * c.params.dt; }

inline double effective_min_shift(const RunConfig& c) {
  return c.min_shift > 0.0 ? c.min_shift : default_min_shift(c.params);
}

inline Band classification_band(const RunConfig& c) {
  const double fc = carrier_frequency();
  double w = c.band_halfwidth;
  if (!(w > 0.0))
    w = 10.0 * std::max(c.params.gamma_big / (2.0 * pi), frequency_resolution(c.n_samples, c.params.dt));
  // short records: keep the band inside (0, Nyquist]
  const double nyquist = 0.5 / c.params.dt;
  return {std::max(fc - w, frequency_resolution(c.n_samples, c.params.dt)), std::min(fc + w, nyquist)};
}

/// Throws ConfigError (or InvalidParameter) on a hard violation; returns warnings.
inline std::vector<std::string> validate(const RunConfig& c) {
  static const std::set<std::string> modes{"unitary", "gaussian", "sme", "compare", "sweep", "classify"};
  if (!modes.count(c.mode)) throw ConfigError("unknown mode '" + c.mode + "'");
  auto warnings = validate(c.params);
  validate(c.ic);
  if (c.n_samples == 0) throw ConfigError("n_samples must be >= 1");
  if (!(c.dt_int > 0.0)) throw ConfigError("dt_int must be > 0");
  substeps(c);
  if (c.ensemble == 0) throw ConfigError("ensemble must be >= 1");
  if (c.dim < 4) throw ConfigError("dim must be >= 4");
  if (c.signal != "zbar" && c.signal != "photocurrent") throw ConfigError("signal must be zbar or photocurrent");
  if (c.min_shift < 0.0 || c.band_halfwidth < 0.0) throw ConfigError("min_shift and band_halfwidth must be >= 0");
  if (c.mode == "sweep" && c.sweep.empty()) throw ConfigError("sweep mode needs a nonempty sweep list");
  for (double k : c.sweep)
    if (!(k >= 0.0)) throw ConfigError("sweep values must be >= 0");
  if (c.mode == "classify" || c.mode == "sweep") {
    if (!is_power_of_two(c.n_samples)) throw ConfigError("n_samples must be a power of two for classification");
    if (!resolves_shift(c.n_samples, c.params.dt, c.params))
      warnings.emplace_back("frequency resolution does not resolve the spin shift (df > Gamma/2pi)");
  }
  if (c.mode == "compare" && c.params.amp_set > 6.0)
    throw ConfigError("compare mode needs amp_set <= 6 so the SME stays tractable");
  return warnings;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out))
    throw ConfigError("bad numeric value for '" + key + "': '" + v + "'");
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad non-negative integer for '" + key + "': '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError("bad boolean for '" + key + "': '" + v + "'");
}

}  // namespace detail

/// Parses a config stream. Omitted keys keep the reference defaults; Z0
/// defaults to -amp_set; lambda_pc, when absent, is derived from the optics
/// keys with amp_scale defaulting to amp_set.
inline RunConfig parse_config(std::istream& in) {
  RunConfig c;
  SystemParams& p = c.params;
  OpticsParams optics;
  bool optics_given = false, amp_scale_given = false, lambda_given = false, z0_given = false;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto num = [](double& target) -> Setter {
    return [&target](const std::string& k, const std::string& v) { target = detail::parse_double(k, v); };
  };
  auto optic = [&](double& target) -> Setter {
    return [&target, &optics_given](const std::string& k, const std::string& v) {
      target = detail::parse_double(k, v);
      optics_given = true;
    };
  };

  const std::map<std::string, Setter> setters{
      {"mode", [&](auto&, auto& v) { c.mode = v; }},
      {"eta", num(p.eta)},
      {"epsilon", num(p.epsilon)},
      {"gamma_damp", num(p.gamma_damp)},
      {"kappa_s", num(p.kappa_s)},
      {"e_d", num(p.e_d)},
      {"kBT", num(p.kBT)},
      {"A2", num(p.A2)},
      {"B2", num(p.B2)},
      {"lambda_pc", [&](auto& k, auto& v) { p.lambda_pc = detail::parse_double(k, v); lambda_given = true; }},
      {"kappaE_over_gc", optic(optics.kappaE_over_gc)},
      {"gamma_c", optic(optics.gamma_c)},
      {"Q", optic(optics.Q)},
      {"amp_scale", [&](auto& k, auto& v) {
         optics.amp_scale = detail::parse_double(k, v);
         optics_given = amp_scale_given = true;
       }},
      {"g_fb", num(p.g_fb)},
      {"amp_set", num(p.amp_set)},
      {"dt", num(p.dt)},
      {"fb_polarity", num(p.fb_polarity)},
      {"lowpass_cutoff", num(p.lowpass_cutoff)},
      {"r_u0", num(c.ic.r_u0)},
      {"Z0", [&](auto& k, auto& v) { c.ic.Z0 = detail::parse_double(k, v); z0_given = true; }},
      {"p0", num(c.ic.p0)},
      {"vZZ0", num(c.ic.vZZ0)},
      {"vPP0", num(c.ic.vPP0)},
      {"vZP0", num(c.ic.vZP0)},
      {"n_samples", [&](auto& k, auto& v) { c.n_samples = detail::parse_uint(k, v); }},
      {"dt_int", num(c.dt_int)},
      {"seed", [&](auto& k, auto& v) { c.seed = detail::parse_uint(k, v); }},
      {"ensemble", [&](auto& k, auto& v) { c.ensemble = detail::parse_uint(k, v); }},
      {"sweep", [&](auto& k, auto& v) {
         c.sweep.clear();
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ','))
           if (auto t = detail::trim(item); !t.empty()) c.sweep.push_back(detail::parse_double(k, t));
       }},
      {"out", [&](auto&, auto& v) { c.out_dir = v; }},
      {"dim", [&](auto& k, auto& v) { c.dim = static_cast<int>(detail::parse_uint(k, v)); }},
      {"signal", [&](auto&, auto& v) { c.signal = v; }},
      {"min_shift", num(c.min_shift)},
      {"band_halfwidth", num(c.band_halfwidth)},
      {"noise", [&](auto& k, auto& v) { c.noise = detail::parse_bool(k, v); }},
  };
  static const std::set<std::string> derived{"gamma_big", "A1", "B1"};

  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (derived.count(key)) throw ConfigError("'" + key + "' is derived and cannot be set");
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "'");
    it->second(key, value);
  }

  if (lambda_given && optics_given) throw ConfigError("set either lambda_pc or the optics keys, not both");
  if (!lambda_given) {
    if (!amp_scale_given) optics.amp_scale = p.amp_set;
    p.lambda_pc = derive_lambda(optics, p.e_d);
  }
  if (!z0_given) c.ic.Z0 = -p.amp_set;
  p = with_derived(p);
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

/// Every settable key, with lambda_pc written explicitly so that reading
/// the text back reproduces the same derived coefficients bit for bit.
inline std::string to_config_text(const RunConfig& c) {
  const auto& p = c.params;
  std::ostringstream out;
  auto kv = [&](const char* k, double v) { out << k << " = " << format_double(v) << '\n'; };
  out << "mode = " << c.mode << '\n';
  kv("eta", p.eta);
  kv("epsilon", p.epsilon);
  kv("gamma_damp", p.gamma_damp);
  kv("kappa_s", p.kappa_s);
  kv("e_d", p.e_d);
  kv("kBT", p.kBT);
  kv("A2", p.A2);
  kv("B2", p.B2);
  kv("lambda_pc", p.lambda_pc);
  kv("g_fb", p.g_fb);
  kv("amp_set", p.amp_set);
  kv("dt", p.dt);
  kv("fb_polarity", p.fb_polarity);
  kv("lowpass_cutoff", p.lowpass_cutoff);
  kv("r_u0", c.ic.r_u0);
  kv("Z0", c.ic.Z0);
  kv("p0", c.ic.p0);
  kv("vZZ0", c.ic.vZZ0);
  kv("vPP0", c.ic.vPP0);
  kv("vZP0", c.ic.vZP0);
  out << "n_samples = " << c.n_samples << '\n';
  kv("dt_int", c.dt_int);
  out << "seed = " << c.seed << '\n';
  out << "ensemble = " << c.ensemble << '\n';
  if (!c.sweep.empty()) {
    out << "sweep = ";
    for (std::size_t i = 0; i < c.sweep.size(); ++i) out << (i ? ", " : "") << format_double(c.sweep[i]);
    out << '\n';
  }
  out << "out = " << c.out_dir << '\n';
  out << "dim = " << c.dim << '\n';
  out << "signal = " << c.signal << '\n';
  kv("min_shift", c.min_shift);
  kv("band_halfwidth", c.band_halfwidth);
  out << "noise = " << (c.noise ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace oscar
