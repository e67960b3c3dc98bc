#pragma once

// CSV and report output. Doubles are written with 17 significant digits so
// every value reads back bit for bit.

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oscar/config.hpp"
#include "oscar/errors.hpp"
#include "oscar/runner.hpp"
#include "oscar/spectral.hpp"

namespace oscar {

/// Streams trajectory rows to disk as they are produced, so a failed run
/// still leaves every completed row behind.
class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(const std::string& path) : out_(path) {
    if (!out_) throw ConfigError("cannot write '" + path + "'");
    for (std::size_t i = 0; i < trajectory_columns.size(); ++i) out_ << (i ? "," : "") << trajectory_columns[i];
    out_ << '\n';
  }

  void operator()(const Sample& s) {
    const double v[] = {s.t, s.zbar, s.r_u, s.Z_u, s.Z_d, s.vZZ_u, s.vZZ_d, s.I_c, s.f_t, s.Amp_t};
    for (std::size_t i = 0; i < std::size(v); ++i) out_ << (i ? "," : "") << format_double(v[i]);
    out_ << '\n';
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

inline void write_trajectory_csv(const std::string& path, const std::vector<Sample>& rows) {
  TrajectoryWriter w(path);
  for (const auto& r : rows) w(r);
}

inline void write_spectrum_csv(const std::string& path, const Spectrum& spec) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "freq,power\n";
  for (std::size_t k = 0; k < spec.freq.size(); ++k)
    out << format_double(spec.freq[k]) << ',' << format_double(spec.power[k]) << '\n';
}

/// Reads one named column from a CSV file with a header row.
inline std::vector<double> read_csv_column(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("'" + path + "' is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(detail::trim(cell));
  }
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ConfigError("'" + path + "' has no column '" + name + "'");
  const auto col = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t i = 0; i <= col; ++i)
      if (!std::getline(ss, cell, ',')) throw ConfigError("short row in '" + path + "'");
    out.push_back(detail::parse_double(name, detail::trim(cell)));
  }
  return out;
}

inline std::string describe(const ClassificationReport& r) {
  std::ostringstream o;
  o << "trajectory        " << r.trajectory << '\n'
    << "T_sampling        " << format_double(r.t_sampling) << '\n'
    << "df                " << format_double(r.df) << '\n'
    << "resolves shift    " << (r.resolves ? "yes" : "no (df > Gamma/2pi)") << '\n'
    << "f_carrier         " << format_double(r.f_carrier) << '\n'
    << "band              " << format_double(r.band.lo) << " .. " << format_double(r.band.hi) << '\n'
    << "f_peak            " << format_double(r.peak.f_peak) << " (bin " << r.peak.bin << ")\n"
    << "f_peak refined    " << format_double(r.peak.f_refined) << '\n'
    << "shift             " << format_double(r.shift) << '\n'
    << "min_shift         " << format_double(r.min_shift) << '\n'
    << "verdict           " << to_string(r.verdict) << '\n'
    << "majority state    " << to_string(r.truth) << '\n'
    << "localized         " << (r.localized ? "yes" : "no") << " (" << format_double(r.localized_fraction)
    << " of window)\n"
    << "flips             " << r.summary.flips << " (" << r.summary.settled_flips << " after settling)\n";
  return o.str();
}

inline std::string describe(const CompareReport& r) {
  std::ostringstream o;
  o << "samples                 " << r.gaussian.size() << '\n'
    << "zbar rms error / amp    " << format_double(r.zbar_rms) << '\n'
    << "zbar max error / amp    " << format_double(r.zbar_max) << '\n'
    << "r_u rms error           " << format_double(r.r_u_rms) << '\n'
    << "r_u max error           " << format_double(r.r_u_max) << '\n'
    << "sme max trace error     " << format_double(r.sme_diagnostics.max_trace_error) << '\n'
    << "sme max hermiticity     " << format_double(r.sme_diagnostics.max_hermiticity_error) << '\n'
    << "sme min eigenvalue      " << format_double(r.sme_diagnostics.min_eigenvalue) << '\n'
    << "sme max <n>             " << format_double(r.sme_diagnostics.max_n_mean) << '\n'
    << "sme max edge population " << format_double(r.sme_diagnostics.max_edge_population) << '\n';
  return o.str();
}

inline std::string describe(const std::vector<SweepRow>& table) {
  std::ostringstream o;
  o << "kappa_s,runs,mean_flips,flips_stderr,mean_settled_flips,success_rate\n";
  for (const auto& r : table)
    o << format_double(r.kappa_s) << ',' << r.runs << ',' << format_double(r.mean_flips) << ','
      << format_double(r.flips_stderr) << ',' << format_double(r.mean_settled_flips) << ','
      << format_double(r.success_rate) << '\n';
  return o.str();
}

inline std::string describe(const RunSummary& s) {
  std::ostringstream o;
  o << "samples           " << s.samples << '\n'
    << "flips             " << s.flips << " (" << s.settled_flips << " after settling)\n"
    << "localized         " << format_double(s.localized_fraction()) << " of window\n"
    << "majority state    " << to_string(s.majority_state()) << '\n'
    << "min uncertainty   " << format_double(s.min_uncertainty) << '\n';
  return o.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

}  // namespace oscar
