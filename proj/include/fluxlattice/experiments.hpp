// Copyright 2026 The fluxlattice Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment runners behind the command-line tool. Each runner validates
// its inputs, computes, and writes CSV/JSON files through a RunWriter that
// records a manifest.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fluxlattice/bands.hpp"
#include "fluxlattice/device.hpp"
#include "fluxlattice/dynamics.hpp"
#include "fluxlattice/io.hpp"
#include "fluxlattice/lattice.hpp"
#include "fluxlattice/open_system.hpp"
#include "fluxlattice/parallel.hpp"
#include "fluxlattice/protocols.hpp"
#include "fluxlattice/report.hpp"

namespace fluxlattice {

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Expressions: "4pi", "pi/2", "sqrt2", "2*pi", "1.5", "-sqrt2/2"

inline double parse_expression(const std::string& text) {
  auto fail = [&]() -> double { throw InvalidArgument("cannot parse number \"" + text + "\""); };
  auto term = [&](std::string t) -> double {
    double sign = 1.0;
    if (!t.empty() && (t[0] == '-' || t[0] == '+')) {
      if (t[0] == '-') sign = -1.0;
      t.erase(0, 1);
    }
    if (t.empty()) return fail();
    double value = 1.0;
    std::size_t pos = 0;
    if (std::isdigit(static_cast<unsigned char>(t[0])) || t[0] == '.') {
      try {
        value = std::stod(t, &pos);
      } catch (const std::exception&) {
        return fail();
      }
    }
    const std::string sym = t.substr(pos);
    if (sym.empty()) {
    } else if (sym == "pi" || sym == "π") {
      value *= std::numbers::pi;
    } else if (sym == "sqrt2" || sym == "√2") {
      value *= std::numbers::sqrt2;
    } else {
      return fail();
    }
    return sign * value;
  };
  auto product = [&](const std::string& p) {
    double v = 1.0;
    std::size_t start = 0;
    while (true) {
      const auto star = p.find('*', start);
      v *= term(p.substr(start, star == std::string::npos ? std::string::npos : star - start));
      if (star == std::string::npos) break;
      start = star + 1;
    }
    return v;
  };
  std::string s;
  for (char c : text) {
    if (c != ' ') s.push_back(c);
  }
  if (s.empty()) return fail();
  const auto slash = s.find('/');
  double v = product(s.substr(0, slash));
  if (slash != std::string::npos) {
    const double d = product(s.substr(slash + 1));
    if (d == 0.0) return fail();
    v /= d;
  }
  if (!std::isfinite(v)) return fail();
  return v;
}

/// Comma-separated list of expressions.
inline std::vector<double> parse_expression_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    out.push_back(parse_expression(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

/// "a:b:n" -> n values evenly spaced from a to b.
inline std::vector<double> parse_range(const std::string& text) {
  const auto c1 = text.find(':');
  const auto c2 = c1 == std::string::npos ? std::string::npos : text.find(':', c1 + 1);
  if (c2 == std::string::npos) throw InvalidArgument("range must look like start:stop:count, got \"" + text + "\"");
  const double a = parse_expression(text.substr(0, c1));
  const double b = parse_expression(text.substr(c1 + 1, c2 - c1 - 1));
  const double n = parse_expression(text.substr(c2 + 1));
  if (n < 1 || n != std::floor(n)) throw InvalidArgument("range count must be a positive integer");
  return linspace(a, b, static_cast<std::size_t>(n));
}

// ---------------------------------------------------------------------------
// Output bookkeeping

class RunWriter {
 public:
  RunWriter(std::filesystem::path out_dir, std::string command, json config)
      : dir_(std::move(out_dir)), command_(std::move(command)), config_(std::move(config)),
        start_(std::chrono::steady_clock::now()) {}

  const std::filesystem::path& dir() const { return dir_; }

  void add(const std::string& name, const std::string& content) {
    write_text_file(dir_ / name, content);
    files_.push_back({name, sha256_hex(content), content.size()});
  }

  void add_json(const std::string& name, const json& j) { add(name, j.dump(2) + "\n"); }

  std::vector<std::string> file_names() const {
    std::vector<std::string> out;
    for (const auto& f : files_) out.push_back(f.name);
    return out;
  }

  /// manifest.json: command, config and its hash, version, wall time, and
  /// every output file with its SHA-256.
  json finish() {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m;
    m["schema"] = kSchemaVersion;
    m["command"] = command_;
    m["version"] = kVersion;
    m["config"] = config_;
    m["config_hash"] = sha256_hex(config_.dump());
    m["wall_time_s"] = wall;
    json files = json::array();
    for (const auto& f : files_) files.push_back({{"path", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    m["files"] = files;
    write_text_file(dir_ / "manifest.json", m.dump(2) + "\n");
    return m;
  }

 private:
  struct Entry {
    std::string name;
    std::string sha256;
    std::size_t bytes;
  };
  std::filesystem::path dir_;
  std::string command_;
  json config_;
  std::chrono::steady_clock::time_point start_;
  std::vector<Entry> files_;
};

// ---------------------------------------------------------------------------
// Runners

struct DynamicsOptions {
  SiteId init{Rail::A, 1};
  double tmax = 4.0 * std::numbers::pi;
  std::size_t samples = 201;
  bool open_system = false;  // use the lattice file's dephasing rates
};

struct DynamicsOutput {
  PopulationTrace trace;
  std::optional<std::vector<double>> coherence;
};

inline DynamicsOutput simulate_dynamics(const LatticeConfig& cfg, const DynamicsOptions& opt) {
  const auto& lat = cfg.lattice;
  if (!is_valid_site(opt.init, lat.plaquettes())) throw InvalidArgument("initial site " + to_string(opt.init) + " outside lattice");
  if (opt.samples < 2) throw InvalidArgument("need at least two time samples");
  const auto times = uniform_times(opt.tmax, opt.samples);
  const auto psi0 = StateVector::localized(lat, opt.init);
  const auto h = hamiltonian_single_excitation(lat);
  DynamicsOutput out;
  if (opt.open_system) {
    if (!cfg.dephasing) throw InvalidArgument("open-system run requested but the lattice file has no dephasing rates");
    auto res = lindblad_evolve(h, *cfg.dephasing, DensityMatrix::from_single_excitation(psi0), times, {},
                               site_labels(lat.plaquettes()));
    out.trace = std::move(res.trace);
    out.coherence = std::move(res.coherence_l1);
  } else {
    out.trace = evolve_unitary(h, psi0, times, site_labels(lat.plaquettes()));
  }
  return out;
}

/// Antisymmetric detuning read back from a lattice (the up-rail value of
/// cell 1), provided the pattern really is +d on up, -d on dn, 0 on A.
inline double lattice_delta(const RhombicLattice& lat) {
  const double d = lat.detuning({Rail::Up, 1});
  for (int j = 1; j <= lat.plaquettes(); ++j) {
    const double tol = 1e-12 * std::max(1.0, std::abs(d));
    if (std::abs(lat.detuning({Rail::Up, j}) - d) > tol || std::abs(lat.detuning({Rail::Down, j}) + d) > tol ||
        std::abs(lat.detuning({Rail::A, j})) > tol) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  }
  if (std::abs(lat.detuning({Rail::A, lat.plaquettes() + 1})) > 0) return std::numeric_limits<double>::quiet_NaN();
  return d;
}

inline void write_trace(RunWriter& w, const std::string& stem, const DynamicsOutput& out, const LatticeConfig& cfg,
                        double delta, SiteId init) {
  std::vector<std::pair<std::string, std::vector<double>>> extra;
  if (out.coherence) extra.push_back({"coherence_l1", *out.coherence});
  w.add(stem + ".csv", trace_to_csv(out.trace, extra));
  TraceMetadata meta{cfg.hash, cfg.lattice.fluxes(), delta, to_string(init)};
  json j = trace_to_json(out.trace, meta);
  if (out.coherence) j["coherence_l1"] = *out.coherence;
  w.add_json(stem + ".json", j);
}

inline void run_dynamics(RunWriter& w, const LatticeConfig& cfg, const DynamicsOptions& opt) {
  const auto out = simulate_dynamics(cfg, opt);
  const double d = lattice_delta(cfg.lattice);
  write_trace(w, "dynamics", out, cfg, std::isnan(d) ? 0.0 : d, opt.init);
}

/// One trace per antisymmetric detuning (units of J) applied on top of the
/// lattice's fluxes.
inline std::vector<PopulationTrace> run_detuning_sweep(RunWriter& w, const LatticeConfig& cfg,
                                                       const std::vector<double>& deltas, const DynamicsOptions& opt,
                                                       unsigned jobs) {
  if (deltas.empty()) throw InvalidArgument("detuning list is empty");
  std::vector<DynamicsOutput> outs(deltas.size());
  std::vector<LatticeConfig> cfgs(deltas.size(), cfg);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    cfgs[i].lattice = cfg.lattice.with_detunings(antisymmetric_detunings(cfg.lattice.plaquettes(), deltas[i]));
  }
  parallel_for(deltas.size(), jobs, [&](std::size_t i) { outs[i] = simulate_dynamics(cfgs[i], opt); });
  json index = json::array();
  std::vector<PopulationTrace> traces;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const std::string stem = "sweep_" + std::to_string(i);
    write_trace(w, stem, outs[i], cfg, deltas[i], opt.init);
    index.push_back({{"index", i}, {"delta_over_J", deltas[i]}, {"csv", stem + ".csv"}});
    traces.push_back(outs[i].trace);
  }
  w.add_json("sweep_index.json", {{"schema", kSchemaVersion}, {"traces", index}});
  return traces;
}

inline SpectroscopyResult run_spectroscopy(RunWriter& w, const LatticeConfig& cfg, const SpectroscopyConfig& sc,
                                           unsigned jobs) {
  const auto res = spectroscopy(cfg.lattice, sc, jobs);
  std::string csv = "delta_over_J,P\n";
  for (std::size_t i = 0; i < res.detunings.size(); ++i) {
    csv += format_double(res.detunings[i]) + "," + format_double(res.excited_population[i]) + "\n";
  }
  w.add("spectroscopy.csv", csv);
  w.add_json("spectroscopy.json", {{"schema", kSchemaVersion},
                                   {"lattice_hash", cfg.hash},
                                   {"drive_site", to_string(sc.drive_site)},
                                   {"drive_amplitude_over_J", sc.drive_amplitude},
                                   {"duration_Jt", sc.duration},
                                   {"peaks_over_J", res.peaks},
                                   {"warnings", res.warnings}});
  return res;
}

inline json ramp_to_json(const RampSchedule& s) {
  json a = json::array();
  for (const auto& seg : s.segments()) {
    a.push_back({{"duration_Jt", seg.duration},
                 {"J_start", seg.coupling_start},
                 {"J_end", seg.coupling_end},
                 {"detuning_start", seg.detuning_start},
                 {"detuning_end", seg.detuning_end}});
  }
  return a;
}

struct AdiabaticRunOptions {
  SiteId init{Rail::A, 1};
  double duration = 30.0;
  double initial_detuning = -4.0;
  bool open_system = false;
  std::size_t samples = 101;
};

inline AdiabaticResult run_adiabatic(RunWriter& w, const LatticeConfig& cfg, const AdiabaticRunOptions& opt) {
  const auto ramp = default_ramp(cfg.lattice, opt.init, opt.duration, opt.initial_detuning);
  std::optional<DephasingRates> rates;
  if (opt.open_system) {
    if (!cfg.dephasing) throw InvalidArgument("open-system ramp requested but the lattice file has no dephasing rates");
    DephasingRates r;
    for (std::size_t i = 0; i < cfg.dephasing->size(); ++i) r.gamma[site_at(i, cfg.lattice.plaquettes())] = (*cfg.dephasing)[i];
    rates = r;
  }
  AdiabaticOptions ao;
  ao.samples = opt.samples;
  const auto res = adiabatic_prepare(cfg.lattice, ramp, opt.init, rates, ao);

  std::vector<std::pair<std::string, std::vector<double>>> extra{{"ground_overlap", res.ground_overlap}};
  w.add("adiabatic.csv", trace_to_csv(res.trace, extra));
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  w.add_json("adiabatic.json", {{"schema", kSchemaVersion},
                                {"lattice_hash", cfg.hash},
                                {"fluxes", flux_list_json(cfg.lattice.fluxes())},
                                {"init", to_string(opt.init)},
                                {"duration_Jt", opt.duration},
                                {"duration_us", j_time_to_us(opt.duration, cfg.j_mhz)},
                                {"open_system", opt.open_system},
                                {"labels", site_labels(cfg.lattice.plaquettes())},
                                {"final_populations", vec(res.final_populations)},
                                {"ground_populations", vec(res.ground_populations)},
                                {"ideal_populations", vec(res.ideal_populations)},
                                {"final_ground_overlap", res.final_ground_overlap},
                                {"fidelity", res.fidelity},
                                {"fidelity_raw", res.fidelity_raw},
                                {"fidelity_vs_ideal", res.fidelity_vs_ideal},
                                {"warnings", res.warnings},
                                {"ramp", ramp_to_json(ramp)}});
  return res;
}

inline BandStructure run_bands(RunWriter& w, const BlochModel& model, std::size_t n_k) {
  const auto bs = band_structure(model, n_k);
  std::string csv = "k";
  for (int b = 0; b < bs.num_bands(); ++b) csv += ",E" + std::to_string(b + 1);
  csv += "\n";
  for (std::size_t i = 0; i < bs.k_grid.size(); ++i) {
    csv += format_double(bs.k_grid[i]);
    for (int b = 0; b < bs.num_bands(); ++b) csv += "," + format_double(bs.energies(static_cast<Eigen::Index>(i), b));
    csv += "\n";
  }
  w.add("bands.csv", csv);
  w.add_json("bands.json", {{"schema", kSchemaVersion}, {"model", model.name}, {"n_k", n_k}, {"bandwidths", bs.bandwidths()}});
  return bs;
}

struct ZakPoint {
  double delta_over_sqrt2j = 0.0;
  std::optional<ZakResult> result;
  std::string error;
};

/// Trimer Zak phases for Delta = x * sqrt2 J, x from `deltas`. A gap
/// closure at one point is recorded in its entry; the caller decides
/// whether that is fatal.
inline std::vector<ZakPoint> run_zak(RunWriter& w, const std::vector<double>& deltas, int band, std::size_t n_k,
                                     unsigned jobs) {
  std::vector<ZakPoint> pts(deltas.size());
  parallel_for(deltas.size(), jobs, [&](std::size_t i) {
    pts[i].delta_over_sqrt2j = deltas[i];
    try {
      pts[i].result = zak_phase(BlochModel::trimer(1.0, deltas[i] * std::numbers::sqrt2), band, n_k);
    } catch (const GapClosureError& e) {
      pts[i].error = e.what();
    }
  });
  json arr = json::array();
  for (const auto& p : pts) {
    json e{{"delta_over_sqrt2J", p.delta_over_sqrt2j}, {"band", band}};
    if (p.result) {
      e["zak_raw"] = p.result->raw;
      e["zak_snapped"] = p.result->snapped ? json(*p.result->snapped) : json(nullptr);
      e["min_gap"] = p.result->min_gap;
    } else {
      e["zak_raw"] = nullptr;
      e["zak_snapped"] = nullptr;
      e["min_gap"] = 0.0;
      e["error"] = p.error;
    }
    arr.push_back(e);
  }
  w.add_json("zak.json", {{"schema", kSchemaVersion}, {"n_k", n_k}, {"results", arr}});
  return pts;
}

struct CouplerCalibration {
  std::string name;
  double off_frequency = 0.0;
  double g_eff_at_spec = 0.0;
  std::optional<VacuumRabiResult> oracle;
};

/// Coupling-off point per coupler plus a g_eff sweep of the coupler
/// frequency compared against the three-mode oracle.
inline std::vector<CouplerCalibration> run_coupler_calibrate(RunWriter& w, const DeviceConfig& dev, std::size_t points,
                                                             unsigned jobs) {
  if (dev.couplers.empty()) throw InvalidArgument("device file lists no couplers");
  if (points < 2) throw InvalidArgument("need at least two sweep points");
  std::vector<CouplerCalibration> cal(dev.couplers.size());
  std::string csv = "coupler,omega_c_GHz,g_eff_MHz,g_oracle_MHz,sign\n";
  json arr = json::array();
  for (std::size_t c = 0; c < dev.couplers.size(); ++c) {
    const auto& e = dev.couplers[c];
    cal[c].name = e.name;
    cal[c].off_frequency = coupler_off_frequency(e.spec);
    if (e.spec.omega_c != 0.0) {
      cal[c].g_eff_at_spec = g_eff(e.spec);
      cal[c].oracle = three_mode_vacuum_rabi(e.spec);
    }
    const auto win = default_coupler_window(e.spec);
    // Sweep from the dispersive edge up to twice the off point's detuning.
    const double top = std::max(e.spec.omega_a, e.spec.omega_b);
    const auto grid = linspace(win.lo, top + 2.0 * (cal[c].off_frequency - top), points);
    std::vector<std::string> rows(points);
    parallel_for(points, jobs, [&](std::size_t i) {
      CouplerSpec s = e.spec;
      s.omega_c = grid[i];
      const double g = g_eff_unchecked(s);
      std::string oracle = "nan";
      std::string sign = "n/a";
      try {
        const auto o = three_mode_vacuum_rabi(s);
        oracle = format_double(1e3 * o.coupling);
        sign = to_string(o.sign);
      } catch (const NumericalError&) {
      }
      rows[i] = e.name + "," + format_double(grid[i]) + "," + format_double(1e3 * g) + "," + oracle + "," + sign + "\n";
    });
    for (const auto& r : rows) csv += r;
    json item{{"name", e.name}, {"coupler_off_GHz", cal[c].off_frequency}};
    if (cal[c].oracle) {
      item["g_eff_MHz"] = 1e3 * cal[c].g_eff_at_spec;
      item["g_oracle_MHz"] = 1e3 * cal[c].oracle->coupling;
      item["oracle_sign"] = to_string(cal[c].oracle->sign);
    }
    arr.push_back(item);
  }
  w.add("coupler_sweep.csv", csv);
  w.add_json("coupler.json", {{"schema", kSchemaVersion}, {"device_hash", dev.hash}, {"couplers", arr}});
  return cal;
}

inline CrosstalkFit run_crosstalk_fit(RunWriter& w, const CrosstalkSamples& samples, const std::string& source) {
  const auto fit = crosstalk_fit(samples.source, samples.target);
  std::string csv = "source,target\n";
  for (std::size_t i = 0; i < samples.source.size(); ++i) {
    csv += format_double(samples.source[i]) + "," + format_double(samples.target[i]) + "\n";
  }
  w.add("crosstalk_data.csv", csv);
  w.add_json("crosstalk.json", {{"schema", kSchemaVersion},
                                {"data", source},
                                {"slope", fit.slope},
                                {"intercept", fit.intercept},
                                {"element", fit.element},
                                {"residual_rms", fit.residual_rms}});
  return fit;
}

}  // namespace fluxlattice
