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

// fluxlattice command-line front end.
//
// Exit status: 0 success, 2 invalid configuration, 3 numerical failure
// (trace drift, gap closure, failed verification), 1 anything else.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fluxlattice.hpp"

namespace fl = fluxlattice;
namespace fs = std::filesystem;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string out;
  unsigned jobs = 0;
  std::uint64_t seed = 20240601;
  std::string config;
};

// Keys in a --config file whose values are paths relative to that file.
bool is_path_key(const std::string& k) {
  return k == "lattice" || k == "device" || k == "trace" || k == "data" || k == "matrix" || k == "out";
}

std::string json_scalar(const fl::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return fl::format_double(v.get<double>());
  throw fl::InvalidArgument("config values must be strings, numbers, booleans or arrays of those");
}

// Expands "--config file.json" into ordinary flags placed before the
// command-line ones, so explicit flags override the file.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  std::size_t at = 0;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      at = i;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      at = i;
    }
  }
  if (path.empty() || args.size() < 2) return args;
  const auto j = fl::parse_json_text(fl::read_text_file(path), path);
  if (!j.is_object()) throw fl::InvalidArgument(path + ": expected a JSON object");
  const std::string sub = args[1];
  if (j.contains("experiment")) {
    std::string exp = j.at("experiment").get<std::string>();
    for (auto& c : exp) {
      if (c == '_') c = '-';
    }
    const bool same = exp == sub || (exp == "coupler" && sub == "coupler-calibrate") ||
                      (exp == "crosstalk" && sub == "crosstalk-fit");
    if (!same) throw fl::InvalidArgument(path + ": experiment \"" + exp + "\" does not match subcommand " + sub);
  }
  const fs::path base = fs::path(path).parent_path();
  std::vector<std::string> injected;
  for (const auto& [key, val] : j.items()) {
    if (key == "experiment" || key == "schema") continue;
    const std::string flag = "--" + key;
    if (val.is_boolean()) {
      if (val.get<bool>()) injected.push_back(flag);
      continue;
    }
    std::string text;
    if (val.is_array()) {
      for (const auto& e : val) text += (text.empty() ? "" : ",") + json_scalar(e);
    } else {
      text = json_scalar(val);
    }
    if (is_path_key(key) && fs::path(text).is_relative()) text = (base / text).string();
    injected.push_back(flag);
    injected.push_back(text);
  }
  std::vector<std::string> out(args.begin(), args.begin() + 2);
  out.insert(out.end(), injected.begin(), injected.end());
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (i == at) {
      if (args[i] == "--config") ++i;
      continue;
    }
    out.push_back(args[i]);
  }
  return out;
}

void add_common(CLI::App* sub, Common& c, const std::string& name) {
  sub->add_option("--out", c.out, "Output directory")->default_str("out/" + name);
  sub->add_option("--jobs", c.jobs, "Worker threads (default: FLUXLATTICE_JOBS or 1)")->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "Seed for synthetic noise");
  sub->add_option("--config", c.config, "JSON file of flag values");
}

fl::SiteId site_flag(const std::string& s) {
  try {
    return fl::parse_site(s);
  } catch (const fl::InvalidArgument& e) {
    throw fl::InvalidArgument(std::string("bad site: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  try {
    args = expand_config(args);
  } catch (const fl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  CLI::App app{"Rhombic pi-flux qubit lattice simulator"};
  app.set_version_flag("--version", fl::kVersion);
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  Common common;

  std::string lattice_file, init = "A,1", tmax = "4pi";
  std::size_t samples = 201;
  bool open = false;

  auto* dyn = app.add_subcommand("dynamics", "Single-excitation population dynamics");
  add_common(dyn, common, "dynamics");
  dyn->add_option("--lattice", lattice_file, "Lattice JSON")->required();
  dyn->add_option("--init", init, "Initially excited site, e.g. A,2 or up1");
  dyn->add_option("--tmax", tmax, "Final time in units of 1/J (accepts 4pi, pi/2)");
  dyn->add_option("--samples", samples, "Number of time samples")->check(CLI::Range(2, 1000000));
  dyn->add_flag("--open", open, "Include the lattice file's dephasing (Lindblad)");

  std::string delta_list = "0,sqrt2,10";
  auto* sweep = app.add_subcommand("detuning-sweep", "Dynamics for several antisymmetric detunings");
  add_common(sweep, common, "detuning-sweep");
  sweep->add_option("--lattice", lattice_file, "Lattice JSON")->required();
  sweep->add_option("--delta", delta_list, "Detunings in units of J, comma separated");
  sweep->add_option("--init", init, "Initially excited site");
  sweep->add_option("--tmax", tmax, "Final time in units of 1/J");
  sweep->add_option("--samples", samples, "Number of time samples")->check(CLI::Range(2, 1000000));
  sweep->add_flag("--open", open, "Include dephasing");

  std::string drive = "A,1", grid = "-3:3:201", omega = "0.05", duration = "20";
  std::optional<double> omega_mhz;
  auto* spec = app.add_subcommand("spectroscopy", "Drive-detuning spectroscopy from the vacuum");
  add_common(spec, common, "spectroscopy");
  spec->add_option("--lattice", lattice_file, "Lattice JSON (zero detunings)")->required();
  spec->add_option("--drive", drive, "Driven site");
  auto* om = spec->add_option("--omega", omega, "Drive amplitude in units of J");
  spec->add_option("--omega-mhz", omega_mhz, "Drive amplitude as value/2pi in MHz")->excludes(om);
  spec->add_option("--duration", duration, "Drive duration in units of 1/J");
  spec->add_option("--grid", grid, "Drive detunings start:stop:count in units of J");

  std::string ramp = "30", initial_detuning = "-4";
  std::optional<double> ramp_us;
  auto* adia = app.add_subcommand("adiabatic", "Adiabatic ground-state preparation");
  add_common(adia, common, "adiabatic");
  adia->add_option("--lattice", lattice_file, "Target lattice JSON")->required();
  adia->add_option("--init", init, "Site excited at the start");
  auto* rd = adia->add_option("--duration", ramp, "Total ramp duration in units of 1/J");
  adia->add_option("--duration-us", ramp_us, "Total ramp duration in microseconds")->excludes(rd);
  adia->add_option("--initial-detuning", initial_detuning, "Starting detuning of the init site in units of J");
  adia->add_option("--samples", samples, "Samples along the ramp")->check(CLI::Range(2, 1000000));
  adia->add_flag("--open", open, "Include the lattice file's dephasing");

  std::string model = "rhombic", flux = "pi", delta = "0";
  std::size_t nk = 512;
  auto* bands = app.add_subcommand("bands", "Bloch band structure");
  add_common(bands, common, "bands");
  bands->add_option("--model", model, "rhombic or trimer")->check(CLI::IsMember({"rhombic", "trimer"}));
  bands->add_option("--flux", flux, "Plaquette flux for the rhombic model: 0 or pi");
  bands->add_option("--delta", delta, "Trimer inter-cell coupling in units of J");
  bands->add_option("--nk", nk, "k points over [-pi, pi]")->check(CLI::Range(3, 10000000));

  std::string delta_range = "0.2:2.0:7";
  int band = 0;
  auto* zak = app.add_subcommand("zak", "Zak phase of the trimer lattice");
  add_common(zak, common, "zak");
  zak->add_option("--delta-range", delta_range, "start:stop:count in units of sqrt2 J");
  zak->add_option("--band", band, "Band index (0 = lowest)")->check(CLI::Range(0, 2));
  zak->add_option("--nk", nk, "k points in the Wilson loop")->check(CLI::Range(64, 10000000));

  std::string device_file;
  std::size_t points = 201;
  auto* coupler = app.add_subcommand("coupler-calibrate", "Coupling-off points and g_eff sweeps");
  add_common(coupler, common, "coupler-calibrate");
  coupler->add_option("--device", device_file, "Device JSON")->required();
  coupler->add_option("--points", points, "Coupler-frequency sweep points")->check(CLI::Range(2, 1000000));

  std::string data_file, matrix_file, target;
  double slope = -6e-4, sigma = 1e-5;
  std::size_t n_points = 21;
  auto* xtalk = app.add_subcommand("crosstalk-fit", "Fit a crosstalk element; optionally correct voltages");
  add_common(xtalk, common, "crosstalk-fit");
  xtalk->add_option("--data", data_file, "CSV source,target; synthetic data when omitted");
  xtalk->add_option("--slope", slope, "Synthetic compensation slope");
  xtalk->add_option("--sigma", sigma, "Synthetic noise standard deviation")->check(CLI::NonNegativeNumber);
  xtalk->add_option("--points", n_points, "Synthetic points")->check(CLI::Range(2, 1000000));
  auto* mat = xtalk->add_option("--matrix", matrix_file, "Crosstalk matrix CSV to invert");
  xtalk->add_option("--target", target, "Target voltages, comma separated")->needs(mat);

  std::string trace_file, oracle = "analytic_l1";
  std::optional<double> verify_delta;
  double tolerance = 1e-8;
  auto* verify = app.add_subcommand("verify", "Compare a trace CSV with an independent reference");
  add_common(verify, common, "verify");
  verify->add_option("--trace", trace_file, "Trace CSV")->required()->check(CLI::ExistingFile);
  verify->add_option("--lattice", lattice_file, "Lattice JSON the trace was produced with")->required();
  verify->add_option("--oracle", oracle, "analytic_l1 or effective_model")
      ->check(CLI::IsMember({"analytic_l1", "effective_model"}));
  verify->add_option("--delta", verify_delta, "Antisymmetric detuning in units of J (default: from the lattice)");
  verify->add_option("--tolerance", tolerance, "Maximum allowed deviation")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    const unsigned jobs = common.jobs ? common.jobs : fl::default_jobs();
    const fs::path out = common.out.empty() ? fs::path("out") / name : fs::path(common.out);

    // Validate everything that can be validated before computing.
    std::optional<fl::LatticeConfig> lat;
    if (!lattice_file.empty()) lat = fl::load_lattice_config(lattice_file);

    fl::json record;
    for (const auto* opt : sub->get_options()) {
      if (opt->get_name() == "--help" || opt->get_name() == "--config" || opt->count() == 0) continue;
      const auto res = opt->results();
      record[opt->get_name().substr(2)] = res.size() == 1 ? fl::json(res.front()) : fl::json(res);
    }
    record["subcommand"] = name;
    record["seed"] = common.seed;
    if (lat) record["lattice_hash"] = lat->hash;

    fl::RunWriter writer(out, name, record);
    int status = 0;

    if (sub == dyn || sub == sweep) {
      fl::DynamicsOptions opt;
      opt.init = site_flag(init);
      opt.tmax = fl::parse_expression(tmax);
      opt.samples = samples;
      opt.open_system = open;
      if (sub == dyn) {
        fl::run_dynamics(writer, *lat, opt);
      } else {
        fl::run_detuning_sweep(writer, *lat, fl::parse_expression_list(delta_list), opt, jobs);
      }
    } else if (sub == spec) {
      fl::SpectroscopyConfig sc;
      sc.drive_site = site_flag(drive);
      sc.drive_amplitude = omega_mhz ? fl::mhz_to_j(*omega_mhz, lat->j_mhz) : fl::parse_expression(omega);
      sc.duration = fl::parse_expression(duration);
      sc.drive_detunings = fl::parse_range(grid);
      const auto res = fl::run_spectroscopy(writer, *lat, sc, jobs);
      for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "peaks (units of J):";
      for (double p : res.peaks) std::cout << " " << p;
      std::cout << "\n";
    } else if (sub == adia) {
      fl::AdiabaticRunOptions opt;
      opt.init = site_flag(init);
      opt.duration = ramp_us ? *ramp_us * 2.0 * std::numbers::pi * lat->j_mhz : fl::parse_expression(ramp);
      opt.initial_detuning = fl::parse_expression(initial_detuning);
      opt.open_system = open;
      opt.samples = samples;
      const auto res = fl::run_adiabatic(writer, *lat, opt);
      for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "ground overlap " << res.final_ground_overlap << ", fidelity " << res.fidelity << " (raw "
                << res.fidelity_raw << ")\n";
    } else if (sub == bands) {
      const auto m = model == "rhombic"
                         ? fl::BlochModel::rhombic(1.0, flux == "pi" ? std::numbers::pi : fl::parse_expression(flux))
                         : fl::BlochModel::trimer(1.0, fl::parse_expression(delta));
      const auto bs = fl::run_bands(writer, m, nk);
      std::cout << "bandwidths:";
      for (double b : bs.bandwidths()) std::cout << " " << b;
      std::cout << "\n";
    } else if (sub == zak) {
      const auto pts = fl::run_zak(writer, fl::parse_range(delta_range), band, nk, jobs);
      for (const auto& p : pts) {
        std::cout << "delta/sqrt2J=" << p.delta_over_sqrt2j << " ";
        if (p.result) {
          std::cout << "Z=" << p.result->raw << "\n";
        } else {
          std::cout << "gap closed\n";
          std::cerr << "error: " << p.error << "\n";
          status = kExitNumerical;
        }
      }
    } else if (sub == coupler) {
      const auto dev = fl::load_device_config(device_file);
      for (const auto& c : fl::run_coupler_calibrate(writer, dev, points, jobs)) {
        std::cout << c.name << ": coupling off at omega_C/2pi = " << c.off_frequency << " GHz\n";
      }
    } else if (sub == xtalk) {
      fl::CrosstalkSamples samples_in;
      std::string source;
      if (!data_file.empty()) {
        samples_in = fl::crosstalk_samples_from_csv(fl::read_text_file(data_file), data_file);
        source = data_file;
      } else {
        samples_in = fl::synthetic_crosstalk(slope, sigma, n_points, common.seed);
        source = "synthetic";
      }
      const auto fit = fl::run_crosstalk_fit(writer, samples_in, source);
      std::cout << "crosstalk element " << fit.element << "\n";
      if (!matrix_file.empty()) {
        const auto m = fl::crosstalk_from_csv(fl::read_text_file(matrix_file), matrix_file);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(m.m.rows());
        if (!target.empty()) {
          const auto t = fl::parse_expression_list(target);
          if (t.size() != static_cast<std::size_t>(v.size())) throw fl::InvalidArgument("--target has the wrong length");
          for (std::size_t i = 0; i < t.size(); ++i) v(static_cast<Eigen::Index>(i)) = t[i];
        }
        const Eigen::VectorXd applied = fl::crosstalk_correct(m, v);
        writer.add_json("crosstalk_correction.json",
                        {{"schema", fl::kSchemaVersion},
                         {"condition_number", m.condition_number()},
                         {"target", std::vector<double>(v.data(), v.data() + v.size())},
                         {"applied", std::vector<double>(applied.data(), applied.data() + applied.size())},
                         {"residual", (m.m * applied - v).norm()}});
      }
    } else if (sub == verify) {
      const auto trace = fl::load_trace_csv(trace_file);
      double d = verify_delta ? *verify_delta : fl::lattice_delta(lat->lattice);
      if (std::isnan(d)) throw fl::InvalidArgument("lattice detunings are not antisymmetric; pass --delta");
      const auto rep = fl::compare_against_reference(trace, fl::parse_oracle(oracle), lat->lattice, d, tolerance);
      writer.add_json("verify.json", {{"schema", fl::kSchemaVersion},
                                      {"trace", trace_file},
                                      {"oracle", fl::to_string(rep.oracle)},
                                      {"init", fl::to_string(rep.init)},
                                      {"max_deviation", rep.max_deviation},
                                      {"mean_deviation", rep.mean_deviation},
                                      {"tolerance", rep.tolerance},
                                      {"pass", rep.pass}});
      std::cout << (rep.pass ? "PASS" : "FAIL") << " " << fl::to_string(rep.oracle) << " max deviation "
                << rep.max_deviation << " (tolerance " << rep.tolerance << ")\n";
      if (!rep.pass) status = kExitNumerical;
    }

    writer.finish();
    return status;
  } catch (const fl::InvalidArgument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const fl::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
