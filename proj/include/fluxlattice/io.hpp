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

// File formats: lattice and device JSON, population-trace CSV/JSON,
// crosstalk CSV, SHA-256 content hashes. Every JSON file carries
// "schema": 1.

#pragma once

#include <Eigen/Dense>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fluxlattice/device.hpp"
#include "fluxlattice/diagnostics.hpp"
#include "fluxlattice/dynamics.hpp"
#include "fluxlattice/lattice.hpp"
#include "fluxlattice/open_system.hpp"

namespace fluxlattice {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Hashing and plain files

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw Error("cannot allocate digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, data.data(), data.size()) == 1 && EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(what + ": " + e.what());
  }
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// Lattice files

struct LatticeConfig {
  RhombicLattice lattice = uniform_lattice(1, Flux::Zero);  // J = 1, detunings in units of J
  double j_mhz = 4.2;
  std::optional<std::vector<double>> dephasing;  // per flat site, units of J
  std::string hash;                              // SHA-256 of the canonical JSON
  json source;
};

/// Unit conversions between lab values and lattice units (J = 1).
inline double mhz_to_j(double mhz, double j_mhz) { return mhz / j_mhz; }
inline double us_to_inverse_j(double t_us, double j_mhz) { return 1.0 / (t_us * 2.0 * std::numbers::pi * j_mhz); }
inline double j_time_to_us(double jt, double j_mhz) { return jt / (2.0 * std::numbers::pi * j_mhz); }

namespace detail {

template <typename T>
T require(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw InvalidArgument(ctx + ": missing field \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(ctx + ": bad field \"" + key + "\": " + e.what());
  }
}

inline void check_schema(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw InvalidArgument(ctx + ": expected a JSON object");
  if (j.contains("schema") && j.at("schema") != kSchemaVersion) {
    throw InvalidArgument(ctx + ": unsupported schema " + j.at("schema").dump());
  }
}

inline double flux_value(const json& v, const std::string& ctx) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "pi" || s == "π") return std::numbers::pi;
    if (s == "0") return 0.0;
    throw InvalidArgument(ctx + ": flux must be 0 or \"pi\", got \"" + s + "\"");
  }
  if (v.is_number()) return v.get<double>();
  throw InvalidArgument(ctx + ": flux must be a number or \"pi\"");
}

inline Sign sign_value_from_json(const json& v, const std::string& ctx) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "+" || s == "plus" || s == "+1") return Sign::Plus;
    if (s == "-" || s == "minus" || s == "-1") return Sign::Minus;
  } else if (v.is_number()) {
    const double x = v.get<double>();
    if (x == 1.0) return Sign::Plus;
    if (x == -1.0) return Sign::Minus;
  }
  throw InvalidArgument(ctx + ": bond sign must be +1/-1 or \"+\"/\"-\"");
}

/// Scalar applies to every site; object maps "rail,cell" to a value.
inline std::vector<double> site_values(const json& v, int plaquettes, const std::string& ctx) {
  std::vector<double> out(site_count(plaquettes), 0.0);
  if (v.is_number()) {
    std::fill(out.begin(), out.end(), v.get<double>());
  } else if (v.is_object()) {
    for (const auto& [key, val] : v.items()) {
      SiteId s;
      try {
        s = parse_site(key);
      } catch (const InvalidArgument& e) {
        throw InvalidArgument(ctx + ": " + e.what());
      }
      if (!is_valid_site(s, plaquettes)) throw InvalidArgument(ctx + ": site " + key + " outside lattice");
      if (!val.is_number()) throw InvalidArgument(ctx + ": value for " + key + " is not a number");
      out[flat_index(s, plaquettes)] = val.get<double>();
    }
  } else {
    throw InvalidArgument(ctx + ": expected a number or an object keyed by site");
  }
  return out;
}

}  // namespace detail

inline LatticeConfig parse_lattice_config(const json& j, const std::string& ctx = "lattice") {
  detail::check_schema(j, ctx);
  LatticeConfig cfg;
  cfg.source = j;
  cfg.hash = sha256_hex(j.dump());
  const int l = detail::require<int>(j, "l", ctx);
  if (l < 1) throw InvalidArgument(ctx + ": l must be >= 1");
  if (j.contains("J_MHz")) cfg.j_mhz = detail::require<double>(j, "J_MHz", ctx);
  if (!(cfg.j_mhz > 0) || !std::isfinite(cfg.j_mhz)) throw InvalidArgument(ctx + ": J_MHz must be positive");

  if (!j.contains("fluxes") || !j.at("fluxes").is_array()) throw InvalidArgument(ctx + ": \"fluxes\" must be an array");
  std::vector<Flux> fluxes;
  for (const auto& f : j.at("fluxes")) {
    try {
      fluxes.push_back(flux_from_phase(detail::flux_value(f, ctx)));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(ctx + ": " + e.what());
    }
  }
  if (fluxes.size() != static_cast<std::size_t>(l)) {
    throw InvalidArgument(ctx + ": expected " + std::to_string(l) + " fluxes, got " + std::to_string(fluxes.size()));
  }

  std::map<SiteId, double> detunings;
  if (j.contains("detunings")) {
    const auto mhz = detail::site_values(j.at("detunings"), l, ctx + " detunings");
    for (std::size_t i = 0; i < mhz.size(); ++i) {
      if (mhz[i] != 0.0) detunings[site_at(i, l)] = mhz_to_j(mhz[i], cfg.j_mhz);
    }
  }

  auto bonds = default_bonds(fluxes);
  if (j.contains("gauge")) {
    if (!j.at("gauge").is_array()) throw InvalidArgument(ctx + ": \"gauge\" must be an array of bond overrides");
    for (const auto& g : j.at("gauge")) {
      const SiteId from = parse_site(detail::require<std::string>(g, "from", ctx + " gauge"));
      const SiteId to = parse_site(detail::require<std::string>(g, "to", ctx + " gauge"));
      auto it = std::find_if(bonds.begin(), bonds.end(), [&](const Bond& b) {
        return (b.from == from && b.to == to) || (b.from == to && b.to == from);
      });
      if (it == bonds.end()) throw InvalidArgument(ctx + ": gauge override names a non-existent bond");
      if (g.contains("sign")) it->sign = detail::sign_value_from_json(g.at("sign"), ctx + " gauge");
      if (g.contains("scale")) it->magnitude_scale = detail::require<double>(g, "scale", ctx + " gauge");
    }
  }
  try {
    cfg.lattice = build_lattice_from_bonds(l, bonds, detunings, 1.0);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(ctx + ": " + e.what());
  }
  if (j.contains("gauge")) {
    const auto built = cfg.lattice.fluxes();
    if (built != fluxes) throw InvalidArgument(ctx + ": gauge overrides change the plaquette fluxes listed in \"fluxes\"");
  }

  if (j.contains("dephasing_us") && j.contains("dephasing_over_J")) {
    throw InvalidArgument(ctx + ": give either dephasing_us or dephasing_over_J, not both");
  }
  if (j.contains("dephasing_us")) {
    auto t = detail::site_values(j.at("dephasing_us"), l, ctx + " dephasing_us");
    for (auto& x : t) {
      if (x < 0 || !std::isfinite(x)) throw InvalidArgument(ctx + ": dephasing times must be positive");
      x = x == 0.0 ? 0.0 : us_to_inverse_j(x, cfg.j_mhz);
    }
    cfg.dephasing = t;
  } else if (j.contains("dephasing_over_J")) {
    auto g = detail::site_values(j.at("dephasing_over_J"), l, ctx + " dephasing_over_J");
    for (double x : g) {
      if (x < 0 || !std::isfinite(x)) throw InvalidArgument(ctx + ": dephasing rates must be finite and >= 0");
    }
    cfg.dephasing = g;
  }
  return cfg;
}

inline LatticeConfig load_lattice_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InvalidArgument("lattice file not found: " + path.string());
  return parse_lattice_config(parse_json_text(read_text_file(path), path.string()), path.string());
}

inline json flux_list_json(const std::vector<Flux>& fluxes) {
  json a = json::array();
  for (auto f : fluxes) {
    if (f == Flux::Pi) {
      a.push_back("pi");
    } else {
      a.push_back(0);
    }
  }
  return a;
}

// ---------------------------------------------------------------------------
// Population traces

/// CSV with header "Jt,n_<label>,..." and optional extra columns.
inline std::string trace_to_csv(const PopulationTrace& trace,
                                const std::vector<std::pair<std::string, std::vector<double>>>& extra = {}) {
  const auto rows = trace.times.size();
  if (static_cast<std::size_t>(trace.populations.rows()) != rows) throw InvalidArgument("trace rows do not match times");
  if (trace.labels.size() != trace.num_sites()) throw InvalidArgument("trace labels do not match sites");
  for (const auto& [name, col] : extra) {
    if (col.size() != rows) throw InvalidArgument("extra column " + name + " has the wrong length");
  }
  std::string out = "Jt";
  for (const auto& l : trace.labels) out += ",n_" + l;
  for (const auto& [name, col] : extra) out += "," + name;
  out += "\n";
  for (std::size_t r = 0; r < rows; ++r) {
    out += format_double(trace.times[r]);
    for (Eigen::Index c = 0; c < trace.populations.cols(); ++c) {
      out += "," + format_double(trace.populations(static_cast<Eigen::Index>(r), c));
    }
    for (const auto& [name, col] : extra) out += "," + format_double(col[r]);
    out += "\n";
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(' ');
    const auto e = s.find_last_not_of(' ');
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

inline double parse_number(const std::string& s, const std::string& ctx) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument(ctx + ": not a number: \"" + s + "\"");
  }
}

}  // namespace detail

/// Reads the population columns ("n_*") of a trace CSV; other columns are
/// ignored.
inline PopulationTrace trace_from_csv(const std::string& text, const std::string& ctx = "trace") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(ctx + ": empty file");
  const auto header = detail::split(line, ',');
  if (header.empty() || header[0] != "Jt") throw InvalidArgument(ctx + ": first column must be Jt");
  std::vector<std::size_t> cols;
  PopulationTrace t;
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i].rfind("n_", 0) == 0) {
      cols.push_back(i);
      t.labels.push_back(header[i].substr(2));
    }
  }
  if (cols.empty()) throw InvalidArgument(ctx + ": no population columns");
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split(line, ',');
    if (f.size() != header.size()) throw InvalidArgument(ctx + ": row " + std::to_string(lineno) + " has the wrong width");
    t.times.push_back(detail::parse_number(f[0], ctx));
    std::vector<double> r;
    for (auto c : cols) r.push_back(detail::parse_number(f[c], ctx));
    rows.push_back(std::move(r));
  }
  t.populations.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      t.populations(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return t;
}

inline PopulationTrace load_trace_csv(const std::filesystem::path& path) {
  return trace_from_csv(read_text_file(path), path.string());
}

struct TraceMetadata {
  std::string lattice_hash;
  std::vector<Flux> fluxes;
  double delta = 0.0;
  std::string init;
};

inline json trace_to_json(const PopulationTrace& trace, const TraceMetadata& meta) {
  json j;
  j["schema"] = kSchemaVersion;
  j["lattice_hash"] = meta.lattice_hash;
  j["fluxes"] = flux_list_json(meta.fluxes);
  j["delta"] = meta.delta;
  if (!meta.init.empty()) j["init"] = meta.init;
  j["labels"] = trace.labels;
  j["Jt"] = trace.times;
  json pops = json::array();
  for (Eigen::Index r = 0; r < trace.populations.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(trace.populations.cols()));
    for (Eigen::Index c = 0; c < trace.populations.cols(); ++c) row[static_cast<std::size_t>(c)] = trace.populations(r, c);
    pops.push_back(row);
  }
  j["populations"] = pops;
  return j;
}

// ---------------------------------------------------------------------------
// Device and crosstalk files

struct CouplerEntry {
  std::string name;
  CouplerSpec spec;
};

struct DeviceConfig {
  std::vector<QubitSpec> qubits;
  std::vector<CouplerEntry> couplers;
  std::string hash;
};

inline DeviceConfig parse_device_config(const json& j, const std::string& ctx = "device") {
  detail::check_schema(j, ctx);
  DeviceConfig d;
  d.hash = sha256_hex(j.dump());
  if (j.contains("qubits")) {
    for (const auto& q : j.at("qubits")) {
      QubitSpec s;
      s.name = detail::require<std::string>(q, "name", ctx);
      s.omega_min = detail::require<double>(q, "omega_min_GHz", ctx);
      s.omega_max = detail::require<double>(q, "omega_max_GHz", ctx);
      s.omega_idle = q.value("omega_idle_GHz", 0.0);
      s.omega_readout = q.value("omega_r_GHz", 0.0);
      s.t1_us = q.value("T1_us", 0.0);
      s.t2phi_us = q.value("T2phi_us", 0.0);
      (void)s.tune();
      d.qubits.push_back(s);
    }
  }
  if (j.contains("couplers")) {
    for (const auto& c : j.at("couplers")) {
      CouplerEntry e;
      e.name = c.value("name", std::string("coupler"));
      e.spec.omega_a = detail::require<double>(c, "omega_a_GHz", ctx);
      e.spec.omega_b = detail::require<double>(c, "omega_b_GHz", ctx);
      e.spec.omega_c = c.value("omega_c_GHz", 0.0);
      e.spec.u_a = c.value("U_a_GHz", 0.0);
      e.spec.u_b = c.value("U_b_GHz", 0.0);
      e.spec.u_c = c.value("U_c_GHz", 0.0);
      e.spec.g_ac = detail::require<double>(c, "g_ac_GHz", ctx);
      e.spec.g_bc = detail::require<double>(c, "g_bc_GHz", ctx);
      e.spec.g_ab = detail::require<double>(c, "g_ab_GHz", ctx);
      d.couplers.push_back(e);
    }
  }
  return d;
}

inline DeviceConfig load_device_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InvalidArgument("device file not found: " + path.string());
  return parse_device_config(parse_json_text(read_text_file(path), path.string()), path.string());
}

/// Square matrix CSV; the first row holds the line labels.
inline CrosstalkMatrix crosstalk_from_csv(const std::string& text, const std::string& ctx = "crosstalk") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(ctx + ": empty file");
  const auto labels = detail::split(line, ',');
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> r;
    for (const auto& f : detail::split(line, ',')) r.push_back(detail::parse_number(f, ctx));
    if (r.size() != labels.size()) throw InvalidArgument(ctx + ": row width does not match the header");
    rows.push_back(std::move(r));
  }
  if (rows.size() != labels.size()) throw InvalidArgument(ctx + ": matrix is not square");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows.size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return CrosstalkMatrix(m, labels);
}

/// Two-column CSV "source,target" of compensation points.
inline CrosstalkSamples crosstalk_samples_from_csv(const std::string& text, const std::string& ctx = "crosstalk data") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(ctx + ": empty file");
  const auto header = detail::split(line, ',');
  if (header.size() != 2) throw InvalidArgument(ctx + ": expected two columns (source,target)");
  CrosstalkSamples s;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 2) throw InvalidArgument(ctx + ": expected two columns per row");
    s.source.push_back(detail::parse_number(f[0], ctx));
    s.target.push_back(detail::parse_number(f[1], ctx));
  }
  return s;
}

}  // namespace fluxlattice
