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

// Rhombic (diamond) chain topology and its single-excitation Hamiltonian.
//
// A chain of l plaquettes has L = 3l+1 sites: A-rail sites (A,1)..(A,l+1)
// and rail sites (up,j), (dn,j) for j = 1..l. Plaquette j is the loop
// A_j - up_j - A_{j+1} - dn_j. The flat index order is
//
//   (A,1), (up,1), (dn,1), (A,2), (up,2), (dn,2), ..., (A,l+1)
//
// i.e. flat(A,j) = 3(j-1), flat(up,j) = 3(j-1)+1, flat(dn,j) = 3(j-1)+2.
//
// Couplings are real and signed. A bond with sign s contributes the matrix
// element -J * scale * s. The zero-flux default has every bond Minus (all
// matrix elements +J); a pi plaquette flips the bond A_{j+1} - dn_j to Plus.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <compare>
#include <complex>
#include <cstddef>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fluxlattice/diagnostics.hpp"

namespace fluxlattice {

using cplx = std::complex<double>;

enum class Rail { A, Up, Down };

struct SiteId {
  Rail rail = Rail::A;
  int cell = 1;

  auto operator<=>(const SiteId&) const = default;
};

inline std::size_t site_count(int plaquettes) {
  return 3 * static_cast<std::size_t>(plaquettes) + 1;
}

inline bool is_valid_site(SiteId s, int plaquettes) {
  if (s.cell < 1) return false;
  if (s.rail == Rail::A) return s.cell <= plaquettes + 1;
  return s.cell <= plaquettes;
}

inline std::size_t flat_index(SiteId s, int plaquettes) {
  if (!is_valid_site(s, plaquettes)) {
    throw InvalidArgument("site outside lattice of " + std::to_string(plaquettes) + " plaquettes");
  }
  const auto base = 3 * static_cast<std::size_t>(s.cell - 1);
  switch (s.rail) {
    case Rail::A: return base;
    case Rail::Up: return base + 1;
    case Rail::Down: return base + 2;
  }
  return base;
}

inline SiteId site_at(std::size_t index, int plaquettes) {
  if (index >= site_count(plaquettes)) throw InvalidArgument("flat index out of range");
  const int cell = static_cast<int>(index / 3) + 1;
  switch (index % 3) {
    case 0: return {Rail::A, cell};
    case 1: return {Rail::Up, cell};
    default: return {Rail::Down, cell};
  }
}

/// "A,1", "up,1", "dn,1".
inline std::string to_string(SiteId s) {
  const char* rail = s.rail == Rail::A ? "A" : (s.rail == Rail::Up ? "up" : "dn");
  return std::string(rail) + "," + std::to_string(s.cell);
}

/// Column label used in trace files: "A1", "up1", "dn1".
inline std::string column_label(SiteId s) {
  const char* rail = s.rail == Rail::A ? "A" : (s.rail == Rail::Up ? "up" : "dn");
  return std::string(rail) + std::to_string(s.cell);
}

inline std::vector<std::string> site_labels(int plaquettes) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < site_count(plaquettes); ++i) out.push_back(column_label(site_at(i, plaquettes)));
  return out;
}

/// Accepts "A,1", "A1", "up,2", "U2", "↑,2", "dn,1", "down,1", "D1", "↓,1".
inline SiteId parse_site(std::string_view text) {
  std::string s;
  for (char c : text) {
    if (c != ' ' && c != ',' && c != '_' && c != '(' && c != ')') s.push_back(c);
  }
  std::size_t digits = s.size();
  while (digits > 0 && std::isdigit(static_cast<unsigned char>(s[digits - 1])) != 0) --digits;
  if (digits == s.size() || digits == 0) throw InvalidArgument("cannot parse site '" + std::string(text) + "'");
  std::string rail = s.substr(0, digits);
  const int cell = std::stoi(s.substr(digits));
  std::transform(rail.begin(), rail.end(), rail.begin(), [](char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  });
  if (rail == "a") return {Rail::A, cell};
  if (rail == "up" || rail == "u" || rail == "\xe2\x86\x91") return {Rail::Up, cell};
  if (rail == "dn" || rail == "down" || rail == "d" || rail == "\xe2\x86\x93") return {Rail::Down, cell};
  throw InvalidArgument("unknown rail in site '" + std::string(text) + "'");
}

enum class Sign { Plus, Minus };

inline double sign_value(Sign s) { return s == Sign::Plus ? 1.0 : -1.0; }

enum class Flux { Zero, Pi };

inline double phase(Flux f) { return f == Flux::Zero ? 0.0 : std::numbers::pi; }

/// Maps a phase in radians onto {0, pi}. Only those two are realizable with
/// real-signed couplings; anything else is rejected.
inline Flux flux_from_phase(double radians) {
  if (!std::isfinite(radians)) throw InvalidArgument("non-finite flux");
  const double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(radians, two_pi);
  if (r < 0) r += two_pi;
  constexpr double tol = 1e-9;
  if (r < tol || two_pi - r < tol) return Flux::Zero;
  if (std::abs(r - std::numbers::pi) < tol) return Flux::Pi;
  throw InvalidArgument("flux must be 0 or pi, got " + std::to_string(radians));
}

struct Bond {
  SiteId from;  // A-rail site
  SiteId to;    // up or dn rail site
  Sign sign = Sign::Minus;
  double magnitude_scale = 1.0;
};

/// Dense complex matrix that is Hermitian to 1e-12 relative to its largest
/// entry. Checked once at construction.
class HermitianOperator {
 public:
  explicit HermitianOperator(Eigen::MatrixXcd entries) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols()) throw InvalidArgument("operator must be square");
    if (!entries_.allFinite()) throw InvalidArgument("operator has non-finite entries");
    const double scale = entries_.size() == 0 ? 0.0 : entries_.cwiseAbs().maxCoeff();
    const double asym = entries_.size() == 0 ? 0.0 : (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale) throw InvalidArgument("operator is not Hermitian");
  }

  std::size_t dim() const { return static_cast<std::size_t>(entries_.rows()); }
  const Eigen::MatrixXcd& matrix() const { return entries_; }

  Eigen::VectorXd eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(entries_, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }

 private:
  Eigen::MatrixXcd entries_;
};

class RhombicLattice;
RhombicLattice build_lattice_from_bonds(int plaquettes, std::vector<Bond> bonds,
                                        const std::map<SiteId, double>& detunings, double coupling);

/// Immutable lattice: plaquette count, signed bonds, on-site detunings and
/// the global coupling magnitude J.
class RhombicLattice {
 public:
  int plaquettes() const { return plaquettes_; }
  std::size_t num_sites() const { return site_count(plaquettes_); }
  double coupling() const { return coupling_; }
  const std::vector<Bond>& bonds() const { return bonds_; }

  /// Detunings in flat-index order.
  const std::vector<double>& detunings() const { return detunings_; }
  double detuning(SiteId s) const { return detunings_[flat_index(s, plaquettes_)]; }

  Flux plaquette_flux(int j) const {
    if (j < 1 || j > plaquettes_) throw InvalidArgument("plaquette index out of range");
    int minus = 0;
    for (const auto& b : bonds_) {
      if (plaquette_of(b) == j && b.sign == Sign::Minus) ++minus;
    }
    return (minus % 2 == 0) ? Flux::Zero : Flux::Pi;
  }

  std::vector<Flux> fluxes() const {
    std::vector<Flux> out;
    for (int j = 1; j <= plaquettes_; ++j) out.push_back(plaquette_flux(j));
    return out;
  }

  RhombicLattice with_coupling(double coupling) const {
    return build_lattice_from_bonds(plaquettes_, bonds_, detuning_map(), coupling);
  }

  RhombicLattice with_detunings(const std::map<SiteId, double>& detunings) const {
    return build_lattice_from_bonds(plaquettes_, bonds_, detunings, coupling_);
  }

  std::map<SiteId, double> detuning_map() const {
    std::map<SiteId, double> out;
    for (std::size_t i = 0; i < detunings_.size(); ++i) out[site_at(i, plaquettes_)] = detunings_[i];
    return out;
  }

  /// Plaquette containing a bond: the cell of its rail endpoint.
  static int plaquette_of(const Bond& b) { return b.to.cell; }

 private:
  friend RhombicLattice build_lattice_from_bonds(int, std::vector<Bond>, const std::map<SiteId, double>&, double);

  RhombicLattice() = default;

  int plaquettes_ = 0;
  double coupling_ = 0.0;
  std::vector<Bond> bonds_;
  std::vector<double> detunings_;
};

/// Validates topology and builds a lattice from an explicit bond list
/// (gauge overrides, disorder studies).
inline RhombicLattice build_lattice_from_bonds(int plaquettes, std::vector<Bond> bonds,
                                               const std::map<SiteId, double>& detunings, double coupling) {
  if (plaquettes < 1) throw InvalidArgument("need at least one plaquette");
  if (!std::isfinite(coupling) || coupling < 0) throw InvalidArgument("coupling magnitude J must be finite and >= 0");
  if (bonds.size() != 4 * static_cast<std::size_t>(plaquettes)) {
    throw InvalidArgument("expected exactly 4 bonds per plaquette");
  }
  std::vector<int> seen(4 * static_cast<std::size_t>(plaquettes), 0);
  for (const auto& b : bonds) {
    if (b.from.rail != Rail::A || b.to.rail == Rail::A) {
      throw InvalidArgument("bonds must connect an A-rail site to an up/dn-rail site");
    }
    if (!is_valid_site(b.from, plaquettes) || !is_valid_site(b.to, plaquettes)) {
      throw InvalidArgument("bond endpoint outside lattice");
    }
    if (b.from.cell != b.to.cell && b.from.cell != b.to.cell + 1) {
      throw InvalidArgument("bond " + to_string(b.from) + "-" + to_string(b.to) + " is not nearest-neighbour");
    }
    if (!std::isfinite(b.magnitude_scale) || b.magnitude_scale < 0) {
      throw InvalidArgument("bond magnitude_scale must be finite and >= 0");
    }
    const std::size_t slot = 4 * static_cast<std::size_t>(b.to.cell - 1) + (b.from.cell == b.to.cell ? 0 : 2) +
                             (b.to.rail == Rail::Up ? 0 : 1);
    if (seen[slot]++ != 0) throw InvalidArgument("duplicate bond " + to_string(b.from) + "-" + to_string(b.to));
  }

  RhombicLattice lat;
  lat.plaquettes_ = plaquettes;
  lat.coupling_ = coupling;
  lat.bonds_ = std::move(bonds);
  lat.detunings_.assign(site_count(plaquettes), 0.0);
  for (const auto& [site, value] : detunings) {
    if (!is_valid_site(site, plaquettes)) throw InvalidArgument("detuning given for site " + to_string(site) + " outside lattice");
    if (!std::isfinite(value)) throw InvalidArgument("non-finite detuning");
    lat.detunings_[flat_index(site, plaquettes)] = value;
  }
  return lat;
}

/// Default gauge: all bonds Minus, and for a pi plaquette the bond
/// A_{j+1} - dn_j is Plus.
inline std::vector<Bond> default_bonds(std::span<const Flux> fluxes) {
  std::vector<Bond> bonds;
  for (std::size_t idx = 0; idx < fluxes.size(); ++idx) {
    const int j = static_cast<int>(idx) + 1;
    bonds.push_back({{Rail::A, j}, {Rail::Up, j}, Sign::Minus, 1.0});
    bonds.push_back({{Rail::A, j}, {Rail::Down, j}, Sign::Minus, 1.0});
    bonds.push_back({{Rail::A, j + 1}, {Rail::Up, j}, Sign::Minus, 1.0});
    bonds.push_back({{Rail::A, j + 1}, {Rail::Down, j}, fluxes[idx] == Flux::Pi ? Sign::Plus : Sign::Minus, 1.0});
  }
  return bonds;
}

inline RhombicLattice build_lattice(int plaquettes, std::span<const Flux> fluxes,
                                    const std::map<SiteId, double>& detunings, double coupling) {
  if (plaquettes < 1) throw InvalidArgument("need at least one plaquette");
  if (fluxes.size() != static_cast<std::size_t>(plaquettes)) {
    throw InvalidArgument("expected " + std::to_string(plaquettes) + " plaquette fluxes, got " +
                          std::to_string(fluxes.size()));
  }
  return build_lattice_from_bonds(plaquettes, default_bonds(fluxes), detunings, coupling);
}

/// Flux values in radians; each must be 0 or pi (mod 2 pi).
inline RhombicLattice build_lattice(int plaquettes, std::span<const double> fluxes_rad,
                                    const std::map<SiteId, double>& detunings, double coupling) {
  if (fluxes_rad.size() != static_cast<std::size_t>(std::max(plaquettes, 0))) {
    throw InvalidArgument("expected " + std::to_string(plaquettes) + " plaquette fluxes, got " +
                          std::to_string(fluxes_rad.size()));
  }
  std::vector<Flux> f;
  for (double r : fluxes_rad) f.push_back(flux_from_phase(r));
  return build_lattice(plaquettes, std::span<const Flux>(f), detunings, coupling);
}

inline RhombicLattice uniform_lattice(int plaquettes, Flux flux, double coupling = 1.0,
                                      const std::map<SiteId, double>& detunings = {}) {
  std::vector<Flux> f(static_cast<std::size_t>(std::max(plaquettes, 0)), flux);
  return build_lattice(plaquettes, std::span<const Flux>(f), detunings, coupling);
}

/// Detuning +delta on every up site, -delta on every dn site, 0 on A.
inline std::map<SiteId, double> antisymmetric_detunings(int plaquettes, double delta) {
  std::map<SiteId, double> d;
  for (int j = 1; j <= plaquettes; ++j) {
    d[{Rail::Up, j}] = delta;
    d[{Rail::Down, j}] = -delta;
  }
  return d;
}

inline Flux plaquette_flux(const RhombicLattice& lattice, int j) { return lattice.plaquette_flux(j); }

/// Hopping part only (J = 1, no detunings); used by time-dependent ramps.
inline Eigen::MatrixXcd hopping_matrix(const RhombicLattice& lattice) {
  const auto n = static_cast<Eigen::Index>(lattice.num_sites());
  Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(n, n);
  const int l = lattice.plaquettes();
  for (const auto& b : lattice.bonds()) {
    const auto a = static_cast<Eigen::Index>(flat_index(b.from, l));
    const auto c = static_cast<Eigen::Index>(flat_index(b.to, l));
    const double v = -b.magnitude_scale * sign_value(b.sign);
    k(a, c) += v;
    k(c, a) += v;
  }
  return k;
}

/// L x L matrix on the single-excitation states |1_site>: detunings on the
/// diagonal, -J * scale * sign on each bond. The vacuum decouples and is
/// not included.
inline HermitianOperator hamiltonian_single_excitation(const RhombicLattice& lattice) {
  Eigen::MatrixXcd h = lattice.coupling() * hopping_matrix(lattice);
  for (std::size_t i = 0; i < lattice.num_sites(); ++i) {
    h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += lattice.detunings()[i];
  }
  return HermitianOperator(std::move(h));
}

}  // namespace fluxlattice
