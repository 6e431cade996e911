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

// Bloch Hamiltonians, band structures and Wilson-loop Zak phases.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fluxlattice/diagnostics.hpp"
#include "fluxlattice/lattice.hpp"

namespace fluxlattice {

/// Cell basis (A, up, dn). Intra-cell positions all sit at the cell origin.
inline Eigen::Matrix3cd rhombic_bloch(double k, double coupling, double phi) {
  const Flux flux = flux_from_phase(phi);
  const cplx ek = std::polar(1.0, -k);
  const cplx twist = flux == Flux::Pi ? cplx(-1.0) : cplx(1.0);
  Eigen::Matrix3cd h = Eigen::Matrix3cd::Zero();
  h(0, 1) = -coupling * (1.0 + ek);
  h(0, 2) = -coupling * (1.0 + twist * ek);
  h(1, 0) = std::conj(h(0, 1));
  h(2, 0) = std::conj(h(0, 2));
  return h;
}

/// Cell basis (-, A, +): -sqrt2 J inside the cell, Delta e^{-ik} from + of
/// one cell to - of the next.
inline Eigen::Matrix3cd trimer_bloch(double k, double coupling, double delta) {
  if (!(coupling > 0) || !std::isfinite(coupling)) throw InvalidArgument("trimer coupling J must be positive");
  if (!(delta >= 0) || !std::isfinite(delta)) throw InvalidArgument("trimer inter-cell coupling must be >= 0");
  const double t = std::numbers::sqrt2 * coupling;
  Eigen::Matrix3cd h = Eigen::Matrix3cd::Zero();
  h(0, 1) = -t;
  h(1, 0) = -t;
  h(1, 2) = -t;
  h(2, 1) = -t;
  h(2, 0) = delta * std::polar(1.0, -k);
  h(0, 2) = std::conj(h(2, 0));
  return h;
}

struct BlochModel {
  std::string name;
  int basis_size = 3;
  std::function<Eigen::MatrixXcd(double)> builder;
  double coupling = 1.0;  // energy scale for gap thresholds

  Eigen::MatrixXcd operator()(double k) const { return builder(k); }

  static BlochModel rhombic(double coupling, double phi) {
    (void)flux_from_phase(phi);
    return {"rhombic", 3, [coupling, phi](double k) -> Eigen::MatrixXcd { return rhombic_bloch(k, coupling, phi); },
            coupling};
  }

  static BlochModel trimer(double coupling, double delta) {
    (void)trimer_bloch(0.0, coupling, delta);
    return {"trimer", 3, [coupling, delta](double k) -> Eigen::MatrixXcd { return trimer_bloch(k, coupling, delta); },
            coupling};
  }
};

struct BandStructure {
  std::vector<double> k_grid;
  Eigen::MatrixXd energies;  // [k x band], ascending per row

  int num_bands() const { return static_cast<int>(energies.cols()); }

  double bandwidth(int band) const {
    const auto c = energies.col(band);
    return c.maxCoeff() - c.minCoeff();
  }

  std::vector<double> bandwidths() const {
    std::vector<double> out;
    for (int b = 0; b < num_bands(); ++b) out.push_back(bandwidth(b));
    return out;
  }
};

/// Uniform grid of n_k points over [-pi, pi] inclusive.
inline BandStructure band_structure(const BlochModel& model, std::size_t n_k) {
  if (n_k < 3) throw InvalidArgument("band structure needs n_k >= 3");
  BandStructure bs;
  bs.energies.resize(static_cast<Eigen::Index>(n_k), model.basis_size);
  for (std::size_t i = 0; i < n_k; ++i) {
    const double k = -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_k - 1);
    bs.k_grid.push_back(k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(model(k), Eigen::EigenvaluesOnly);
    bs.energies.row(static_cast<Eigen::Index>(i)) = es.eigenvalues().transpose();
  }
  return bs;
}

struct ZakResult {
  int band = 0;
  double raw = 0.0;               // in (-pi, pi]
  std::optional<double> snapped;  // 0 or pi when within the snap tolerance
  double min_gap = 0.0;           // to the neighboring bands over the grid
};

inline double wrap_phase(double x) {
  double y = std::remainder(x, 2.0 * std::numbers::pi);
  if (y <= -std::numbers::pi) y += 2.0 * std::numbers::pi;
  return y;
}

inline std::optional<double> snap_zak(double raw, double tol = 0.05) {
  if (std::abs(raw) <= tol) return 0.0;
  if (std::numbers::pi - std::abs(raw) <= tol) return std::numbers::pi;
  return std::nullopt;
}

/// -arg prod_m <u_m|u_{m+1}> over a closed loop of states, the last one
/// linking back to the first.
inline double wilson_loop_phase(std::span<const Eigen::VectorXcd> states) {
  if (states.size() < 2) throw InvalidArgument("Wilson loop needs at least two states");
  cplx prod = 1.0;
  for (std::size_t m = 0; m < states.size(); ++m) {
    const auto& a = states[m];
    const auto& b = states[(m + 1) % states.size()];
    const cplx link = a.dot(b);
    prod *= link / std::abs(link);
  }
  return wrap_phase(-std::arg(prod));
}

struct BandStates {
  std::vector<Eigen::VectorXcd> states;
  double min_gap = std::numeric_limits<double>::infinity();
};

/// Eigenvectors of one band on k_m = 2 pi m / n_k, m = 0..n_k-1.
inline BandStates band_states(const BlochModel& model, int band, std::size_t n_k) {
  if (band < 0 || band >= model.basis_size) throw InvalidArgument("band index out of range");
  BandStates out;
  for (std::size_t m = 0; m < n_k; ++m) {
    const double k = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n_k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(model(k));
    const auto& e = es.eigenvalues();
    if (band > 0) out.min_gap = std::min(out.min_gap, e(band) - e(band - 1));
    if (band + 1 < model.basis_size) out.min_gap = std::min(out.min_gap, e(band + 1) - e(band));
    out.states.push_back(es.eigenvectors().col(band));
  }
  return out;
}

inline ZakResult zak_phase(const BlochModel& model, int band, std::size_t n_k = 512) {
  if (n_k < 64) throw InvalidArgument("Zak phase needs n_k >= 64");
  const auto bs = band_states(model, band, n_k);
  const double threshold = 1e-8 * std::abs(model.coupling);
  if (!(bs.min_gap > threshold)) {
    std::ostringstream msg;
    msg << "band " << band << " of " << model.name << " model touches a neighbor (min gap " << bs.min_gap << ")";
    throw GapClosureError(msg.str());
  }
  ZakResult r;
  r.band = band;
  r.raw = wilson_loop_phase(bs.states);
  r.snapped = snap_zak(r.raw);
  r.min_gap = bs.min_gap;
  return r;
}

}  // namespace fluxlattice
