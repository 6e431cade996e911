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

// Experiment procedures: caging benchmark, drive spectroscopy and adiabatic
// ground-state preparation. Everything is in units of J unless noted.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fluxlattice/diagnostics.hpp"
#include "fluxlattice/dynamics.hpp"
#include "fluxlattice/lattice.hpp"
#include "fluxlattice/open_system.hpp"
#include "fluxlattice/parallel.hpp"

namespace fluxlattice {

// ---------------------------------------------------------------------------
// Caging benchmark

/// Closed-form propagator of the single plaquette (l = 1, J = 1) in flat
/// order (A1, up1, dn1, A2), default gauge.
inline Eigen::Matrix4cd plaquette_propagator_closed_form(Flux flux, double jt) {
  const cplx i(0.0, 1.0);
  // Written in the (A1, up1, A2, dn1) ordering and permuted below.
  Eigen::Matrix4cd u;
  if (flux == Flux::Zero) {
    const double c = std::cos(jt);
    const double s = std::sin(jt);
    const cplx d = c * c;
    const cplx x = -i * s * c;
    const cplx o = -s * s;
    u << d, x, o, x,
         x, d, x, o,
         o, x, d, x,
         x, o, x, d;
  } else {
    const double c = std::cos(std::sqrt(2.0) * jt);
    const double s = std::sin(std::sqrt(2.0) * jt) / std::sqrt(2.0);
    u << c, -i * s, 0.0, -i * s,
         -i * s, c, -i * s, 0.0,
         0.0, -i * s, c, i * s,
         -i * s, 0.0, i * s, c;
  }
  const int perm[4] = {0, 1, 3, 2};  // ring order -> flat index
  Eigen::Matrix4cd out;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) out(perm[r], perm[c]) = u(r, c);
  }
  return out;
}

struct CagingResult {
  PopulationTrace trace;
  /// Max deviation from the closed-form single-plaquette populations;
  /// present only for l = 1.
  std::optional<double> analytic_deviation;
};

/// Uniform-flux chain with J = 1 and no detuning, excited on `init`.
inline CagingResult caging_benchmark(int plaquettes, Flux flux, SiteId init, std::span<const double> times) {
  const auto lattice = uniform_lattice(plaquettes, flux);
  if (!is_valid_site(init, plaquettes)) throw InvalidArgument("initial site " + to_string(init) + " outside lattice");
  const auto psi0 = StateVector::localized(lattice, init);
  CagingResult res;
  res.trace = evolve_unitary(hamiltonian_single_excitation(lattice), psi0, times, site_labels(plaquettes));
  if (plaquettes == 1) {
    const auto col = static_cast<Eigen::Index>(flat_index(init, 1));
    double worst = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const Eigen::Matrix4cd u = plaquette_propagator_closed_form(flux, times[k]);
      for (Eigen::Index r = 0; r < 4; ++r) {
        worst = std::max(worst, std::abs(std::norm(u(r, col)) - res.trace.populations(static_cast<Eigen::Index>(k), r)));
      }
    }
    res.analytic_deviation = worst;
  }
  return res;
}

/// Sites that a pi-flux excitation starting on `init` may reach: the
/// A site's own cage {A_j, up_j, dn_j, up_{j-1}, dn_{j-1}}, or for a rail
/// site the union of the two cages it touches.
inline std::vector<SiteId> caging_region(int plaquettes, SiteId init) {
  std::vector<SiteId> out;
  auto add_cage = [&](int j) {
    if (j < 1 || j > plaquettes + 1) return;
    out.push_back({Rail::A, j});
    for (int c : {j - 1, j}) {
      if (c >= 1 && c <= plaquettes) {
        out.push_back({Rail::Up, c});
        out.push_back({Rail::Down, c});
      }
    }
  };
  if (init.rail == Rail::A) {
    add_cage(init.cell);
  } else {
    add_cage(init.cell);
    add_cage(init.cell + 1);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Spectroscopy

struct SpectroscopyConfig {
  SiteId drive_site{Rail::A, 1};
  double drive_amplitude = 0.05;  // Omega, units of J
  std::vector<double> drive_detunings;
  double duration = 20.0;  // T, units of 1/J
};

struct SpectroscopyResult {
  std::vector<double> detunings;
  std::vector<double> excited_population;
  std::vector<double> peaks;  // sorted
  std::vector<std::string> warnings;
};

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {a};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

/// Excited population, time-averaged over [3T/4, T], after driving the
/// vacuum for time T at drive detuning delta. Evaluated exactly from the
/// eigendecomposition of the rotating-frame Hamiltonian
///   H_rot = (H - delta N) + Omega (|1_d><vac| + h.c.).
inline double spectroscopy_point(const Eigen::MatrixXcd& h_single, std::size_t drive, double omega, double delta,
                                 double duration) {
  const auto n = h_single.rows();
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n + 1, n + 1);
  h.bottomRightCorner(n, n) = h_single - delta * Eigen::MatrixXcd::Identity(n, n);
  const auto d = static_cast<Eigen::Index>(drive) + 1;
  h(0, d) = omega;
  h(d, 0) = omega;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  const Eigen::VectorXd& e = es.eigenvalues();
  // Vacuum amplitude <vac|psi(t)> = sum_k w_k exp(-i e_k t), w_k = |<k|vac>|^2.
  const Eigen::VectorXd w = es.eigenvectors().row(0).cwiseAbs2().transpose();
  const double t0 = 0.75 * duration;
  const double t1 = duration;
  const double span = t1 - t0;
  double avg = 0.0;
  for (Eigen::Index a = 0; a < e.size(); ++a) {
    for (Eigen::Index b = 0; b < e.size(); ++b) {
      const double dw = e(a) - e(b);
      double mean_cos = 1.0;
      if (std::abs(dw) * span > 1e-12) mean_cos = (std::sin(dw * t1) - std::sin(dw * t0)) / (dw * span);
      avg += w(a) * w(b) * mean_cos;
    }
  }
  return std::clamp(1.0 - avg, 0.0, 1.0);
}

/// Local maxima above 3x the median of P. A maximum that has a larger
/// candidate within 4 pi / T is a sidelobe of that line and is dropped.
inline std::vector<double> detect_peaks(std::span<const double> x, std::span<const double> p, double duration) {
  std::vector<double> sorted(p.begin(), p.end());
  if (sorted.size() < 3) return {};
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2), sorted.end());
  double median = sorted[sorted.size() / 2];
  if (sorted.size() % 2 == 0) {
    const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2));
    median = 0.5 * (median + lower);
  }
  const double threshold = 3.0 * median;
  std::vector<std::size_t> cand;
  for (std::size_t i = 1; i + 1 < p.size(); ++i) {
    if (p[i] > p[i - 1] && p[i] >= p[i + 1] && p[i] > threshold) cand.push_back(i);
  }
  const double window = 4.0 * std::numbers::pi / duration;
  std::vector<double> peaks;
  for (auto i : cand) {
    bool dominated = false;
    for (auto j : cand) {
      if (j != i && std::abs(x[j] - x[i]) <= window && p[j] > p[i]) dominated = true;
    }
    if (!dominated) peaks.push_back(x[i]);
  }
  std::sort(peaks.begin(), peaks.end());
  return peaks;
}

inline SpectroscopyResult spectroscopy(const RhombicLattice& lattice, const SpectroscopyConfig& cfg, unsigned jobs = 1) {
  if (cfg.drive_detunings.empty()) throw InvalidArgument("drive detuning grid is empty");
  if (!(cfg.drive_amplitude >= 0) || !std::isfinite(cfg.drive_amplitude)) {
    throw InvalidArgument("drive amplitude must be finite and >= 0");
  }
  if (!(cfg.duration > 0) || !std::isfinite(cfg.duration)) throw InvalidArgument("drive duration must be positive");
  for (double d : lattice.detunings()) {
    if (d != 0.0) throw InvalidArgument("spectroscopy requires all qubits on resonance (zero detunings)");
  }
  const auto drive = flat_index(cfg.drive_site, lattice.plaquettes());
  const auto h = hamiltonian_single_excitation(lattice);

  SpectroscopyResult res;
  const Eigen::VectorXd e = h.eigenvalues();
  double min_gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 1; k < e.size(); ++k) {
    const double g = e(k) - e(k - 1);
    if (g > 1e-9) min_gap = std::min(min_gap, g);
  }
  if (cfg.drive_amplitude > min_gap / 4.0) {
    std::ostringstream msg;
    msg << "drive amplitude " << cfg.drive_amplitude << " exceeds a quarter of the minimum level spacing " << min_gap
        << "; peaks may merge";
    res.warnings.push_back(msg.str());
  }

  res.detunings = cfg.drive_detunings;
  res.excited_population.resize(res.detunings.size());
  parallel_for(res.detunings.size(), jobs, [&](std::size_t i) {
    res.excited_population[i] = cfg.drive_amplitude == 0.0
                                    ? 0.0
                                    : spectroscopy_point(h.matrix(), drive, cfg.drive_amplitude, res.detunings[i], cfg.duration);
  });
  res.peaks = detect_peaks(res.detunings, res.excited_population, cfg.duration);
  return res;
}

// ---------------------------------------------------------------------------
// Adiabatic preparation

/// One linear piece: coupling J and per-site detunings (flat order) move
/// linearly from start to end over `duration`.
struct RampSegment {
  double duration = 0.0;
  double coupling_start = 0.0;
  double coupling_end = 0.0;
  std::vector<double> detuning_start;
  std::vector<double> detuning_end;
};

class RampSchedule {
 public:
  RampSchedule() = default;

  explicit RampSchedule(std::vector<RampSegment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw InvalidArgument("ramp schedule needs at least one segment");
    const std::size_t n = segments_.front().detuning_start.size();
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      const auto& s = segments_[i];
      if (!std::isfinite(s.duration) || s.duration < 0) throw InvalidArgument("segment durations must be >= 0");
      if (s.detuning_start.size() != n || s.detuning_end.size() != n) {
        throw InvalidArgument("segment detuning vectors differ in size");
      }
      if (i > 0) {
        const auto& p = segments_[i - 1];
        bool continuous = std::abs(p.coupling_end - s.coupling_start) <= 1e-12;
        for (std::size_t k = 0; k < n; ++k) continuous = continuous && std::abs(p.detuning_end[k] - s.detuning_start[k]) <= 1e-12;
        if (!continuous) throw InvalidArgument("ramp schedule is discontinuous at segment " + std::to_string(i));
      }
    }
  }

  const std::vector<RampSegment>& segments() const { return segments_; }
  std::size_t num_sites() const { return segments_.empty() ? 0 : segments_.front().detuning_start.size(); }

  double total_duration() const {
    double t = 0.0;
    for (const auto& s : segments_) t += s.duration;
    return t;
  }

  double coupling_at(double t) const {
    const auto [seg, x] = locate(t);
    return seg->coupling_start + x * (seg->coupling_end - seg->coupling_start);
  }

  std::vector<double> detunings_at(double t) const {
    const auto [seg, x] = locate(t);
    std::vector<double> out(seg->detuning_start.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = seg->detuning_start[k] + x * (seg->detuning_end[k] - seg->detuning_start[k]);
    }
    return out;
  }

  /// Bound on max |J(t)| and max |Delta(t)|; values are linear per segment
  /// so endpoints suffice.
  double max_coupling() const {
    double m = 0.0;
    for (const auto& s : segments_) m = std::max({m, std::abs(s.coupling_start), std::abs(s.coupling_end)});
    return m;
  }

  double max_detuning() const {
    double m = 0.0;
    for (const auto& s : segments_) {
      for (double d : s.detuning_start) m = std::max(m, std::abs(d));
      for (double d : s.detuning_end) m = std::max(m, std::abs(d));
    }
    return m;
  }

 private:
  std::pair<const RampSegment*, double> locate(double t) const {
    if (segments_.empty()) throw InvalidArgument("empty ramp schedule");
    double start = 0.0;
    for (const auto& s : segments_) {
      if (t < start + s.duration) return {&s, s.duration > 0 ? (t - start) / s.duration : 1.0};
      start += s.duration;
    }
    return {&segments_.back(), 1.0};
  }

  std::vector<RampSegment> segments_;
};

/// Two linear segments of equal length: J goes 0 -> J_final with the init
/// site held at `initial_detuning` (others at their final values), then the
/// init-site detuning goes to its final value.
inline RampSchedule default_ramp(const RhombicLattice& target, SiteId init, double total_duration = 30.0,
                                 double initial_detuning = -4.0) {
  if (!std::isfinite(total_duration) || total_duration < 0) throw InvalidArgument("ramp duration must be >= 0");
  const auto idx = flat_index(init, target.plaquettes());
  std::vector<double> start = target.detunings();
  start[idx] = target.detunings()[idx] + initial_detuning * target.coupling();
  const double half = 0.5 * total_duration;
  return RampSchedule({
      RampSegment{half, 0.0, target.coupling(), start, start},
      RampSegment{half, target.coupling(), target.coupling(), start, target.detunings()},
  });
}

struct AdiabaticOptions {
  std::size_t samples = 101;
  double step_limit = 0.05;
};

struct AdiabaticResult {
  std::vector<double> sample_times;
  std::vector<double> ground_overlap;  // |<gs(t)|psi(t)>|^2 (or tr(P_gs rho))
  PopulationTrace trace;               // site populations at the samples
  Eigen::VectorXd final_populations;
  Eigen::VectorXd ideal_populations;   // closed-system final populations
  Eigen::VectorXd ground_populations;  // n_th of the target ground state
  double final_ground_overlap = 0.0;
  double fidelity = 0.0;               // F(final, ground)
  double fidelity_raw = 0.0;
  double fidelity_vs_ideal = 0.0;      // F(final, closed-system final)
  std::vector<std::string> warnings;
};

namespace detail {

struct GroundSpace {
  Eigen::MatrixXcd vectors;  // columns span the lowest eigenspace
  double gap = 0.0;          // to the next distinct level (inf if none)
};

inline GroundSpace ground_space(const Eigen::MatrixXcd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  const Eigen::VectorXd& e = es.eigenvalues();
  const double tol = 1e-9 * std::max(1.0, std::abs(e(0)));
  Eigen::Index k = 1;
  while (k < e.size() && e(k) - e(0) <= tol) ++k;
  GroundSpace g;
  g.vectors = es.eigenvectors().leftCols(k);
  g.gap = k < e.size() ? e(k) - e(0) : std::numeric_limits<double>::infinity();
  return g;
}

}  // namespace detail

/// Ramps from the decoupled start (J = 0, init site detuned > 3 J below
/// every other site) to `target`. Closed evolution integrates the
/// Schroedinger equation with RK4 on the time-dependent H; with `rates` the
/// Lindblad integrator is used instead. The reference ground state is the
/// target's lowest eigenspace projected onto the ideal closed-system final
/// state, which resolves degenerate ground levels.
inline AdiabaticResult adiabatic_prepare(const RhombicLattice& target, const RampSchedule& schedule, SiteId init,
                                         const std::optional<DephasingRates>& rates = std::nullopt,
                                         const AdiabaticOptions& opt = {}) {
  const int l = target.plaquettes();
  const std::size_t n = target.num_sites();
  const auto init_idx = flat_index(init, l);
  if (schedule.num_sites() != n) throw InvalidArgument("schedule does not match the lattice size");
  if (opt.samples < 2) throw InvalidArgument("need at least two samples");

  const auto& first = schedule.segments().front();
  const auto& last = schedule.segments().back();
  if (std::abs(first.coupling_start) > 1e-12) throw InvalidArgument("schedule must start with the couplings off (J = 0)");
  for (std::size_t k = 0; k < n; ++k) {
    if (k != init_idx && !(first.detuning_start[k] - first.detuning_start[init_idx] > 3.0 * target.coupling())) {
      throw InvalidArgument("initial site must start detuned more than 3 J below every other site");
    }
  }
  const double end_tol = 1e-9 * std::max(1.0, target.coupling());
  bool ends_on_target = std::abs(last.coupling_end - target.coupling()) <= end_tol;
  for (std::size_t k = 0; k < n; ++k) ends_on_target = ends_on_target && std::abs(last.detuning_end[k] - target.detunings()[k]) <= end_tol;
  if (!ends_on_target) throw InvalidArgument("schedule must end on the target Hamiltonian");

  const Eigen::MatrixXcd hop = hopping_matrix(target);
  auto h_single = [&](double t) {
    Eigen::MatrixXcd h = schedule.coupling_at(t) * hop;
    const auto d = schedule.detunings_at(t);
    for (std::size_t k = 0; k < n; ++k) h(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) += d[k];
    return h;
  };
  const double norm_bound = schedule.max_coupling() * row_sum_norm(hop) + schedule.max_detuning();
  const double total = schedule.total_duration();

  AdiabaticResult res;
  res.sample_times = linspace(0.0, total, opt.samples);
  res.trace.times = res.sample_times;
  res.trace.labels = site_labels(l);
  res.trace.populations.resize(static_cast<Eigen::Index>(opt.samples), static_cast<Eigen::Index>(n));

  // Closed evolution (always run: it defines the ideal final state).
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n));
  psi(static_cast<Eigen::Index>(init_idx)) = 1.0;
  std::vector<Eigen::VectorXcd> closed_states;
  {
    const cplx minus_i(0.0, -1.0);
    auto rhs = [&](double t, const Eigen::VectorXcd& v) -> Eigen::VectorXcd { return minus_i * (h_single(t) * v); };
    double t = 0.0;
    for (std::size_t k = 0; k < opt.samples; ++k) {
      const double interval = res.sample_times[k] - t;
      if (interval > 0) {
        const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(interval * norm_bound / opt.step_limit - 1e-12)));
        const double h = interval / static_cast<double>(m);
        for (std::size_t s = 0; s < m; ++s) {
          const double ts = t + static_cast<double>(s) * h;
          const Eigen::VectorXcd k1 = rhs(ts, psi);
          const Eigen::VectorXcd k2 = rhs(ts + 0.5 * h, psi + 0.5 * h * k1);
          const Eigen::VectorXcd k3 = rhs(ts + 0.5 * h, psi + 0.5 * h * k2);
          const Eigen::VectorXcd k4 = rhs(ts + h, psi + h * k3);
          psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        t = res.sample_times[k];
      }
      closed_states.push_back(psi);
    }
  }
  const Eigen::VectorXcd ideal = closed_states.back();
  res.ideal_populations = ideal.cwiseAbs2();

  std::optional<LindbladResult> open;
  if (rates) {
    const auto flat = rates->flat(l);
    LindbladOptions lo;
    lo.step_limit = opt.step_limit;
    lo.keep_snapshots = true;
    open = lindblad_evolve_driven([&](double t) { return embed_with_vacuum(h_single(t)); }, norm_bound, flat,
                                  DensityMatrix::from_single_excitation(StateVector::basis(n, init_idx)),
                                  res.sample_times, lo, site_labels(l));
  }

  bool warned = false;
  for (std::size_t k = 0; k < opt.samples; ++k) {
    const double t = res.sample_times[k];
    const auto gs = detail::ground_space(h_single(t));
    if (!warned && gs.gap < 1e-6 * std::max(1.0, target.coupling())) {
      std::ostringstream msg;
      msg << "near level crossing: ground gap " << gs.gap << " at t=" << t;
      res.warnings.push_back(msg.str());
      warned = true;
    }
    const auto row = static_cast<Eigen::Index>(k);
    if (open) {
      const Eigen::MatrixXcd rho = open->snapshots[k].bottomRightCorner(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      res.ground_overlap.push_back((gs.vectors.adjoint() * rho * gs.vectors).trace().real());
      res.trace.populations.row(row) = open->trace.populations.row(row);
    } else {
      res.ground_overlap.push_back((gs.vectors.adjoint() * closed_states[k]).squaredNorm());
      res.trace.populations.row(row) = closed_states[k].cwiseAbs2().transpose();
    }
  }

  res.final_populations = res.trace.populations.row(static_cast<Eigen::Index>(opt.samples - 1)).transpose();
  res.final_ground_overlap = res.ground_overlap.back();

  const auto gs = detail::ground_space(hamiltonian_single_excitation(target).matrix());
  Eigen::VectorXcd projected = gs.vectors * (gs.vectors.adjoint() * ideal);
  if (projected.norm() < 1e-8) {
    // Ideal state has no ground component at all; fall back to the first
    // ground vector so the fidelity is still defined.
    projected = gs.vectors.col(0);
    res.warnings.push_back("ideal final state is orthogonal to the ground space");
  }
  projected.normalize();
  res.ground_populations = projected.cwiseAbs2();

  Diagnostics diag;
  res.fidelity_raw = fidelity_raw(std::span<const double>(res.final_populations.data(), n),
                                  std::span<const double>(res.ground_populations.data(), n));
  res.fidelity = fidelity(res.final_populations, res.ground_populations, &diag);
  res.fidelity_vs_ideal = fidelity(res.final_populations, res.ideal_populations, &diag);
  for (const auto& w : diag.warnings()) res.warnings.push_back(w);
  return res;
}

}  // namespace fluxlattice
