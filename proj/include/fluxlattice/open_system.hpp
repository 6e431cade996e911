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

// Lindblad evolution with per-site dephasing on the vacuum (+) single-
// excitation space, and the population-distribution fidelity.
//
// Density matrices have dimension L+1: index 0 is the vacuum, index i+1 is
// |1_i> for flat site index i. Dephasing on site i uses the collapse
// operator sqrt(gamma_i) |1_i><1_i|, which conserves excitation number.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fluxlattice/diagnostics.hpp"
#include "fluxlattice/dynamics.hpp"
#include "fluxlattice/lattice.hpp"

namespace fluxlattice {

class DensityMatrix {
 public:
  explicit DensityMatrix(Eigen::MatrixXcd rho) : rho_(std::move(rho)) {
    if (rho_.rows() != rho_.cols() || rho_.rows() == 0) throw InvalidArgument("density matrix must be square and non-empty");
    if (!rho_.allFinite()) throw InvalidArgument("density matrix has non-finite entries");
    if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > 1e-10) throw InvalidArgument("density matrix is not Hermitian");
    if (std::abs(rho_.trace().real() - 1.0) > 1e-8) throw InvalidArgument("density matrix trace is not 1");
    if (min_eigenvalue() < -1e-8) throw InvalidArgument("density matrix has a negative eigenvalue");
  }

  static DensityMatrix pure(const Eigen::VectorXcd& psi) {
    if (std::abs(psi.norm() - 1.0) > 1e-10) throw InvalidArgument("state is not normalized");
    return DensityMatrix(psi * psi.adjoint());
  }

  /// |psi><psi| with psi living in the single-excitation sector.
  static DensityMatrix from_single_excitation(const StateVector& psi) {
    Eigen::VectorXcd full = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(psi.dim()) + 1);
    full.tail(static_cast<Eigen::Index>(psi.dim())) = psi.amplitudes();
    return pure(full);
  }

  std::size_t dim() const { return static_cast<std::size_t>(rho_.rows()); }
  const Eigen::MatrixXcd& matrix() const { return rho_; }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

 private:
  Eigen::MatrixXcd rho_;
};

/// Dephasing rate per site, in the same time unit as the Hamiltonian (units
/// of J when H is in units of J).
struct DephasingRates {
  std::map<SiteId, double> gamma;

  static DephasingRates uniform(int plaquettes, double rate) {
    DephasingRates r;
    for (std::size_t i = 0; i < site_count(plaquettes); ++i) r.gamma[site_at(i, plaquettes)] = rate;
    return r;
  }

  std::vector<double> flat(int plaquettes) const {
    std::vector<double> out(site_count(plaquettes), 0.0);
    for (const auto& [site, g] : gamma) {
      if (!std::isfinite(g) || g < 0) throw InvalidArgument("dephasing rates must be finite and >= 0");
      out[flat_index(site, plaquettes)] = g;
    }
    return out;
  }
};

struct LindbladOptions {
  /// Step rule: h * max(||H||, max gamma) <= step_limit.
  double step_limit = 0.02;
  /// Optional hard cap on the step; each output interval is split evenly.
  double max_step = 0.0;
  double trace_tolerance = 1e-6;
  bool keep_snapshots = false;
  /// Additional collapse operators on the (L+1)-dim space, applied with the
  /// generic dissipator L rho L^dagger - {L^dagger L, rho}/2.
  std::vector<Eigen::MatrixXcd> extra_collapse;
};

struct LindbladResult {
  PopulationTrace trace;              // site populations (vacuum excluded)
  std::vector<double> vacuum_population;
  std::vector<double> coherence_l1;   // sum of |rho_ab|, a != b, over site indices
  std::vector<double> trace_error;    // |tr rho - 1|
  std::vector<Eigen::MatrixXcd> snapshots;
  std::size_t steps = 0;
};

/// Right-hand side of the master equation; rates are per matrix index
/// (rates[0] belongs to the vacuum and is normally 0).
class LindbladGenerator {
 public:
  LindbladGenerator(std::vector<double> index_rates, std::vector<Eigen::MatrixXcd> extra)
      : rates_(std::move(index_rates)), extra_(std::move(extra)) {
    for (const auto& c : extra_) {
      if (c.rows() != static_cast<Eigen::Index>(rates_.size()) || c.cols() != c.rows()) {
        throw InvalidArgument("collapse operator dimension mismatch");
      }
      extra_dag_.push_back(c.adjoint());
      extra_norm_.push_back(c.adjoint() * c);
    }
  }

  Eigen::MatrixXcd operator()(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& rho) const {
    const cplx minus_i(0.0, -1.0);
    Eigen::MatrixXcd d = minus_i * (h * rho - rho * h);
    const auto n = rho.rows();
    for (Eigen::Index b = 0; b < n; ++b) {
      for (Eigen::Index a = 0; a < n; ++a) {
        if (a != b) d(a, b) -= 0.5 * (rates_[static_cast<std::size_t>(a)] + rates_[static_cast<std::size_t>(b)]) * rho(a, b);
      }
    }
    for (std::size_t k = 0; k < extra_.size(); ++k) {
      d += extra_[k] * rho * extra_dag_[k] - 0.5 * (extra_norm_[k] * rho + rho * extra_norm_[k]);
    }
    return d;
  }

  double rate_bound() const {
    double r = rates_.empty() ? 0.0 : *std::max_element(rates_.begin(), rates_.end());
    for (const auto& m : extra_norm_) r = std::max(r, m.cwiseAbs().rowwise().sum().maxCoeff());
    return r;
  }

 private:
  std::vector<double> rates_;
  std::vector<Eigen::MatrixXcd> extra_;
  std::vector<Eigen::MatrixXcd> extra_dag_;
  std::vector<Eigen::MatrixXcd> extra_norm_;
};

/// Induced infinity norm; an upper bound on the spectral norm.
inline double row_sum_norm(const Eigen::MatrixXcd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

/// Embeds an L x L single-excitation operator into the (L+1)-dim space
/// with the vacuum at index 0 (vacuum energy 0).
inline Eigen::MatrixXcd embed_with_vacuum(const Eigen::MatrixXcd& h) {
  const auto n = h.rows();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n + 1, n + 1);
  out.bottomRightCorner(n, n) = h;
  return out;
}

namespace detail {

inline std::size_t substeps(double interval, double rate, const LindbladOptions& opt) {
  double n = 1.0;
  if (rate > 0) n = std::max(n, std::ceil(interval * rate / opt.step_limit - 1e-12));
  if (opt.max_step > 0) n = std::max(n, std::ceil(interval / opt.max_step - 1e-9));
  return static_cast<std::size_t>(n);
}

inline void rk4_step(const LindbladGenerator& gen, const std::function<Eigen::MatrixXcd(double)>& h_at, double t,
                     double h, Eigen::MatrixXcd& rho) {
  const Eigen::MatrixXcd h0 = h_at(t);
  const Eigen::MatrixXcd hm = h_at(t + 0.5 * h);
  const Eigen::MatrixXcd h1 = h_at(t + h);
  const Eigen::MatrixXcd k1 = gen(h0, rho);
  const Eigen::MatrixXcd k2 = gen(hm, rho + 0.5 * h * k1);
  const Eigen::MatrixXcd k3 = gen(hm, rho + 0.5 * h * k2);
  const Eigen::MatrixXcd k4 = gen(h1, rho + h * k3);
  rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

/// Fixed-step RK4 integration of the master equation with a (possibly)
/// time-dependent Hamiltonian on the full (L+1)-dim space. `h_norm_bound`
/// must bound ||H(t)|| over the window; it sets the step.
inline LindbladResult lindblad_evolve_driven(const std::function<Eigen::MatrixXcd(double)>& h_at, double h_norm_bound,
                                             std::span<const double> site_rates, const DensityMatrix& rho0,
                                             std::span<const double> times, const LindbladOptions& opt = {},
                                             std::vector<std::string> labels = {}) {
  const std::size_t n = rho0.dim();
  if (site_rates.size() + 1 != n) throw InvalidArgument("rates must cover every site of the (L+1)-dim space");
  if (!(opt.step_limit > 0)) throw InvalidArgument("step_limit must be positive");
  check_time_grid(times);
  std::vector<double> idx_rates(n, 0.0);
  for (std::size_t i = 0; i < site_rates.size(); ++i) {
    if (!std::isfinite(site_rates[i]) || site_rates[i] < 0) throw InvalidArgument("dephasing rates must be finite and >= 0");
    idx_rates[i + 1] = site_rates[i];
  }
  const LindbladGenerator gen(std::move(idx_rates), opt.extra_collapse);
  const double rate = std::max(h_norm_bound, gen.rate_bound());

  LindbladResult res;
  res.trace.times.assign(times.begin(), times.end());
  res.trace.labels = std::move(labels);
  res.trace.populations.resize(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(n - 1));

  Eigen::MatrixXcd rho = rho0.matrix();
  double t = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double interval = times[k] - t;
    if (interval > 0) {
      const std::size_t m = detail::substeps(interval, rate, opt);
      const double h = interval / static_cast<double>(m);
      for (std::size_t s = 0; s < m; ++s) {
        detail::rk4_step(gen, h_at, t + static_cast<double>(s) * h, h, rho);
      }
      res.steps += m;
      t = times[k];
    }
    const double drift = std::abs(rho.trace().real() - 1.0);
    if (!(drift <= opt.trace_tolerance)) {
      std::ostringstream msg;
      msg << "Lindblad trace drift " << drift << " exceeds " << opt.trace_tolerance << " at t=" << t
          << " (rate bound " << rate << ", step_limit " << opt.step_limit << ")";
      throw NumericalError(msg.str());
    }
    res.trace_error.push_back(drift);
    const auto row = static_cast<Eigen::Index>(k);
    res.trace.populations.row(row) = rho.diagonal().tail(static_cast<Eigen::Index>(n - 1)).real().transpose();
    res.vacuum_population.push_back(rho(0, 0).real());
    const Eigen::MatrixXcd sites = rho.bottomRightCorner(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n - 1));
    res.coherence_l1.push_back(sites.cwiseAbs().sum() - sites.diagonal().cwiseAbs().sum());
    if (opt.keep_snapshots) res.snapshots.push_back(rho);
  }
  return res;
}

/// Time-independent case. `h` is the L x L single-excitation Hamiltonian;
/// `rho0` lives on the (L+1)-dim vacuum (+) single-excitation space.
inline LindbladResult lindblad_evolve(const HermitianOperator& h, std::span<const double> site_rates,
                                      const DensityMatrix& rho0, std::span<const double> times,
                                      const LindbladOptions& opt = {}, std::vector<std::string> labels = {}) {
  if (h.dim() + 1 != rho0.dim()) throw InvalidArgument("density matrix must have dimension L+1 for an L-site Hamiltonian");
  const Eigen::MatrixXcd full = embed_with_vacuum(h.matrix());
  return lindblad_evolve_driven([&full](double) { return full; }, row_sum_norm(full), site_rates, rho0, times, opt,
                                std::move(labels));
}

inline LindbladResult lindblad_evolve(const HermitianOperator& h, const DephasingRates& rates, const DensityMatrix& rho0,
                                      std::span<const double> times, const LindbladOptions& opt = {}) {
  const int l = plaquettes_for_dim(h.dim());
  const auto flat = rates.flat(l);
  return lindblad_evolve(h, flat, rho0, times, opt, site_labels(l));
}

// ---------------------------------------------------------------------------
// Fidelity

namespace detail {

inline void check_distribution(std::span<const double> n, const char* name) {
  for (double x : n) {
    if (!std::isfinite(x)) throw InvalidArgument(std::string(name) + " has non-finite entries");
    if (x < -1e-12) throw InvalidArgument(std::string(name) + " has negative entries");
  }
}

}  // namespace detail

/// F = sum_i sqrt(n_i * nth_i) with no normalization.
inline double fidelity_raw(std::span<const double> n, std::span<const double> nth) {
  if (n.size() != nth.size()) throw InvalidArgument("population vectors differ in length");
  detail::check_distribution(n, "n");
  detail::check_distribution(nth, "n_th");
  double f = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) f += std::sqrt(std::max(n[i], 0.0) * std::max(nth[i], 0.0));
  return f;
}

/// Population-distribution fidelity. Inputs summing to 1 within 1e-6 are
/// used as is; within 1e-3 they are renormalized (with a warning);
/// anything further off is an error.
inline double fidelity(std::span<const double> n, std::span<const double> nth, Diagnostics* diag = nullptr) {
  if (n.size() != nth.size()) throw InvalidArgument("population vectors differ in length");
  detail::check_distribution(n, "n");
  detail::check_distribution(nth, "n_th");
  auto normalized = [diag](std::span<const double> v, const char* name) {
    const double s = std::accumulate(v.begin(), v.end(), 0.0);
    std::vector<double> out(v.begin(), v.end());
    if (std::abs(s - 1.0) <= 1e-6) return out;
    if (std::abs(s - 1.0) <= 1e-3) {
      warn(diag, std::string(name) + " sums to " + std::to_string(s) + "; renormalized");
      for (auto& x : out) x /= s;
      return out;
    }
    throw InvalidArgument(std::string(name) + " sums to " + std::to_string(s) + ", not a distribution");
  };
  const auto a = normalized(n, "n");
  const auto b = normalized(nth, "n_th");
  return std::min(1.0, fidelity_raw(a, b));
}

inline double fidelity(const Eigen::VectorXd& n, const Eigen::VectorXd& nth, Diagnostics* diag = nullptr) {
  return fidelity(std::span<const double>(n.data(), static_cast<std::size_t>(n.size())),
                  std::span<const double>(nth.data(), static_cast<std::size_t>(nth.size())), diag);
}

}  // namespace fluxlattice
