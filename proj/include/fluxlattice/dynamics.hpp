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

// Closed-system dynamics in the single-excitation subspace and the exact
// effective-model mappings of the rhombic chain.
//
// The |+-_j> basis replaces each rail pair (up,j), (dn,j) by
// |+_j> = (|up_j> + |dn_j>)/sqrt(2) and |-_j> = (|up_j> - |dn_j>)/sqrt(2),
// keeping the flat index positions: A_j -> 3(j-1), +_j -> 3(j-1)+1,
// -_j -> 3(j-1)+2.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "fluxlattice/diagnostics.hpp"
#include "fluxlattice/lattice.hpp"

namespace fluxlattice {

/// Normalized state (to 1e-10).
class StateVector {
 public:
  explicit StateVector(Eigen::VectorXcd amplitudes) : amplitudes_(std::move(amplitudes)) {
    if (!amplitudes_.allFinite()) throw InvalidArgument("state has non-finite amplitudes");
    if (std::abs(amplitudes_.norm() - 1.0) > 1e-10) throw InvalidArgument("state is not normalized");
  }

  static StateVector basis(std::size_t dim, std::size_t index) {
    if (index >= dim) throw InvalidArgument("basis index out of range");
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim));
    v(static_cast<Eigen::Index>(index)) = 1.0;
    return StateVector(std::move(v));
  }

  static StateVector localized(const RhombicLattice& lattice, SiteId site) {
    return basis(lattice.num_sites(), flat_index(site, lattice.plaquettes()));
  }

  std::size_t dim() const { return static_cast<std::size_t>(amplitudes_.size()); }
  const Eigen::VectorXcd& amplitudes() const { return amplitudes_; }

 private:
  Eigen::VectorXcd amplitudes_;
};

/// Per-site occupation probabilities on a time grid. Times are in units of
/// 1/J, so they read as Jt.
struct PopulationTrace {
  std::vector<double> times;
  Eigen::MatrixXd populations;  // [time x site]
  std::vector<std::string> labels;

  std::size_t num_times() const { return times.size(); }
  std::size_t num_sites() const { return static_cast<std::size_t>(populations.cols()); }

  double max_abs_difference(const PopulationTrace& other) const {
    if (populations.rows() != other.populations.rows() || populations.cols() != other.populations.cols()) {
      throw InvalidArgument("trace shapes differ");
    }
    if (populations.size() == 0) return 0.0;
    return (populations - other.populations).cwiseAbs().maxCoeff();
  }
};

/// n points uniformly spaced on [0, tmax], endpoints included.
inline std::vector<double> uniform_times(double tmax, std::size_t n) {
  if (n == 0) throw InvalidArgument("time grid must have at least one point");
  if (!std::isfinite(tmax) || tmax < 0) throw InvalidArgument("tmax must be finite and >= 0");
  std::vector<double> t(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) t[i] = tmax * static_cast<double>(i) / static_cast<double>(n - 1);
  return t;
}

inline void check_time_grid(std::span<const double> times) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0) throw InvalidArgument("times must be finite and >= 0");
    if (i > 0 && times[i] < times[i - 1]) throw InvalidArgument("times must be sorted");
  }
}

/// exp(-iHt) via one eigendecomposition H = V diag(E) V^dagger, reused for
/// every t. Exact up to floating point; no step size.
class UnitaryPropagator {
 public:
  explicit UnitaryPropagator(const HermitianOperator& h) : solver_(h.matrix()) {
    if (solver_.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  }

  std::size_t dim() const { return static_cast<std::size_t>(solver_.eigenvalues().size()); }
  const Eigen::VectorXd& eigenvalues() const { return solver_.eigenvalues(); }
  const Eigen::MatrixXcd& eigenvectors() const { return solver_.eigenvectors(); }

  Eigen::VectorXcd evolve(const Eigen::VectorXcd& psi0, double t) const {
    if (t == 0.0) return psi0;
    const Eigen::VectorXcd c = eigenvectors().adjoint() * psi0;
    return evolve_coefficients(c, t);
  }

  /// Evolution operator exp(-iHt) as a dense matrix.
  Eigen::MatrixXcd propagator(double t) const {
    const Eigen::VectorXcd phases = (eigenvalues().cast<cplx>() * cplx(0.0, -t)).array().exp().matrix();
    return eigenvectors() * phases.asDiagonal() * eigenvectors().adjoint();
  }

  PopulationTrace populations(const StateVector& psi0, std::span<const double> times,
                              std::vector<std::string> labels = {}) const {
    if (psi0.dim() != dim()) throw InvalidArgument("state and Hamiltonian dimensions differ");
    check_time_grid(times);
    PopulationTrace trace;
    trace.times.assign(times.begin(), times.end());
    trace.labels = std::move(labels);
    trace.populations.resize(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(dim()));
    const Eigen::VectorXcd c = eigenvectors().adjoint() * psi0.amplitudes();
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (times[i] == 0.0) {
        trace.populations.row(static_cast<Eigen::Index>(i)) = psi0.amplitudes().cwiseAbs2().transpose();
      } else {
        trace.populations.row(static_cast<Eigen::Index>(i)) = evolve_coefficients(c, times[i]).cwiseAbs2().transpose();
      }
    }
    return trace;
  }

 private:
  Eigen::VectorXcd evolve_coefficients(const Eigen::VectorXcd& c, double t) const {
    Eigen::VectorXcd ct(c.size());
    for (Eigen::Index k = 0; k < c.size(); ++k) ct(k) = c(k) * std::polar(1.0, -eigenvalues()(k) * t);
    return eigenvectors() * ct;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver_;
};

inline PopulationTrace evolve_unitary(const HermitianOperator& h, const StateVector& psi0,
                                      std::span<const double> times, std::vector<std::string> labels = {}) {
  if (h.dim() != psi0.dim()) throw InvalidArgument("state and Hamiltonian dimensions differ");
  return UnitaryPropagator(h).populations(psi0, times, std::move(labels));
}

// ---------------------------------------------------------------------------
// |+-> basis

inline int plaquettes_for_dim(std::size_t dim) {
  if (dim < 4 || dim % 3 != 1) {
    throw InvalidArgument("dimension " + std::to_string(dim) + " does not pair into rhombic (A, up, dn) cells");
  }
  return static_cast<int>((dim - 1) / 3);
}

/// Real orthogonal, symmetric matrix U with U*U = 1. Rows are the new
/// basis states in the old coordinates.
inline Eigen::MatrixXd pm_basis_matrix(std::size_t dim) {
  const int l = plaquettes_for_dim(dim);
  const auto n = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd u = Eigen::MatrixXd::Identity(n, n);
  const double r = 1.0 / std::sqrt(2.0);
  for (int j = 0; j < l; ++j) {
    const Eigen::Index up = 3 * j + 1;
    const Eigen::Index dn = 3 * j + 2;
    u(up, up) = r;
    u(up, dn) = r;
    u(dn, up) = r;
    u(dn, dn) = -r;
  }
  return u;
}

inline Eigen::VectorXcd pm_basis_transform(const Eigen::VectorXcd& v) {
  return pm_basis_matrix(static_cast<std::size_t>(v.size())).cast<cplx>() * v;
}

inline StateVector pm_basis_transform(const StateVector& s) { return StateVector(pm_basis_transform(s.amplitudes())); }

inline Eigen::MatrixXcd pm_basis_transform(const Eigen::MatrixXcd& m) {
  if (m.rows() != m.cols()) throw InvalidArgument("operator must be square");
  const Eigen::MatrixXcd u = pm_basis_matrix(static_cast<std::size_t>(m.rows())).cast<cplx>();
  return u * m * u.adjoint();
}

inline HermitianOperator pm_basis_transform(const HermitianOperator& h) {
  return HermitianOperator(pm_basis_transform(h.matrix()));
}

/// The transform is an involution, so the inverse is the same map.
template <typename T>
T pm_basis_inverse(const T& x) {
  return pm_basis_transform(x);
}

enum class PmRail { A, Plus, Minus };

struct PmSite {
  PmRail rail = PmRail::A;
  int cell = 1;

  auto operator<=>(const PmSite&) const = default;
};

inline std::size_t pm_flat_index(PmSite s) {
  const auto base = 3 * static_cast<std::size_t>(s.cell - 1);
  return s.rail == PmRail::A ? base : (s.rail == PmRail::Plus ? base + 1 : base + 2);
}

inline std::string pm_label(PmSite s) {
  const char* r = s.rail == PmRail::A ? "A" : (s.rail == PmRail::Plus ? "+" : "-");
  return std::string(r) + std::to_string(s.cell);
}

// ---------------------------------------------------------------------------
// Gauge fixing

/// Diagonal +-1 site signs g such that g_a * g_b * sign(bond) equals the
/// default-gauge sign of every bond. Populations are unchanged by g, so any
/// gauge with the same plaquette fluxes maps onto the default one.
inline std::vector<double> default_gauge_signs(const RhombicLattice& lattice) {
  const int l = lattice.plaquettes();
  const auto fluxes = lattice.fluxes();
  const auto target = default_bonds(fluxes);
  const std::size_t n = lattice.num_sites();

  struct Edge {
    std::size_t other;
    double ratio;  // target / actual
  };
  std::vector<std::vector<Edge>> adj(n);
  auto target_sign = [&](const Bond& b) {
    for (const auto& t : target) {
      if (t.from == b.from && t.to == b.to) return sign_value(t.sign);
    }
    throw InvalidArgument("bond missing from default gauge");
  };
  for (const auto& b : lattice.bonds()) {
    const auto a = flat_index(b.from, l);
    const auto c = flat_index(b.to, l);
    const double ratio = target_sign(b) * sign_value(b.sign);
    adj[a].push_back({c, ratio});
    adj[c].push_back({a, ratio});
  }

  std::vector<double> g(n, 0.0);
  g[0] = 1.0;
  std::queue<std::size_t> todo;
  todo.push(0);
  while (!todo.empty()) {
    const auto a = todo.front();
    todo.pop();
    for (const auto& e : adj[a]) {
      const double want = g[a] * e.ratio;
      if (g[e.other] == 0.0) {
        g[e.other] = want;
        todo.push(e.other);
      } else if (g[e.other] != want) {
        throw InvalidArgument("lattice gauge is inconsistent with its plaquette fluxes");
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Effective models

enum class EffectiveKind { Chain, Blocks, Trimer };

inline const char* to_string(EffectiveKind k) {
  switch (k) {
    case EffectiveKind::Chain: return "chain";
    case EffectiveKind::Blocks: return "blocks";
    case EffectiveKind::Trimer: return "trimer";
  }
  return "?";
}

/// Tight-binding model on the |+-> basis states, written down from the
/// mapping formulas rather than by transforming H. Covers all 3l+1 states.
struct EffectiveModel {
  struct Coupling {
    std::size_t a;
    std::size_t b;
    double strength;
  };

  EffectiveKind kind = EffectiveKind::Chain;
  std::vector<PmSite> sites;
  std::vector<Coupling> couplings;
  std::vector<double> onsite;
  /// Leading sites forming the 1D backbone; for the zero-flux chain the
  /// remaining sites are the dangling |-_j> states.
  std::size_t backbone_size = 0;

  std::size_t size() const { return sites.size(); }

  Eigen::MatrixXcd matrix() const {
    const auto n = static_cast<Eigen::Index>(sites.size());
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
    for (std::size_t i = 0; i < onsite.size(); ++i) {
      h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = onsite[i];
    }
    for (const auto& c : couplings) {
      h(static_cast<Eigen::Index>(c.a), static_cast<Eigen::Index>(c.b)) += c.strength;
      h(static_cast<Eigen::Index>(c.b), static_cast<Eigen::Index>(c.a)) += c.strength;
    }
    return h;
  }

  /// Connected components (couplings with zero strength ignored), each
  /// sorted by site index, in order of their first site.
  std::vector<std::vector<std::size_t>> components() const {
    std::vector<std::size_t> parent(sites.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& c : couplings) {
      if (c.strength != 0.0) parent[find(c.a)] = find(c.b);
    }
    std::vector<std::vector<std::size_t>> out;
    std::vector<long> slot(sites.size(), -1);
    for (std::size_t i = 0; i < sites.size(); ++i) {
      const auto r = find(i);
      if (slot[r] < 0) {
        slot[r] = static_cast<long>(out.size());
        out.emplace_back();
      }
      out[static_cast<std::size_t>(slot[r])].push_back(i);
    }
    return out;
  }
};

namespace detail {

inline Flux uniform_flux(const RhombicLattice& lattice) {
  const auto f = lattice.fluxes();
  for (auto x : f) {
    if (x != f.front()) throw InvalidArgument("effective models need a uniform flux on every plaquette");
  }
  return f.front();
}

inline void check_antisymmetric(const RhombicLattice& lattice, double delta) {
  const double tol = 1e-12 * std::max(1.0, std::abs(delta));
  for (std::size_t i = 0; i < lattice.num_sites(); ++i) {
    const SiteId s = site_at(i, lattice.plaquettes());
    const double want = s.rail == Rail::A ? 0.0 : (s.rail == Rail::Up ? delta : -delta);
    if (std::abs(lattice.detunings()[i] - want) > tol) {
      throw InvalidArgument("detunings are not the anti-symmetric pattern (+delta up, -delta dn, 0 on A) at site " +
                            to_string(s));
    }
  }
}

}  // namespace detail

/// Maps a uniform-flux lattice with anti-symmetric detuning delta onto its
/// 1D effective model:
///   flux 0          -> chain A1,+1,A2,...,A_{l+1} (hops sqrt2 J) with the
///                      |-_j> states hanging off +_j by delta (comb)
///   flux pi, delta=0 -> blocks {A1,+1}, {-1,A2,+2}, ..., {-l,A_{l+1}}
///   flux pi, delta=sqrt2 J -> homogeneous chain A1,+1,-1,A2,...
///   flux pi, other delta -> trimer, intra sqrt2 J, inter delta
inline EffectiveModel effective_model(const RhombicLattice& lattice, double delta) {
  if (!std::isfinite(delta)) throw InvalidArgument("non-finite detuning");
  const Flux flux = detail::uniform_flux(lattice);
  detail::check_antisymmetric(lattice, delta);
  for (const auto& b : lattice.bonds()) {
    if (b.magnitude_scale != 1.0) throw InvalidArgument("effective models need homogeneous coupling magnitudes");
  }

  const int l = lattice.plaquettes();
  const double hop = std::sqrt(2.0) * lattice.coupling();
  EffectiveModel m;
  auto add = [&m](PmSite s) {
    m.sites.push_back(s);
    return m.sites.size() - 1;
  };

  if (flux == Flux::Zero) {
    m.kind = EffectiveKind::Chain;
    std::vector<std::size_t> plus(static_cast<std::size_t>(l));
    std::size_t prev_a = add({PmRail::A, 1});
    for (int j = 1; j <= l; ++j) {
      const auto p = add({PmRail::Plus, j});
      const auto a = add({PmRail::A, j + 1});
      m.couplings.push_back({prev_a, p, hop});
      m.couplings.push_back({p, a, hop});
      plus[static_cast<std::size_t>(j - 1)] = p;
      prev_a = a;
    }
    m.backbone_size = m.sites.size();
    for (int j = 1; j <= l; ++j) {
      const auto minus = add({PmRail::Minus, j});
      if (delta != 0.0) m.couplings.push_back({plus[static_cast<std::size_t>(j - 1)], minus, delta});
    }
  } else {
    const double tol = 1e-12 * std::max(1.0, hop);
    if (delta == 0.0) {
      m.kind = EffectiveKind::Blocks;
    } else if (std::abs(std::abs(delta) - hop) <= tol) {
      m.kind = EffectiveKind::Chain;
    } else {
      m.kind = EffectiveKind::Trimer;
    }
    std::size_t prev_minus = 0;
    for (int j = 1; j <= l + 1; ++j) {
      const auto a = add({PmRail::A, j});
      if (j > 1) m.couplings.push_back({prev_minus, a, hop});
      if (j == l + 1) break;
      const auto p = add({PmRail::Plus, j});
      const auto minus = add({PmRail::Minus, j});
      m.couplings.push_back({a, p, hop});
      if (delta != 0.0) m.couplings.push_back({p, minus, delta});
      prev_minus = minus;
    }
    m.backbone_size = m.sites.size();
  }
  m.onsite.assign(m.sites.size(), 0.0);
  return m;
}

/// Evolves psi0 (rhombic basis) with the effective model and maps the
/// amplitudes back to the rhombic basis. Shares only the gauge/basis maps
/// with the full-lattice route.
inline PopulationTrace effective_model_populations(const RhombicLattice& lattice, double delta,
                                                   const StateVector& psi0, std::span<const double> times) {
  const auto model = effective_model(lattice, delta);
  const auto g = default_gauge_signs(lattice);
  const Eigen::VectorXcd gauge = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size())).cast<cplx>();
  const Eigen::VectorXcd pm0 = pm_basis_transform(Eigen::VectorXcd(gauge.cwiseProduct(psi0.amplitudes())));

  const auto n = static_cast<Eigen::Index>(model.size());
  Eigen::VectorXcd m0(n);
  for (Eigen::Index i = 0; i < n; ++i) m0(i) = pm0(static_cast<Eigen::Index>(pm_flat_index(model.sites[static_cast<std::size_t>(i)])));

  check_time_grid(times);
  const UnitaryPropagator prop{HermitianOperator(model.matrix())};
  PopulationTrace out;
  out.times.assign(times.begin(), times.end());
  out.labels = site_labels(lattice.plaquettes());
  out.populations.resize(static_cast<Eigen::Index>(times.size()), n);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const Eigen::VectorXcd mt = prop.evolve(m0, times[k]);
    Eigen::VectorXcd pm(n);
    for (Eigen::Index i = 0; i < n; ++i) pm(static_cast<Eigen::Index>(pm_flat_index(model.sites[static_cast<std::size_t>(i)]))) = mt(i);
    const Eigen::VectorXcd rh = gauge.cwiseProduct(pm_basis_inverse(pm));
    out.populations.row(static_cast<Eigen::Index>(k)) = rh.cwiseAbs2().transpose();
  }
  return out;
}

/// Max |population difference| between the full lattice and the mapped
/// effective model, compared site by site in the |+-> basis.
inline double verify_equivalence(const RhombicLattice& lattice, double delta, const StateVector& psi0,
                                 std::span<const double> times) {
  const auto model = effective_model(lattice, delta);
  const auto h = hamiltonian_single_excitation(lattice);
  if (psi0.dim() != h.dim()) throw InvalidArgument("state and lattice dimensions differ");
  check_time_grid(times);

  const auto g = default_gauge_signs(lattice);
  const Eigen::VectorXcd gauge = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size())).cast<cplx>();
  const Eigen::MatrixXcd u = pm_basis_matrix(h.dim()).cast<cplx>();

  const auto n = static_cast<Eigen::Index>(model.size());
  std::vector<Eigen::Index> where(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) where[i] = static_cast<Eigen::Index>(pm_flat_index(model.sites[i]));

  const Eigen::VectorXcd pm0 = u * gauge.cwiseProduct(psi0.amplitudes());
  Eigen::VectorXcd m0(n);
  for (Eigen::Index i = 0; i < n; ++i) m0(i) = pm0(where[static_cast<std::size_t>(i)]);

  const UnitaryPropagator full(h);
  const UnitaryPropagator eff{HermitianOperator(model.matrix())};
  double worst = 0.0;
  for (double t : times) {
    const Eigen::VectorXcd pm = u * gauge.cwiseProduct(full.evolve(psi0.amplitudes(), t));
    const Eigen::VectorXcd mt = eff.evolve(m0, t);
    for (Eigen::Index i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(std::norm(mt(i)) - std::norm(pm(where[static_cast<std::size_t>(i)]))));
    }
  }
  return worst;
}

}  // namespace fluxlattice
