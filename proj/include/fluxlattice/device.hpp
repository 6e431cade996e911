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

// Hardware layer: tunable-coupler effective coupling, transmon tune curve
// and Z-line crosstalk. Frequencies here are omega/2pi in GHz.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fluxlattice/diagnostics.hpp"

namespace fluxlattice {

struct CouplerSpec {
  double omega_a = 0.0;
  double omega_b = 0.0;
  double omega_c = 0.0;
  double u_a = 0.0;
  double u_b = 0.0;
  double u_c = 0.0;
  double g_ac = 0.0;
  double g_bc = 0.0;
  double g_ab = 0.0;
};

inline constexpr double kDispersiveMin = 5.0;
inline constexpr double kDispersiveWarn = 10.0;

/// min(|omega_q - omega_c| / g_qc) over the two qubits; infinite when the
/// coupler is uncoupled.
inline double dispersive_ratio(const CouplerSpec& s) {
  double r = std::numeric_limits<double>::infinity();
  if (s.g_ac != 0.0) r = std::min(r, std::abs(s.omega_a - s.omega_c) / std::abs(s.g_ac));
  if (s.g_bc != 0.0) r = std::min(r, std::abs(s.omega_b - s.omega_c) / std::abs(s.g_bc));
  return r;
}

inline double g_eff_unchecked(const CouplerSpec& s) {
  return s.g_ab + 0.5 * s.g_ac * s.g_bc * (1.0 / (s.omega_a - s.omega_c) + 1.0 / (s.omega_b - s.omega_c));
}

/// Second-order effective qubit-qubit exchange.
inline double g_eff(const CouplerSpec& s, Diagnostics* diag = nullptr) {
  const double r = dispersive_ratio(s);
  if (!(r > kDispersiveMin)) {
    std::ostringstream msg;
    msg << "coupler too close to resonance: detuning/coupling ratio " << r << " <= " << kDispersiveMin;
    throw InvalidArgument(msg.str());
  }
  if (r < kDispersiveWarn) {
    std::ostringstream msg;
    msg << "weakly dispersive coupler: detuning/coupling ratio " << r;
    warn(diag, msg.str());
  }
  return g_eff_unchecked(s);
}

struct FrequencyWindow {
  double lo = 0.0;
  double hi = 0.0;
};

/// Window above both qubits from the dispersive edge out to 10^4 couplings.
inline FrequencyWindow default_coupler_window(const CouplerSpec& s) {
  const double g = std::max({std::abs(s.g_ac), std::abs(s.g_bc), 1e-12});
  const double top = std::max(s.omega_a, s.omega_b);
  return {top + kDispersiveMin * g * (1.0 + 1e-6), top + 1e4 * g};
}

/// Coupler frequency at which g_eff vanishes, by bisection inside `window`.
/// The window must not contain a qubit frequency.
inline double coupler_off_frequency(CouplerSpec s, FrequencyWindow window) {
  if (!(window.lo < window.hi)) throw InvalidArgument("coupler window must satisfy lo < hi");
  for (double q : {s.omega_a, s.omega_b}) {
    if (q >= window.lo && q <= window.hi) throw InvalidArgument("coupler window contains a qubit frequency");
  }
  auto f = [&](double wc) {
    s.omega_c = wc;
    return g_eff_unchecked(s);
  };
  double lo = window.lo;
  double hi = window.hi;
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) throw NumericalError("g_eff does not change sign in the coupler window");
  while (hi - lo > 1e-12 * std::max(std::abs(lo), std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline double coupler_off_frequency(const CouplerSpec& s) { return coupler_off_frequency(s, default_coupler_window(s)); }

// ---------------------------------------------------------------------------
// Three-mode oracle

enum class CouplingSign { Positive, Negative, Indeterminate };

inline const char* to_string(CouplingSign s) {
  switch (s) {
    case CouplingSign::Positive: return "positive";
    case CouplingSign::Negative: return "negative";
    case CouplingSign::Indeterminate: return "indeterminate";
  }
  return "?";
}

struct VacuumRabiResult {
  double coupling = 0.0;   // signed effective exchange
  double magnitude = 0.0;  // |coupling|
  double splitting = 0.0;  // between the two qubit-like dressed levels
  CouplingSign sign = CouplingSign::Indeterminate;
  double hybridization = 0.0;  // largest coupler weight of the two
};

/// Truncated bosonic Hamiltonian of qubit A, qubit B and coupler C with
/// `levels` states each; basis index nA*levels^2 + nB*levels + nC.
inline Eigen::MatrixXd three_mode_hamiltonian(const CouplerSpec& s, int levels) {
  if (levels < 2) throw InvalidArgument("need at least 2 levels per mode");
  const int n = levels;
  const int dim = n * n * n;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  auto idx = [n](int a, int b, int c) { return (a * n + b) * n + c; };
  const std::array<double, 3> w{s.omega_a, s.omega_b, s.omega_c};
  const std::array<double, 3> u{s.u_a, s.u_b, s.u_c};
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      for (int c = 0; c < n; ++c) {
        const std::array<int, 3> occ{a, b, c};
        double e = 0.0;
        for (int m = 0; m < 3; ++m) e += w[m] * occ[m] + 0.5 * u[m] * occ[m] * (occ[m] - 1);
        h(idx(a, b, c), idx(a, b, c)) = e;
      }
    }
  }
  // g (x^dag y + x y^dag) between modes x and y.
  auto exchange = [&](int mx, int my, double g) {
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        for (int c = 0; c < n; ++c) {
          std::array<int, 3> occ{a, b, c};
          if (occ[mx] + 1 >= n || occ[my] == 0) continue;
          const double amp = g * std::sqrt(static_cast<double>(occ[mx] + 1) * occ[my]);
          const int from = idx(occ[0], occ[1], occ[2]);
          occ[mx] += 1;
          occ[my] -= 1;
          const int to = idx(occ[0], occ[1], occ[2]);
          h(to, from) += amp;
          h(from, to) += amp;
        }
      }
    }
  };
  exchange(0, 1, s.g_ab);
  exchange(0, 2, s.g_ac);
  exchange(1, 2, s.g_bc);
  return h;
}

/// Diagonalizes the single-excitation block of the truncated three-mode
/// Hamiltonian and reads off the qubit-qubit exchange from the two dressed
/// states with dominant A/B character, via the Hermitian effective 2x2
/// Hamiltonian on the bare (A, B) subspace.
inline VacuumRabiResult three_mode_vacuum_rabi(const CouplerSpec& s, int levels = 3) {
  const Eigen::MatrixXd full = three_mode_hamiltonian(s, levels);
  const int n = levels;
  const std::array<int, 3> one{(1 * n + 0) * n + 0, (0 * n + 1) * n + 0, (0 * n + 0) * n + 1};
  Eigen::Matrix3d block;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) block(r, c) = full(one[r], one[c]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(block);
  const Eigen::Matrix3d& v = es.eigenvectors();
  // The two eigenvectors with the least coupler weight.
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int x, int y) { return std::abs(v(2, x)) < std::abs(v(2, y)); });
  std::array<int, 2> pick{std::min(order[0], order[1]), std::max(order[0], order[1])};

  VacuumRabiResult r;
  r.hybridization = std::max(v(2, pick[0]) * v(2, pick[0]), v(2, pick[1]) * v(2, pick[1]));
  if (r.hybridization > 0.2) {
    std::ostringstream msg;
    msg << "dressed qubit states are " << 100.0 * r.hybridization << "% coupler; not dispersive";
    throw NumericalError(msg.str());
  }
  Eigen::Matrix2d x;
  Eigen::Vector2d e;
  for (int m = 0; m < 2; ++m) {
    x.col(m) = v.block(0, pick[m], 2, 1);
    e(m) = es.eigenvalues()(pick[m]);
  }
  // Symmetric orthonormalization: X (X^T X)^{-1/2}.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> ov(x.transpose() * x);
  const Eigen::Matrix2d inv_sqrt =
      ov.eigenvectors() * ov.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * ov.eigenvectors().transpose();
  const Eigen::Matrix2d q = x * inv_sqrt;
  const Eigen::Matrix2d heff = q * e.asDiagonal() * q.transpose();

  r.coupling = heff(0, 1);
  r.magnitude = std::abs(r.coupling);
  r.splitting = e(1) - e(0);
  const double scale = std::max({std::abs(s.g_ab), std::abs(s.g_ac), std::abs(s.g_bc)});
  if (r.magnitude < 1e-3 * scale || scale == 0.0) {
    r.sign = CouplingSign::Indeterminate;
  } else {
    r.sign = r.coupling > 0 ? CouplingSign::Positive : CouplingSign::Negative;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Tune curve

struct TransmonTuneCurve {
  double omega_max = 0.0;
  double omega_min = 0.0;

  TransmonTuneCurve() = default;
  TransmonTuneCurve(double max, double min) : omega_max(max), omega_min(min) {
    if (!(min > 0) || !(min <= max) || !std::isfinite(max)) {
      throw InvalidArgument("tune curve needs 0 < omega_min <= omega_max");
    }
  }

  double asymmetry() const { return (omega_min / omega_max) * (omega_min / omega_max); }
};

/// Two-junction transmon model: omega_max (cos^2 + d^2 sin^2)^{1/4} of
/// pi*phi, which hits omega_min at half a flux quantum.
inline double tune_curve(const TransmonTuneCurve& curve, double phi) {
  const double d = curve.asymmetry();
  const double c = std::cos(std::numbers::pi * phi);
  const double s = std::sin(std::numbers::pi * phi);
  return curve.omega_max * std::pow(c * c + d * d * s * s, 0.25);
}

// ---------------------------------------------------------------------------
// Crosstalk

struct CrosstalkMatrix {
  Eigen::MatrixXd m;
  std::vector<std::string> labels;

  CrosstalkMatrix() = default;
  explicit CrosstalkMatrix(Eigen::MatrixXd mat, std::vector<std::string> names = {})
      : m(std::move(mat)), labels(std::move(names)) {
    if (m.rows() != m.cols() || m.rows() == 0) throw InvalidArgument("crosstalk matrix must be square and non-empty");
    if (!m.allFinite()) throw InvalidArgument("crosstalk matrix has non-finite entries");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (std::abs(m(i, i) - 1.0) > 1e-12) throw InvalidArgument("crosstalk matrix diagonal must be 1");
    }
    if (!labels.empty() && labels.size() != static_cast<std::size_t>(m.rows())) {
      throw InvalidArgument("crosstalk labels do not match the matrix size");
    }
  }

  double condition_number() const {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    return smin > 0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
  }
};

inline constexpr double kMaxCrosstalkCondition = 1e6;

/// Applied voltages that produce `target` once the crosstalk acts.
inline Eigen::VectorXd crosstalk_correct(const CrosstalkMatrix& mat, const Eigen::VectorXd& target) {
  if (target.size() != mat.m.rows()) throw InvalidArgument("target vector size does not match crosstalk matrix");
  const double cond = mat.condition_number();
  if (!(cond <= kMaxCrosstalkCondition)) {
    std::ostringstream msg;
    msg << "crosstalk matrix is singular or ill-conditioned (condition number " << cond << ")";
    throw NumericalError(msg.str());
  }
  return mat.m.partialPivLu().solve(target);
}

struct CrosstalkFit {
  double slope = 0.0;
  double intercept = 0.0;
  double element = 0.0;  // -slope
  double residual_rms = 0.0;
};

/// Least-squares line through (source, target) compensation points. The
/// crosstalk element is minus the slope.
inline CrosstalkFit crosstalk_fit(std::span<const double> source, std::span<const double> target) {
  if (source.size() != target.size()) throw InvalidArgument("source and target columns differ in length");
  if (source.size() < 2) throw InvalidArgument("crosstalk fit needs at least two points");
  const double n = static_cast<double>(source.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (!std::isfinite(source[i]) || !std::isfinite(target[i])) throw InvalidArgument("crosstalk data has non-finite values");
    mx += source[i];
    my += target[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    sxx += (source[i] - mx) * (source[i] - mx);
    sxy += (source[i] - mx) * (target[i] - my);
  }
  if (!(sxx > 1e-24 * std::max(1.0, mx * mx) * n)) throw InvalidArgument("crosstalk fit needs two distinct source values");
  CrosstalkFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.element = -f.slope;
  double ss = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const double r = target[i] - (f.intercept + f.slope * source[i]);
    ss += r * r;
  }
  f.residual_rms = std::sqrt(ss / n);
  return f;
}

struct CrosstalkSamples {
  std::vector<double> source;
  std::vector<double> target;
};

/// Points on target = slope * source + N(0, sigma) over [lo, hi].
inline CrosstalkSamples synthetic_crosstalk(double slope, double sigma, std::size_t n, std::uint64_t seed,
                                            double lo = -0.5, double hi = 0.5) {
  if (n < 2) throw InvalidArgument("need at least two synthetic points");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  CrosstalkSamples out;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    out.source.push_back(x);
    out.target.push_back(slope * x + (sigma > 0 ? noise(rng) : 0.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Device table

struct QubitSpec {
  std::string name;
  double omega_min = 0.0;   // GHz
  double omega_max = 0.0;   // GHz
  double omega_idle = 0.0;  // GHz
  double omega_readout = 0.0;
  double t1_us = 0.0;
  double t2phi_us = 0.0;

  TransmonTuneCurve tune() const { return TransmonTuneCurve(omega_max, omega_min); }
};

}  // namespace fluxlattice
