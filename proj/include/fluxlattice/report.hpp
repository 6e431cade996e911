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

// Checks a stored population trace against an independent reference.

#pragma once

#include <cmath>
#include <string>

#include "fluxlattice/dynamics.hpp"
#include "fluxlattice/lattice.hpp"
#include "fluxlattice/protocols.hpp"

namespace fluxlattice {

enum class ReferenceOracle { AnalyticL1, EffectiveModel };

inline const char* to_string(ReferenceOracle o) {
  return o == ReferenceOracle::AnalyticL1 ? "analytic_l1" : "effective_model";
}

inline ReferenceOracle parse_oracle(const std::string& s) {
  if (s == "analytic_l1") return ReferenceOracle::AnalyticL1;
  if (s == "effective_model") return ReferenceOracle::EffectiveModel;
  throw InvalidArgument("unknown oracle \"" + s + "\" (expected analytic_l1 or effective_model)");
}

struct ComparisonReport {
  ReferenceOracle oracle = ReferenceOracle::AnalyticL1;
  SiteId init{Rail::A, 1};
  double max_deviation = 0.0;
  double mean_deviation = 0.0;
  double tolerance = 1e-8;
  bool pass = false;
};

/// Site holding the whole excitation in the first row, which must be t = 0.
inline SiteId infer_initial_site(const PopulationTrace& trace, int plaquettes) {
  if (trace.times.empty() || trace.times.front() != 0.0) throw InvalidArgument("trace must start at Jt = 0");
  Eigen::Index best = 0;
  const double p = trace.populations.row(0).maxCoeff(&best);
  if (std::abs(p - 1.0) > 1e-9) throw InvalidArgument("trace does not start from a single excited site");
  return site_at(static_cast<std::size_t>(best), plaquettes);
}

/// `delta` is the antisymmetric detuning (units of J) used for the
/// effective-model oracle; the analytic oracle needs an undetuned l = 1
/// lattice.
inline ComparisonReport compare_against_reference(const PopulationTrace& trace, ReferenceOracle oracle,
                                                  const RhombicLattice& lattice, double delta = 0.0,
                                                  double tolerance = 1e-8) {
  const std::size_t sites = lattice.num_sites();
  if (trace.num_sites() != sites) {
    throw InvalidArgument("trace has " + std::to_string(trace.num_sites()) + " site columns but the lattice has " +
                          std::to_string(sites));
  }
  if (static_cast<std::size_t>(trace.populations.rows()) != trace.times.size()) {
    throw InvalidArgument("trace rows do not match its time column");
  }
  if (!trace.labels.empty()) {
    const auto expect = site_labels(lattice.plaquettes());
    if (trace.labels != expect) throw InvalidArgument("trace columns are not in flat-index order for this lattice");
  }

  ComparisonReport r;
  r.oracle = oracle;
  r.tolerance = tolerance;
  r.init = infer_initial_site(trace, lattice.plaquettes());
  Eigen::MatrixXd ref(trace.populations.rows(), trace.populations.cols());

  if (oracle == ReferenceOracle::AnalyticL1) {
    if (lattice.plaquettes() != 1) throw InvalidArgument("analytic_l1 oracle needs a single plaquette");
    for (double d : lattice.detunings()) {
      if (d != 0.0) throw InvalidArgument("analytic_l1 oracle needs zero detunings");
    }
    for (const auto& b : lattice.bonds()) {
      if (b.magnitude_scale != 1.0) throw InvalidArgument("analytic_l1 oracle needs homogeneous couplings");
    }
    const Flux flux = lattice.plaquette_flux(1);
    const auto col = static_cast<Eigen::Index>(flat_index(r.init, 1));
    for (Eigen::Index k = 0; k < ref.rows(); ++k) {
      const Eigen::Matrix4cd u =
          plaquette_propagator_closed_form(flux, lattice.coupling() * trace.times[static_cast<std::size_t>(k)]);
      for (Eigen::Index s = 0; s < 4; ++s) ref(k, s) = std::norm(u(s, col));
    }
  } else {
    const auto psi0 = StateVector::localized(lattice, r.init);
    ref = effective_model_populations(lattice, delta, psi0, trace.times).populations;
  }

  const Eigen::ArrayXXd diff = (trace.populations - ref).array().abs();
  r.max_deviation = diff.size() ? diff.maxCoeff() : 0.0;
  r.mean_deviation = diff.size() ? diff.mean() : 0.0;
  r.pass = r.max_deviation < tolerance;
  return r;
}

}  // namespace fluxlattice
