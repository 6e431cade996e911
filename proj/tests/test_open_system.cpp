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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "fluxlattice/dynamics.hpp"
#include "fluxlattice/lattice.hpp"
#include "fluxlattice/open_system.hpp"

namespace fl = fluxlattice;
using fl::Flux;
using fl::Rail;

namespace {

fl::DensityMatrix localized_rho(const fl::RhombicLattice& lat, fl::SiteId s) {
  return fl::DensityMatrix::from_single_excitation(fl::StateVector::localized(lat, s));
}

double max_offdiag(const Eigen::MatrixXcd& m, Eigen::Index r, Eigen::Index c) { return std::abs(m(r, c)); }

}  // namespace

TEST(DensityMatrix, Validation) {
  EXPECT_NO_THROW(fl::DensityMatrix(Eigen::MatrixXcd::Identity(3, 3) / 3.0));
  EXPECT_THROW(fl::DensityMatrix(Eigen::MatrixXcd::Identity(3, 3)), fl::InvalidArgument);
  Eigen::MatrixXcd nh = Eigen::MatrixXcd::Identity(2, 2) / 2.0;
  nh(0, 1) = 0.1;
  EXPECT_THROW(fl::DensityMatrix{nh}, fl::InvalidArgument);
  Eigen::MatrixXcd neg = Eigen::MatrixXcd::Zero(2, 2);
  neg(0, 0) = 1.5;
  neg(1, 1) = -0.5;
  EXPECT_THROW(fl::DensityMatrix{neg}, fl::InvalidArgument);
  EXPECT_THROW(fl::DensityMatrix(Eigen::MatrixXcd::Zero(2, 3)), fl::InvalidArgument);

  const auto rho = fl::DensityMatrix::from_single_excitation(fl::StateVector::basis(4, 2));
  EXPECT_EQ(rho.dim(), 5u);
  EXPECT_EQ(rho.matrix()(3, 3), 1.0);
  EXPECT_EQ(rho.matrix()(0, 0), 0.0);
}

TEST(DephasingRates, UniformAndFlat) {
  auto r = fl::DephasingRates::uniform(1, 0.2);
  EXPECT_EQ(r.flat(1), (std::vector<double>{0.2, 0.2, 0.2, 0.2}));
  r.gamma[{Rail::Up, 1}] = -1.0;
  EXPECT_THROW(r.flat(1), fl::InvalidArgument);
}

TEST(Lindblad, NoDephasingMatchesUnitary) {
  const auto lat = fl::uniform_lattice(2, Flux::Pi);
  const auto h = fl::hamiltonian_single_excitation(lat);
  const auto t = fl::uniform_times(4 * std::numbers::pi, 81);
  for (fl::SiteId s : {fl::SiteId{Rail::A, 2}, fl::SiteId{Rail::Up, 1}}) {
    const auto open = fl::lindblad_evolve(h, fl::DephasingRates::uniform(2, 0.0), localized_rho(lat, s), t);
    const auto closed = fl::evolve_unitary(h, fl::StateVector::localized(lat, s), t);
    EXPECT_LT(open.trace.max_abs_difference(closed), 1e-7);
    EXPECT_EQ(open.trace.labels, fl::site_labels(2));
  }
}

TEST(Lindblad, SingleSiteCoherenceDecay) {
  // Vacuum plus one site, H = 0: rho_01(t) = rho_01(0) exp(-gamma t / 2).
  const double gamma = 0.7;
  Eigen::VectorXcd plus(2);
  plus << 1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2;
  const auto rho0 = fl::DensityMatrix::pure(plus);
  const std::vector<double> rates{gamma};
  fl::LindbladOptions opt;
  opt.keep_snapshots = true;
  const auto t = fl::uniform_times(6.0, 31);
  const auto res = fl::lindblad_evolve_driven([](double) { return Eigen::MatrixXcd(Eigen::MatrixXcd::Zero(2, 2)); }, 0.0,
                                              rates, rho0, t, opt);
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_NEAR(std::abs(res.snapshots[k](0, 1)), 0.5 * std::exp(-gamma * t[k] / 2), 1e-7);
    EXPECT_NEAR(res.trace.populations(static_cast<Eigen::Index>(k), 0), 0.5, 1e-12);
    EXPECT_NEAR(res.vacuum_population[k], 0.5, 1e-12);
  }
}

TEST(Lindblad, TraceAndPositivity) {
  const auto lat = fl::uniform_lattice(2, Flux::Pi);
  fl::LindbladOptions opt;
  opt.keep_snapshots = true;
  const auto res = fl::lindblad_evolve(fl::hamiltonian_single_excitation(lat), fl::DephasingRates::uniform(2, 0.01),
                                       localized_rho(lat, {Rail::A, 2}), fl::uniform_times(4 * std::numbers::pi, 101), opt);
  for (std::size_t k = 0; k < res.snapshots.size(); ++k) {
    EXPECT_LT(res.trace_error[k], 1e-6);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(res.snapshots[k], Eigen::EigenvaluesOnly);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-6);
  }
  for (Eigen::Index k = 0; k < res.trace.populations.rows(); ++k) {
    EXPECT_NEAR(res.trace.populations.row(k).sum(), 1.0, 1e-6);
  }
}

TEST(Lindblad, PureDephasingMonotone) {
  const std::size_t sites = 4;
  Eigen::VectorXcd v(static_cast<Eigen::Index>(sites));
  v << 0.5, std::complex<double>(0.0, 0.5), -0.5, std::complex<double>(0.3, 0.4);
  v.normalize();
  const auto rho0 = fl::DensityMatrix::from_single_excitation(fl::StateVector(v));
  const fl::HermitianOperator zero(Eigen::MatrixXcd::Zero(4, 4));
  const std::vector<double> rates{0.1, 0.5, 0.0, 1.3};
  fl::LindbladOptions opt;
  opt.keep_snapshots = true;
  const auto res = fl::lindblad_evolve(zero, rates, rho0, fl::uniform_times(5.0, 26), opt);
  for (std::size_t k = 1; k < res.snapshots.size(); ++k) {
    for (Eigen::Index r = 1; r <= 4; ++r) {
      EXPECT_NEAR(res.snapshots[k](r, r).real(), rho0.matrix()(r, r).real(), 1e-12);
      for (Eigen::Index c = r + 1; c <= 4; ++c) {
        EXPECT_LE(max_offdiag(res.snapshots[k], r, c), max_offdiag(res.snapshots[k - 1], r, c) + 1e-15);
      }
    }
    EXPECT_LE(res.coherence_l1[k], res.coherence_l1[k - 1] + 1e-15);
  }
  // Sites 1 and 3 have rates 0.5 and 0: coherence decays at (0.5 + 0) / 2.
  const double t_end = 5.0;
  EXPECT_NEAR(std::abs(res.snapshots.back()(2, 3)), std::abs(rho0.matrix()(2, 3)) * std::exp(-0.25 * t_end), 1e-7);
}

TEST(Lindblad, FourthOrderConvergence) {
  const auto lat = fl::uniform_lattice(1, Flux::Zero);
  const auto h = fl::hamiltonian_single_excitation(lat);
  const std::vector<double> rates{0.3, 0.1, 0.2, 0.4};
  const std::vector<double> t{2.0};
  auto solve = [&](double step) {
    fl::LindbladOptions opt;
    opt.step_limit = 1e6;
    opt.max_step = step;
    opt.keep_snapshots = true;
    return fl::lindblad_evolve(h, rates, localized_rho(lat, {Rail::A, 1}), t, opt).snapshots.back();
  };
  const double h0 = 0.1;
  const Eigen::MatrixXcd ref = solve(h0 / 8);
  const double e1 = (solve(h0) - ref).cwiseAbs().maxCoeff();
  const double e2 = (solve(h0 / 2) - ref).cwiseAbs().maxCoeff();
  const double ratio = e1 / e2;
  EXPECT_GE(ratio, 14.0);
  EXPECT_LE(ratio, 18.0);
}

TEST(Lindblad, StepRule) {
  const auto lat = fl::uniform_lattice(1, Flux::Zero);
  const auto h = fl::hamiltonian_single_excitation(lat);
  const std::vector<double> t{0.0, 1.0};
  const auto res = fl::lindblad_evolve(h, fl::DephasingRates::uniform(1, 0.0), localized_rho(lat, {Rail::A, 1}), t);
  // Row-sum bound 2J with the default limit 0.02: 100 steps over Jt = 1.
  EXPECT_EQ(res.steps, 100u);
}

TEST(Lindblad, DivergentStepIsReported) {
  const auto lat = fl::uniform_lattice(1, Flux::Zero);
  fl::LindbladOptions opt;
  opt.step_limit = 1e3;
  EXPECT_THROW(fl::lindblad_evolve(fl::hamiltonian_single_excitation(lat), fl::DephasingRates::uniform(1, 20.0),
                                   localized_rho(lat, {Rail::A, 1}), fl::uniform_times(400.0, 41), opt),
               fl::NumericalError);
}

TEST(Lindblad, Errors) {
  const auto lat = fl::uniform_lattice(1, Flux::Zero);
  const auto h = fl::hamiltonian_single_excitation(lat);
  const std::vector<double> t{0.0, 1.0};
  const std::vector<double> short_rates{0.1, 0.1};
  EXPECT_THROW(fl::lindblad_evolve(h, short_rates, localized_rho(lat, {Rail::A, 1}), t), fl::InvalidArgument);
  const std::vector<double> neg{0.1, -0.1, 0.0, 0.0};
  EXPECT_THROW(fl::lindblad_evolve(h, neg, localized_rho(lat, {Rail::A, 1}), t), fl::InvalidArgument);
  const auto big = fl::DensityMatrix::from_single_excitation(fl::StateVector::basis(7, 0));
  EXPECT_THROW(fl::lindblad_evolve(h, fl::DephasingRates::uniform(1, 0.1), big, t), fl::InvalidArgument);
  fl::LindbladOptions opt;
  opt.step_limit = 0.0;
  EXPECT_THROW(fl::lindblad_evolve(h, fl::DephasingRates::uniform(1, 0.1), localized_rho(lat, {Rail::A, 1}), t, opt),
               fl::InvalidArgument);
  opt = {};
  opt.extra_collapse.push_back(Eigen::MatrixXcd::Zero(3, 3));
  EXPECT_THROW(fl::lindblad_evolve(h, fl::DephasingRates::uniform(1, 0.1), localized_rho(lat, {Rail::A, 1}), t, opt),
               fl::InvalidArgument);
}

TEST(Lindblad, ExtraCollapseDecaysToVacuum) {
  // sigma^- on site A1: amplitude decay at rate kappa.
  const auto lat = fl::uniform_lattice(1, Flux::Zero, 0.0);
  const double kappa = 0.4;
  fl::LindbladOptions opt;
  Eigen::MatrixXcd lower = Eigen::MatrixXcd::Zero(5, 5);
  lower(0, 1) = std::sqrt(kappa);
  opt.extra_collapse.push_back(lower);
  const std::vector<double> t{0.0, 2.0};
  const auto res = fl::lindblad_evolve(fl::hamiltonian_single_excitation(lat), fl::DephasingRates::uniform(1, 0.0),
                                       localized_rho(lat, {Rail::A, 1}), t, opt);
  EXPECT_NEAR(res.trace.populations(1, 0), std::exp(-kappa * 2.0), 1e-7);
  EXPECT_NEAR(res.vacuum_population[1], 1.0 - std::exp(-kappa * 2.0), 1e-7);
}

TEST(Fidelity, Examples) {
  const std::vector<double> a{0.5, 0.5}, b{1.0, 0.0};
  EXPECT_NEAR(fl::fidelity(a, b), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(fl::fidelity(a, b), 0.70711, 1e-5);
  EXPECT_DOUBLE_EQ(fl::fidelity(a, a), 1.0);
  const std::vector<double> c{0.0, 1.0};
  EXPECT_EQ(fl::fidelity(b, c), 0.0);
}

TEST(Fidelity, BoundsAndPermutation) {
  std::vector<double> n{0.1, 0.2, 0.3, 0.4}, m{0.25, 0.25, 0.4, 0.1};
  const double f = fl::fidelity(n, m);
  EXPECT_GE(f, 0.0);
  EXPECT_LE(f, 1.0);
  std::vector<double> pn{n[2], n[0], n[3], n[1]}, pm{m[2], m[0], m[3], m[1]};
  EXPECT_NEAR(fl::fidelity(pn, pm), f, 1e-15);
  EXPECT_NEAR(fl::fidelity(n, m), fl::fidelity(m, n), 1e-15);
}

TEST(Fidelity, RenormalizationAndErrors) {
  fl::Diagnostics diag;
  const std::vector<double> lossy{0.4998, 0.5}, ideal{0.5, 0.5};
  EXPECT_NEAR(fl::fidelity(lossy, ideal, &diag), 1.0, 1e-6);
  EXPECT_EQ(diag.warnings().size(), 1u);
  EXPECT_LT(fl::fidelity_raw(lossy, ideal), 1.0);

  fl::Diagnostics quiet;
  const std::vector<double> close{0.5 + 4e-7, 0.5};
  fl::fidelity(close, ideal, &quiet);
  EXPECT_TRUE(quiet.empty());

  const std::vector<double> far{0.4, 0.5};
  EXPECT_THROW(fl::fidelity(far, ideal), fl::InvalidArgument);
  const std::vector<double> negative{1.1, -0.1};
  EXPECT_THROW(fl::fidelity(negative, ideal), fl::InvalidArgument);
  const std::vector<double> three{0.3, 0.3, 0.4};
  EXPECT_THROW(fl::fidelity(three, ideal), fl::InvalidArgument);
  EXPECT_THROW(fl::fidelity_raw(three, ideal), fl::InvalidArgument);
}

TEST(Fidelity, EigenOverload) {
  Eigen::VectorXd a(3), b(3);
  a << 0.2, 0.3, 0.5;
  b << 0.2, 0.3, 0.5;
  EXPECT_NEAR(fl::fidelity(a, b), 1.0, 1e-15);
}
