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
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include "fluxlattice/bands.hpp"
#include "fluxlattice/dynamics.hpp"

namespace fl = fluxlattice;
using fl::Flux;
using fl::PmRail;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;

Eigen::Vector3d eig3(const Eigen::Matrix3cd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

TEST(RhombicBloch, PiFluxFlatAtEveryK) {
  for (int i = 0; i < 512; ++i) {
    const double k = -kPi + 2 * kPi * i / 511.0;
    const auto e = eig3(fl::rhombic_bloch(k, 1.0, kPi));
    EXPECT_NEAR(e(0), -2.0, 1e-12);
    EXPECT_NEAR(e(1), 0.0, 1e-12);
    EXPECT_NEAR(e(2), 2.0, 1e-12);
  }
}

TEST(RhombicBloch, ZeroFluxDispersion) {
  EXPECT_LT(eig3(fl::rhombic_bloch(kPi, 1.0, 0.0)).cwiseAbs().maxCoeff(), 1e-12);
  for (double k : {-2.5, -1.0, 0.0, 0.3, 2.9}) {
    const auto e = eig3(fl::rhombic_bloch(k, 1.0, 0.0));
    const double w = 2 * kSqrt2 * std::abs(std::cos(k / 2));
    EXPECT_NEAR(e(0), -w, 1e-12);
    EXPECT_NEAR(e(1), 0.0, 1e-12);
    EXPECT_NEAR(e(2), w, 1e-12);
  }
}

TEST(RhombicBloch, MatrixElementsHermitianPeriodic) {
  const double k = 0.7, j = 1.3;
  const auto h = fl::rhombic_bloch(k, j, kPi);
  EXPECT_NEAR(std::abs(h(0, 1) - (-j * (1.0 + std::polar(1.0, -k)))), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(h(0, 2) - (-j * (1.0 - std::polar(1.0, -k)))), 0.0, 1e-15);
  EXPECT_EQ(h.diagonal().cwiseAbs().maxCoeff(), 0.0);
  for (double phi : {0.0, kPi}) {
    for (double kk : {-3.0, 0.1, 1.9}) {
      const auto a = fl::rhombic_bloch(kk, j, phi);
      EXPECT_LT((a - a.adjoint()).cwiseAbs().maxCoeff(), 1e-15);
      EXPECT_LT((a - fl::rhombic_bloch(kk + 2 * kPi, j, phi)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
  EXPECT_THROW(fl::rhombic_bloch(0.0, 1.0, 1.0), fl::InvalidArgument);
}

TEST(TrimerBloch, ElementsAndValidation) {
  const auto h = fl::trimer_bloch(0.4, 1.0, 0.9);
  EXPECT_NEAR(h(0, 1).real(), -kSqrt2, 1e-15);
  EXPECT_NEAR(h(1, 2).real(), -kSqrt2, 1e-15);
  EXPECT_NEAR(std::abs(h(2, 0) - 0.9 * std::polar(1.0, -0.4)), 0.0, 1e-15);
  for (double k : {-2.0, 0.5, 3.1}) {
    const auto a = fl::trimer_bloch(k, 1.0, 1.7);
    EXPECT_LT((a - a.adjoint()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((a - fl::trimer_bloch(k + 2 * kPi, 1.0, 1.7)).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(fl::trimer_bloch(0.0, 0.0, 1.0), fl::InvalidArgument);
  EXPECT_THROW(fl::trimer_bloch(0.0, 1.0, -0.1), fl::InvalidArgument);
  EXPECT_THROW(fl::BlochModel::trimer(1.0, -1.0), fl::InvalidArgument);
}

TEST(TrimerBloch, DecoupledCellsAreFlat) {
  const auto bs = fl::band_structure(fl::BlochModel::trimer(1.0, 0.0), 129);
  for (double w : bs.bandwidths()) EXPECT_LT(w, 1e-12);
  EXPECT_NEAR(bs.energies(0, 0), -2.0, 1e-12);
  EXPECT_NEAR(bs.energies(0, 1), 0.0, 1e-12);
  EXPECT_NEAR(bs.energies(0, 2), 2.0, 1e-12);
}

TEST(TrimerBloch, UniformChainAtMatchedCoupling) {
  // Uniform chain with hop sqrt2 folded into a 3-site cell: E = 2 sqrt2 cos q,
  // q = (k + 2 pi n) / 3, up to the sign of the hops.
  const double k = 0.9;
  const auto e = eig3(fl::trimer_bloch(k, 1.0, kSqrt2));
  std::vector<double> want;
  for (int n = 0; n < 3; ++n) want.push_back(-2 * kSqrt2 * std::cos((k + kPi + 2 * kPi * n) / 3));
  std::sort(want.begin(), want.end());
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(e(i), want[static_cast<std::size_t>(i)], 1e-12);
}

TEST(BandStructure, RhombicFlatBands) {
  const auto pi = fl::band_structure(fl::BlochModel::rhombic(1.0, kPi), 512);
  EXPECT_EQ(pi.k_grid.size(), 512u);
  EXPECT_DOUBLE_EQ(pi.k_grid.front(), -kPi);
  EXPECT_DOUBLE_EQ(pi.k_grid.back(), kPi);
  for (double w : pi.bandwidths()) EXPECT_LT(w, 1e-10);

  const auto zero = fl::band_structure(fl::BlochModel::rhombic(1.0, 0.0), 513);
  EXPECT_LT(zero.bandwidth(1), 1e-10);
  EXPECT_NEAR(zero.energies.col(0).minCoeff(), -2 * kSqrt2, 1e-10);
  EXPECT_NEAR(zero.energies.col(2).maxCoeff(), 2 * kSqrt2, 1e-10);
  EXPECT_NEAR(zero.energies(256, 0), -2 * kSqrt2, 1e-10);  // k = 0
  int flat = 0;
  for (double w : zero.bandwidths()) flat += w < 1e-10;
  EXPECT_EQ(flat, 1);
  for (Eigen::Index r = 0; r < zero.energies.rows(); ++r) {
    EXPECT_LE(zero.energies(r, 0), zero.energies(r, 1));
    EXPECT_LE(zero.energies(r, 1), zero.energies(r, 2));
  }
  EXPECT_THROW(fl::band_structure(fl::BlochModel::rhombic(1.0, 0.0), 2), fl::InvalidArgument);
}

TEST(BandStructure, RealSpaceLatticeMatchesFlatBands) {
  const auto e = fl::hamiltonian_single_excitation(fl::uniform_lattice(10, Flux::Pi)).eigenvalues();
  const std::vector<double> allowed{-2.0, -kSqrt2, 0.0, kSqrt2, 2.0};
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    double best = 1e9;
    for (double a : allowed) best = std::min(best, std::abs(e(i) - a));
    EXPECT_LT(best, 1e-9) << e(i);
  }
}

TEST(BandStructure, TrimerRingMatchesBloch) {
  // Ring of 8 trimer cells assembled from the effective-model couplings.
  const int cells = 8;
  for (double delta : {0.5, 2.0}) {
    const auto m = fl::effective_model(fl::uniform_lattice(cells, Flux::Pi, 1.0, fl::antisymmetric_detunings(cells, delta)), delta);
    std::map<std::size_t, Eigen::Index> ring;  // model index -> ring index, dropping the last A site
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m.sites[i] == fl::PmSite{PmRail::A, cells + 1}) continue;
      ring[i] = static_cast<Eigen::Index>(ring.size());
    }
    const auto n = static_cast<Eigen::Index>(ring.size());
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& c : m.couplings) {
      Eigen::Index a = 0, b = 0;
      if (!ring.count(c.a) || !ring.count(c.b)) {
        a = ring.at(ring.count(c.a) ? c.a : c.b);
        b = 0;  // close onto A1
      } else {
        a = ring.at(c.a);
        b = ring.at(c.b);
      }
      h(a, b) += c.strength;
      h(b, a) += c.strength;
    }
    Eigen::VectorXd real_space = fl::HermitianOperator(h).eigenvalues();
    std::vector<double> bloch;
    for (int q = 0; q < cells; ++q) {
      const auto e = eig3(fl::trimer_bloch(2 * kPi * q / cells, 1.0, delta));
      bloch.insert(bloch.end(), e.data(), e.data() + 3);
    }
    std::sort(bloch.begin(), bloch.end());
    ASSERT_EQ(static_cast<std::size_t>(real_space.size()), bloch.size());
    for (std::size_t i = 0; i < bloch.size(); ++i) EXPECT_NEAR(real_space(static_cast<Eigen::Index>(i)), bloch[i], 1e-10);
  }
}

TEST(Zak, ReferenceValues) {
  const auto top = fl::zak_phase(fl::BlochModel::trimer(1.0, 2 * kSqrt2), 0, 512);
  ASSERT_TRUE(top.snapped.has_value());
  EXPECT_DOUBLE_EQ(*top.snapped, kPi);
  EXPECT_NEAR(std::abs(top.raw), kPi, 0.05);
  const auto triv = fl::zak_phase(fl::BlochModel::trimer(1.0, 0.5 * kSqrt2), 0, 512);
  ASSERT_TRUE(triv.snapped.has_value());
  EXPECT_DOUBLE_EQ(*triv.snapped, 0.0);
  EXPECT_NEAR(triv.raw, 0.0, 0.05);
  EXPECT_GT(triv.min_gap, 0.1);
}

TEST(Zak, QuantizedSweepWithSingleJump) {
  std::vector<double> z;
  for (double r : {0.2, 0.5, 0.8, 1.2, 1.5, 2.0}) {
    const auto res = fl::zak_phase(fl::BlochModel::trimer(1.0, r * kSqrt2), 0, 512);
    ASSERT_TRUE(res.snapped.has_value()) << r;
    z.push_back(*res.snapped);
  }
  EXPECT_EQ(z, (std::vector<double>{0.0, 0.0, 0.0, kPi, kPi, kPi}));
}

TEST(Zak, GapClosureAtMatchedCoupling) {
  EXPECT_THROW(fl::zak_phase(fl::BlochModel::trimer(1.0, kSqrt2), 0, 512), fl::GapClosureError);
  EXPECT_THROW(fl::zak_phase(fl::BlochModel::rhombic(1.0, 0.0), 1, 512), fl::GapClosureError);
  EXPECT_THROW(fl::zak_phase(fl::BlochModel::trimer(1.0, 1.0), 0, 32), fl::InvalidArgument);
  EXPECT_THROW(fl::zak_phase(fl::BlochModel::trimer(1.0, 1.0), 3, 128), fl::InvalidArgument);
}

TEST(Zak, GaugeInvariance) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  for (double r : {0.5, 2.0}) {
    const auto model = fl::BlochModel::trimer(1.0, r * kSqrt2);
    for (int band : {0, 1, 2}) {
      const auto bs = fl::band_states(model, band, 256);
      auto scrambled = bs.states;
      for (auto& v : scrambled) v *= std::polar(1.0, angle(rng));
      const double a = fl::wilson_loop_phase(bs.states);
      const double b = fl::wilson_loop_phase(scrambled);
      EXPECT_LT(std::abs(fl::wrap_phase(a - b)), 1e-8);
    }
  }
}

TEST(Zak, GridConvergence) {
  for (double r : {0.5, 2.0}) {
    const auto model = fl::BlochModel::trimer(1.0, r * kSqrt2);
    const double a = fl::zak_phase(model, 0, 256).raw;
    const double b = fl::zak_phase(model, 0, 512).raw;
    EXPECT_LT(std::abs(fl::wrap_phase(a - b)), 1e-3);
  }
}

TEST(Zak, PhaseHelpers) {
  EXPECT_NEAR(fl::wrap_phase(3 * kPi), kPi, 1e-12);
  EXPECT_NEAR(fl::wrap_phase(-kPi), kPi, 1e-12);
  EXPECT_NEAR(fl::wrap_phase(2 * kPi + 0.1), 0.1, 1e-12);
  EXPECT_EQ(fl::snap_zak(0.04), 0.0);
  EXPECT_EQ(fl::snap_zak(-kPi + 0.01), kPi);
  EXPECT_FALSE(fl::snap_zak(1.0).has_value());
  const std::vector<Eigen::VectorXcd> one{Eigen::VectorXcd::Ones(3)};
  EXPECT_THROW(fl::wilson_loop_phase(one), fl::InvalidArgument);
}
