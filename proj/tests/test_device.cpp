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

#include <cmath>
#include <random>
#include <vector>

#include "fluxlattice/device.hpp"

namespace fl = fluxlattice;

namespace {

// Symmetric dispersive coupler, frequencies in GHz.
fl::CouplerSpec symmetric(double omega_c, double g_ab = 0.005) {
  fl::CouplerSpec s;
  s.omega_a = s.omega_b = 4.1;
  s.omega_c = omega_c;
  s.u_a = s.u_b = -0.2;
  s.u_c = -0.1;
  s.g_ac = s.g_bc = 0.1;
  s.g_ab = g_ab;
  return s;
}

}  // namespace

TEST(Coupler, SymmetricClosedForm) {
  for (double wc : {5.1, 5.5, 6.3, 8.0}) {
    const auto s = symmetric(wc);
    EXPECT_NEAR(fl::g_eff(s), 0.005 + 0.01 / (4.1 - wc), 1e-15);
  }
  EXPECT_NEAR(fl::g_eff(symmetric(5.5)), -0.0021428571428571434, 1e-15);
}

TEST(Coupler, AsymmetricFormula) {
  fl::CouplerSpec s = symmetric(5.6);
  s.omega_b = 4.3;
  s.g_bc = 0.08;
  const double want = 0.005 + 0.5 * 0.1 * 0.08 * (1.0 / (4.1 - 5.6) + 1.0 / (4.3 - 5.6));
  EXPECT_NEAR(fl::g_eff(s), want, 1e-15);
}

TEST(Coupler, FarDetunedLimit) {
  EXPECT_NEAR(fl::g_eff(symmetric(1e6)), 0.005, 1e-7);
  EXPECT_NEAR(fl::g_eff(symmetric(1e9)), 0.005, 1e-10);
}

TEST(Coupler, DispersiveChecks) {
  EXPECT_THROW(fl::g_eff(symmetric(4.5)), fl::InvalidArgument);
  fl::Diagnostics diag;
  fl::g_eff(symmetric(4.9), &diag);  // ratio 8
  EXPECT_EQ(diag.warnings().size(), 1u);
  fl::Diagnostics quiet;
  fl::g_eff(symmetric(5.5), &quiet);  // ratio 14
  EXPECT_TRUE(quiet.empty());
  EXPECT_DOUBLE_EQ(fl::dispersive_ratio(symmetric(5.5)), 14.0);
}

TEST(Coupler, MonotoneAboveBand) {
  double prev = -1e9;
  for (double wc = 4.7; wc < 12.0; wc += 0.01) {
    const double g = fl::g_eff(symmetric(wc));
    EXPECT_GT(g, prev);
    prev = g;
  }
}

TEST(Coupler, OffPointClosedForm) {
  // omega_c = omega + g^2 / g_ab.
  EXPECT_NEAR(fl::coupler_off_frequency(symmetric(0.0)), 6.1, 1e-9 * 6.1);
  EXPECT_NEAR(fl::coupler_off_frequency(symmetric(0.0, 0.01)), 5.1, 1e-9 * 5.1);
  const double root = fl::coupler_off_frequency(symmetric(0.0), {5.0, 9.0});
  EXPECT_NEAR(root, 6.1, 1e-9);
  EXPECT_LT(std::abs(fl::g_eff_unchecked(symmetric(root))), 1e-12);
}

TEST(Coupler, OffPointErrors) {
  EXPECT_THROW(fl::coupler_off_frequency(symmetric(0.0, 0.0)), fl::NumericalError);
  EXPECT_THROW(fl::coupler_off_frequency(symmetric(0.0, 0.0), {4.6, 1e5}), fl::NumericalError);
  EXPECT_THROW(fl::coupler_off_frequency(symmetric(0.0), {7.0, 9.0}), fl::NumericalError);
  EXPECT_THROW(fl::coupler_off_frequency(symmetric(0.0), {4.0, 9.0}), fl::InvalidArgument);
  EXPECT_THROW(fl::coupler_off_frequency(symmetric(0.0), {9.0, 5.0}), fl::InvalidArgument);
}

TEST(ThreeMode, AgreesWithPerturbativeFormula) {
  for (double wc : {5.1, 5.5, 7.5, 9.0}) {
    const auto s = symmetric(wc);
    const auto r = fl::three_mode_vacuum_rabi(s);
    const double g = fl::g_eff(s);
    EXPECT_LT(std::abs(r.coupling - g) / std::abs(g), 0.05) << "omega_c " << wc;
    EXPECT_NEAR(r.splitting, 2 * r.magnitude, 1e-12);
    EXPECT_LT(r.hybridization, 0.2);
  }
  const auto r = fl::three_mode_vacuum_rabi(symmetric(5.5));
  EXPECT_NEAR(r.coupling, -0.00209626, 2e-8);
  EXPECT_EQ(r.sign, fl::CouplingSign::Negative);
}

TEST(ThreeMode, DirectCouplingOnly) {
  fl::CouplerSpec s = symmetric(5.5, 0.004);
  s.g_ac = s.g_bc = 0.0;
  const auto r = fl::three_mode_vacuum_rabi(s);
  EXPECT_NEAR(r.splitting, 2 * 0.004, 1e-15);
  EXPECT_EQ(r.sign, fl::CouplingSign::Positive);
  EXPECT_EQ(r.hybridization, 0.0);
}

TEST(ThreeMode, SignChangeAcrossSweep) {
  std::vector<fl::CouplingSign> signs;
  for (double wc : {5.3, 5.6, 8.0, 9.0}) signs.push_back(fl::three_mode_vacuum_rabi(symmetric(wc)).sign);
  EXPECT_EQ(signs.front(), fl::CouplingSign::Negative);
  EXPECT_EQ(signs.back(), fl::CouplingSign::Positive);
  const auto near_off = fl::three_mode_vacuum_rabi(symmetric(fl::coupler_off_frequency(symmetric(0.0))));
  EXPECT_LT(near_off.magnitude, 1e-4);
}

TEST(ThreeMode, TruncationConverged) {
  const auto s = symmetric(5.8);
  const double a = fl::three_mode_vacuum_rabi(s, 3).coupling;
  const double b = fl::three_mode_vacuum_rabi(s, 4).coupling;
  EXPECT_LT(std::abs(a - b) / std::abs(a), 1e-3);
  EXPECT_EQ(fl::three_mode_vacuum_rabi(s, 2).coupling, a);
}

TEST(ThreeMode, HamiltonianStructure) {
  const auto s = symmetric(5.5);
  const Eigen::MatrixXd h = fl::three_mode_hamiltonian(s, 3);
  EXPECT_EQ(h.rows(), 27);
  EXPECT_LT((h - h.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  // |2,0,0>: 2 omega_a + U_a.
  EXPECT_NEAR(h(18, 18), 2 * 4.1 - 0.2, 1e-15);
  // <1,0,0| H |0,0,1> = g_ac.
  EXPECT_NEAR(h(9, 1), 0.1, 1e-15);
  EXPECT_THROW(fl::three_mode_hamiltonian(s, 1), fl::InvalidArgument);
}

TEST(ThreeMode, HybridizedIsRejected) {
  EXPECT_THROW(fl::three_mode_vacuum_rabi(symmetric(4.15)), fl::NumericalError);
  EXPECT_STREQ(fl::to_string(fl::CouplingSign::Indeterminate), "indeterminate");
}

TEST(TuneCurve, Values) {
  const fl::TransmonTuneCurve c(4.891, 3.639);
  EXPECT_DOUBLE_EQ(fl::tune_curve(c, 0.0), 4.891);
  EXPECT_NEAR(fl::tune_curve(c, 0.5), 3.639, 1e-12);
  const double d = (3.639 / 4.891) * (3.639 / 4.891);
  EXPECT_NEAR(fl::tune_curve(c, 0.25), 4.891 * std::pow(0.5 + 0.5 * d * d, 0.25), 1e-14);
  EXPECT_NEAR(fl::tune_curve(c, 0.25), 4.397056730713708, 1e-12);
}

TEST(TuneCurve, PeriodicAndSymmetric) {
  const fl::TransmonTuneCurve c(5.2, 3.1);
  for (double phi : {0.03, 0.17, 0.31, 0.44}) {
    EXPECT_NEAR(fl::tune_curve(c, phi), fl::tune_curve(c, phi + 1.0), 1e-12);
    EXPECT_NEAR(fl::tune_curve(c, phi), fl::tune_curve(c, -phi), 1e-12);
    EXPECT_NEAR(fl::tune_curve(c, 0.5 - phi), fl::tune_curve(c, 0.5 + phi), 1e-12);
    EXPECT_GE(fl::tune_curve(c, phi), 3.1 - 1e-12);
    EXPECT_LE(fl::tune_curve(c, phi), 5.2 + 1e-12);
  }
  EXPECT_THROW(fl::TransmonTuneCurve(3.0, 4.0), fl::InvalidArgument);
  EXPECT_THROW(fl::TransmonTuneCurve(3.0, 0.0), fl::InvalidArgument);
}

TEST(Crosstalk, IdentityAndSmallMatrix) {
  const fl::CrosstalkMatrix id(Eigen::MatrixXd::Identity(3, 3));
  Eigen::VectorXd v(3);
  v << 0.1, -0.2, 0.3;
  EXPECT_EQ(fl::crosstalk_correct(id, v), v);

  Eigen::MatrixXd m(2, 2);
  m << 1.0, 6e-4, 6e-4, 1.0;
  const fl::CrosstalkMatrix x(m, {"A1", "A2"});
  Eigen::VectorXd t(2);
  t << 0.25, -0.4;
  const Eigen::VectorXd applied = fl::crosstalk_correct(x, t);
  EXPECT_LT((m * applied - t).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(x.condition_number(), (1 + 6e-4) / (1 - 6e-4), 1e-12);
}

TEST(Crosstalk, RandomRoundTrip) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1e-3, 1e-3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(7, 7);
    for (Eigen::Index i = 0; i < 7; ++i) {
      for (Eigen::Index j = 0; j < 7; ++j) {
        if (i != j) m(i, j) = u(rng);
      }
    }
    Eigen::VectorXd v(7);
    for (Eigen::Index i = 0; i < 7; ++i) v(i) = 10 * u(rng) * 100;
    const Eigen::VectorXd a = fl::crosstalk_correct(fl::CrosstalkMatrix(m), v);
    EXPECT_LT((m * a - v).norm(), 1e-10 * v.norm());
  }
}

TEST(Crosstalk, Validation) {
  Eigen::MatrixXd singular(2, 2);
  singular << 1.0, 1.0, 1.0, 1.0;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(2);
  EXPECT_THROW(fl::crosstalk_correct(fl::CrosstalkMatrix(singular), v), fl::NumericalError);
  Eigen::MatrixXd bad_diag = Eigen::MatrixXd::Identity(2, 2);
  bad_diag(1, 1) = 0.9;
  EXPECT_THROW(fl::CrosstalkMatrix{bad_diag}, fl::InvalidArgument);
  EXPECT_THROW(fl::CrosstalkMatrix(Eigen::MatrixXd::Identity(2, 2), {"only"}), fl::InvalidArgument);
  EXPECT_THROW(fl::CrosstalkMatrix(Eigen::MatrixXd::Zero(2, 3)), fl::InvalidArgument);
  EXPECT_THROW(fl::crosstalk_correct(fl::CrosstalkMatrix(Eigen::MatrixXd::Identity(3, 3)), v), fl::InvalidArgument);
}

TEST(CrosstalkFit, SyntheticRecovery) {
  const auto data = fl::synthetic_crosstalk(-6e-4, 1e-5, 21, 20240601);
  const auto fit = fl::crosstalk_fit(data.source, data.target);
  EXPECT_NEAR(fit.element, 6e-4, 3e-5);
  EXPECT_NEAR(fit.slope, -fit.element, 0.0);
  EXPECT_LT(fit.residual_rms, 3e-5);
  // Same seed, same data.
  EXPECT_EQ(fl::synthetic_crosstalk(-6e-4, 1e-5, 21, 20240601).target, data.target);
}

TEST(CrosstalkFit, ExactCases) {
  const std::vector<double> x{-0.3, 0.5}, y{0.1, -0.3};
  const auto f = fl::crosstalk_fit(x, y);
  EXPECT_NEAR(f.slope, -0.5, 1e-15);
  EXPECT_NEAR(f.intercept, -0.05, 1e-15);
  EXPECT_NEAR(f.residual_rms, 0.0, 1e-15);
  const std::vector<double> flat(5, 0.02), xs{-0.2, -0.1, 0.0, 0.1, 0.2};
  EXPECT_NEAR(fl::crosstalk_fit(xs, flat).slope, 0.0, 1e-15);
}

TEST(CrosstalkFit, Errors) {
  const std::vector<double> same{0.1, 0.1, 0.1}, y{0.0, 1.0, 2.0}, one{0.1}, two{0.1, 0.2};
  EXPECT_THROW(fl::crosstalk_fit(same, y), fl::InvalidArgument);
  EXPECT_THROW(fl::crosstalk_fit(one, one), fl::InvalidArgument);
  EXPECT_THROW(fl::crosstalk_fit(two, y), fl::InvalidArgument);
  EXPECT_THROW(fl::synthetic_crosstalk(1e-3, 0.0, 1, 1), fl::InvalidArgument);
}
