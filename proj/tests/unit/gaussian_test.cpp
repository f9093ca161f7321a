#include "statelab/gaussian.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "statelab/error.hpp"
#include "statelab/homodyne.hpp"
#include "statelab/properties.hpp"
#include "statelab/state_factory.hpp"

namespace statelab {
namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
  return g;
}

GaussianCircuit two_mode_squeezer(double r) {
  // Opposite single-mode squeezers on a 50:50 splitter.
  GaussianCircuit c = GaussianCircuit::identity(2);
  c.squeezing = {cplx(r), cplx(-r)};
  c.post_interferometer[0].theta = kPi / 4;
  return c;
}

/// Heralded a rho a^dagger (or a^dagger rho a) in Fock space, renormalized.
DensityMatrix fock_degaussify(const DensityMatrix& rho, DegaussKind kind, int mode) {
  const CMatrix a = embed_single_mode_op(annihilation_matrix(rho.spec.cutoff()), mode, rho.spec);
  const CMatrix op = kind == DegaussKind::kSubtracted ? a : CMatrix(a.adjoint());
  CMatrix out = op * rho.elements * op.adjoint();
  out /= out.trace();
  return DensityMatrix::make(rho.spec, out);
}

TEST(Symplectic, CircuitMatricesPreserveOmega) {
  const int m = 3;
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  for (int i = 0; i < m; ++i) {
    omega(2 * i, 2 * i + 1) = 1.0;
    omega(2 * i + 1, 2 * i) = -1.0;
  }
  const Eigen::MatrixXd s = squeezer_symplectic(m, 1, std::polar(0.4, 1.1));
  const Eigen::MatrixXd b = beam_splitter_symplectic(m, {1, 2, 0.6, 2.2});
  EXPECT_LT((s * omega * s.transpose() - omega).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((b * omega * b.transpose() - omega).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((b * b.transpose() - Eigen::MatrixXd::Identity(2 * m, 2 * m)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CircuitToGaussian, IdentityGivesVacuum) {
  const GaussianState g = circuit_to_gaussian(GaussianCircuit::identity(3));
  EXPECT_LT(g.mean.norm(), 1e-15);
  EXPECT_LT((g.cov - 0.5 * Eigen::MatrixXd::Identity(6, 6)).norm(), 1e-15);
}

TEST(CircuitToGaussian, RealSqueezingSqueezesX) {
  GaussianCircuit c = GaussianCircuit::identity(1);
  c.squeezing[0] = 0.3;
  const GaussianState g = circuit_to_gaussian(c);
  EXPECT_NEAR(g.cov(0, 0), 0.5 * std::exp(-0.6), 1e-14);
  EXPECT_NEAR(g.cov(1, 1), 0.5 * std::exp(0.6), 1e-14);
  EXPECT_NEAR(g.cov(0, 1), 0.0, 1e-14);
}

TEST(CircuitToGaussian, MatchesFockMomentsForRandomCircuits) {
  const int d = 16;
  CircuitRanges ranges;
  for (int m = 1; m <= 2; ++m) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const GaussianCircuit c = random_gaussian_circuit(m, ranges, seed);
      const PureState psi = apply_gaussian_circuit(random_core_state(m, 0, seed, d), c);
      const GaussianState fock = moments_from_fock(DensityMatrix::from_pure(psi));
      const GaussianState phase = circuit_to_gaussian(c);
      EXPECT_LT((fock.mean - phase.mean).cwiseAbs().maxCoeff(), 1e-5) << "m=" << m << " seed=" << seed;
      EXPECT_LT((fock.cov - phase.cov).cwiseAbs().maxCoeff(), 1e-5) << "m=" << m << " seed=" << seed;
    }
  }
}

TEST(LossOnGaussian, MatchesFockLossChannel) {
  const int d = 16;
  const GaussianCircuit c = random_gaussian_circuit(2, CircuitRanges{}, 42);
  const std::vector<double> eta{0.7, 0.85};
  const PureState psi = apply_gaussian_circuit(random_core_state(2, 0, 1, d), c);
  const GaussianState fock = moments_from_fock(apply_loss_channel(psi, LossSpec{eta, d - 1}));
  const GaussianState phase = loss_on_gaussian(circuit_to_gaussian(c), eta);
  EXPECT_LT((fock.mean - phase.mean).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_LT((fock.cov - phase.cov).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(LossOnGaussian, UnitEfficiencyAndVacuumFixedPoint) {
  GaussianCircuit c = GaussianCircuit::identity(1);
  c.squeezing[0] = 0.3;
  const GaussianState g = circuit_to_gaussian(c);
  const std::vector<double> one{1.0};
  EXPECT_LT((loss_on_gaussian(g, one).cov - g.cov).norm(), 1e-15);
  const std::vector<double> eta{0.4};
  EXPECT_LT((loss_on_gaussian(GaussianState::vacuum(1), eta).cov - 0.5 * Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-15);
  const GaussianState lossy = loss_on_gaussian(g, std::vector<double>{0.8});
  EXPECT_NEAR(lossy.cov(0, 0), 0.8 * 0.5 * std::exp(-0.6) + 0.1, 1e-14);
}

TEST(SymplecticEigenvalues, PureStatesSitAtOneHalf) {
  const GaussianState g = circuit_to_gaussian(random_gaussian_circuit(3, CircuitRanges{}, 5));
  const Eigen::VectorXd nu = symplectic_eigenvalues(g);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(nu(i), 0.5, 1e-10);
  const GaussianState lossy = loss_on_gaussian(g, std::vector<double>{0.6, 0.7, 0.8});
  for (double v : symplectic_eigenvalues(lossy)) EXPECT_GE(v, 0.5 - 1e-12);
  EXPECT_NO_THROW(lossy.validate());
}

TEST(GaussianState, RejectsUnphysicalCovariance) {
  GaussianState g = GaussianState::vacuum(1);
  g.cov *= 0.5;
  EXPECT_THROW(g.validate(), NumericalError);
}

TEST(Degaussify, SubtractionFromVacuumIsRejected) {
  EXPECT_THROW(degaussify(GaussianState::vacuum(2), DegaussKind::kSubtracted, 0), ValidationError);
  EXPECT_NO_THROW(degaussify(GaussianState::vacuum(2), DegaussKind::kAdded, 1));
}

TEST(Degaussify, PhotonAddedVacuumIsSinglePhoton) {
  const DegaussifiedState s = degaussify(GaussianState::vacuum(1), DegaussKind::kAdded, 0);
  const auto g = grid(-8, 8, 401);
  for (double theta : {0.0, 0.7, 2.0}) {
    const auto p = marginal_density(s, 0, theta, g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g[i];
      EXPECT_NEAR(p[i], 2.0 * x * x * std::exp(-x * x) / std::sqrt(kPi), 1e-12);
    }
  }
  Eigen::VectorXd origin = Eigen::VectorXd::Zero(2);
  EXPECT_NEAR(wigner_value(s, origin), -1.0 / kPi, 1e-12);
  const WignerMinResult wm = wigner_min(s);
  EXPECT_TRUE(wm.converged);
  EXPECT_NEAR(wm.value, -1.0 / kPi, 1e-4);
}

TEST(Degaussify, MarginalsMatchFockOracle) {
  const int d = 18;
  const double r = 0.3;
  const GaussianCircuit c = two_mode_squeezer(r);
  const std::vector<double> eta{0.8, 0.9};
  const PureState psi = apply_gaussian_circuit(random_core_state(2, 0, 1, d), c);
  const DensityMatrix rho = apply_loss_channel(psi, LossSpec{eta, d - 1});
  GaussianState g = loss_on_gaussian(circuit_to_gaussian(c), eta);
  const auto gr = default_grid();
  for (auto kind : {DegaussKind::kSubtracted, DegaussKind::kAdded}) {
    const DensityMatrix fock = fock_degaussify(rho, kind, 0);
    const DegaussifiedState s = degaussify(g, kind, 0);
    for (int mode = 0; mode < 2; ++mode) {
      for (double theta : {0.0, 0.9, 2.4}) {
        const auto ref = fock_marginal(fock, {mode, theta}, gr);
        const auto got = marginal_density(s, mode, theta, gr);
        double err = 0.0;
        for (std::size_t i = 0; i < gr.size(); ++i) err = std::max(err, std::abs(ref[i] - got[i]));
        EXPECT_LT(err, 1e-5) << "kind=" << int(kind) << " mode=" << mode << " theta=" << theta;
      }
    }
  }
}

TEST(Degaussify, DisplacedSubtractionMatchesFockOracle) {
  const int d = 30;
  GaussianCircuit c = GaussianCircuit::identity(1);
  c.squeezing[0] = std::polar(0.25, 0.8);
  c.displacement[0] = cplx(0.4, -0.3);
  const PureState psi = apply_gaussian_circuit(random_core_state(1, 0, 1, d), c);
  const DensityMatrix rho = DensityMatrix::from_pure(psi);
  const GaussianState g = circuit_to_gaussian(c);
  const DensityMatrix fock = fock_degaussify(rho, DegaussKind::kSubtracted, 0);
  const DegaussifiedState s = degaussify(g, DegaussKind::kSubtracted, 0);
  EXPECT_NEAR(mean_photon_number(g, 0), (annihilation_matrix(d).adjoint() * annihilation_matrix(d) * rho.elements).trace().real(), 1e-6);
  for (double x : {-1.5, -0.2, 0.0, 0.7}) {
    for (double p : {-1.0, 0.3, 1.2}) {
      Eigen::VectorXd pt(2);
      pt << x, p;
      EXPECT_NEAR(wigner_value(s, pt), wigner_point(fock, x, p), 1e-6) << x << "," << p;
    }
  }
}

/// Dense search of the two-mode Wigner function.
double brute_force_min(const DegaussifiedState& s) {
  const auto axis = grid(-3, 3, 41);
  double best = 1e9;
  Eigen::VectorXd pt(4);
  for (double a : axis)
    for (double b : axis)
      for (double c : axis)
        for (double e : axis) {
          pt << a, b, c, e;
          best = std::min(best, wigner_value(s, pt));
        }
  return best;
}

TEST(WignerMin, GaussianStatesReportZero) {
  const GaussianState g = circuit_to_gaussian(random_gaussian_circuit(2, CircuitRanges{}, 3));
  EXPECT_EQ(wigner_min(degaussify(g, DegaussKind::kNone, 0)).value, 0.0);
}

TEST(WignerMin, TwoModeAgreesWithDenseGrid) {
  const GaussianState g = loss_on_gaussian(circuit_to_gaussian(random_gaussian_circuit(2, CircuitRanges{}, 11)),
                                           std::vector<double>{0.75, 0.9});
  for (auto kind : {DegaussKind::kSubtracted, DegaussKind::kAdded}) {
    const DegaussifiedState s = degaussify(g, kind, 1);
    const WignerMinResult wm = wigner_min(s);
    const double grid_min = brute_force_min(s);
    EXPECT_TRUE(wm.converged);
    EXPECT_LE(wm.value, grid_min + 1e-12);
    EXPECT_NEAR(wm.value, grid_min, 2e-3);
  }
}

TEST(WignerMin, LossWashesOutNegativity) {
  GaussianCircuit c = GaussianCircuit::identity(1);
  c.squeezing[0] = 0.3;
  const GaussianState g = circuit_to_gaussian(c);
  double prev = -1.0;
  for (double eta : {1.0, 0.9, 0.7, 0.55}) {
    const DegaussifiedState s = degaussify(loss_on_gaussian(g, std::vector<double>{eta}), DegaussKind::kSubtracted, 0);
    const double v = wigner_min(s).value;
    EXPECT_GE(v, prev - 1e-9);
    prev = v;
  }
  EXPECT_NEAR(wigner_min(degaussify(g, DegaussKind::kSubtracted, 0)).value, -1.0 / kPi, 1e-6);
  // Subtraction from a thermal-like state below eta = 1/2 leaves W >= 0.
  const DegaussifiedState thermal =
      degaussify(loss_on_gaussian(g, std::vector<double>{0.3}), DegaussKind::kSubtracted, 0);
  EXPECT_GE(wigner_min(thermal).value, 0.0);
}

TEST(WignerMin, InvariantUnderPhaseRotation) {
  GaussianCircuit c = GaussianCircuit::identity(2);
  c.squeezing = {std::polar(0.3, 0.2), std::polar(0.15, 1.0)};
  c.displacement = {cplx(0.3, 0.1), cplx(-0.2, 0.0)};
  c.post_interferometer[0] = {0, 1, 0.5, 0.3};
  const GaussianState base_g = loss_on_gaussian(circuit_to_gaussian(c), std::vector<double>{0.8, 0.8});
  const double base = wigner_min(degaussify(base_g, DegaussKind::kSubtracted, 0)).value;
  const double rot = 0.9;
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(4, 4);
  r.block<2, 2>(2, 2) << std::cos(rot), -std::sin(rot), std::sin(rot), std::cos(rot);
  GaussianState turned = base_g;
  turned.mean = r * base_g.mean;
  turned.cov = r * base_g.cov * r.transpose();
  EXPECT_LT(base, 0.0);
  EXPECT_NEAR(wigner_min(degaussify(turned, DegaussKind::kSubtracted, 0)).value, base, 1e-7);
}

TEST(WignerMin, SingleModeAgreesWithFineGrid) {
  GaussianCircuit c = GaussianCircuit::identity(1);
  c.squeezing[0] = std::polar(0.4, 0.6);
  c.displacement[0] = cplx(0.5, -0.2);
  const DegaussifiedState s = degaussify(loss_on_gaussian(circuit_to_gaussian(c), std::vector<double>{0.85}),
                                         DegaussKind::kAdded, 0);
  double grid_min = 1e9;
  Eigen::VectorXd q(2);
  for (double x = -4.0; x <= 4.0; x += 0.01) {
    for (double p = -4.0; p <= 4.0; p += 0.01) {
      q << x, p;
      grid_min = std::min(grid_min, wigner_value(s, q));
    }
  }
  const double v = wigner_min(s).value;
  EXPECT_LE(v, grid_min + 1e-12);
  EXPECT_NEAR(v, grid_min, 1e-4);
}

TEST(MomentsFromFock, SinglePhotonHasThreeHalvesVariance) {
  CVector one = CVector::Zero(6);
  one(1) = 1.0;
  const GaussianState m = moments_from_fock(DensityMatrix::from_pure(PureState::make(FockSpec(1, 6), one)));
  EXPECT_NEAR(m.cov(0, 0), 1.5, 1e-12);
  EXPECT_NEAR(m.cov(1, 1), 1.5, 1e-12);
  EXPECT_NEAR(m.mean.norm(), 0.0, 1e-12);
}

}  // namespace
}  // namespace statelab
