#include "statelab/properties.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "statelab/error.hpp"
#include "statelab/rng.hpp"
#include "statelab/state_factory.hpp"

namespace statelab {
namespace {

constexpr double kPi = std::numbers::pi;

DensityMatrix fock_state(int n, int d) {
  CVector v = CVector::Zero(d);
  v(n) = 1.0;
  return DensityMatrix::from_pure(PureState::make(FockSpec(1, d), v));
}

std::vector<double> axis(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
  return g;
}

TEST(Fidelity, PureStateWithItselfIsOne) {
  const PureState psi = noon_pure(2, 0.4);
  EXPECT_NEAR(state_fidelity(DensityMatrix::from_pure(psi), psi), 1.0, 1e-12);
  EXPECT_THROW(state_fidelity(fock_state(0, 3), noon_pure(1, 0.0)), ValidationError);
}

TEST(Purity, MixedQubitIsOneHalf) {
  CMatrix m = CMatrix::Identity(2, 2) * 0.5;
  EXPECT_NEAR(purity(DensityMatrix::make(FockSpec(1, 2), m)), 0.5, 1e-15);
  EXPECT_NEAR(purity(fock_state(1, 3)), 1.0, 1e-15);
}

TEST(Qfi, PureStateIsFourTimesVariance) {
  const int d = 20;
  const PureState psi = cat_pure(cplx(0.8, 0.2), 0.5, d);
  const DensityMatrix rho = DensityMatrix::from_pure(psi);
  for (double phi : {0.0, 0.6, 1.9}) {
    const CMatrix x = quadrature_operator(d, phi);
    const cplx mean = psi.amplitudes.dot(x * psi.amplitudes);
    const cplx second = psi.amplitudes.dot(x * x * psi.amplitudes);
    const double var = second.real() - mean.real() * mean.real();
    EXPECT_NEAR(qfi(rho, x), 4.0 * var, 1e-8);
  }
}

TEST(Qfi, CommutingObservableGivesZero) {
  const DensityMatrix rho = make_cat(cplx(1.0, 0.0), 0.0, 0.7);
  CMatrix dephased = CMatrix::Zero(24, 24);
  for (int n = 0; n < 24; ++n) dephased(n, n) = rho.elements(n, n);
  const CMatrix a = annihilation_matrix(24);
  const CMatrix number = a.adjoint() * a;
  EXPECT_NEAR(qfi(DensityMatrix::make(rho.spec, dephased), number), 0.0, 1e-12);
}

TEST(Qfi, RejectsNonHermitianObservable) {
  EXPECT_THROW(qfi(fock_state(0, 4), annihilation_matrix(4)), ValidationError);
}

TEST(QfiOptimal, SqueezedVacuumPrefersAntiSqueezedQuadrature) {
  // Pure squeezed vacuum: F = 4 Var, maximal along p with 2 e^{2 xi}.
  const double xi = 0.5;
  const DensityMatrix rho = make_squeezed_vacuum(xi, 1.0);
  const OptimalQfi best = qfi_optimal_quadrature(rho);
  EXPECT_NEAR(best.phase, kPi / 2, 1e-5);
  EXPECT_NEAR(best.value, 2.0 * std::exp(2.0 * xi), 1e-6);
}

TEST(QfiOptimal, PhaseStaysInHalfOpenRange) {
  // Squeezing along x + p rotated close to 0 exercises the wrap.
  const int d = 24;
  GaussianCircuit c = GaussianCircuit::identity(1);
  c.squeezing[0] = std::polar(0.3, -0.02);
  const PureState psi = apply_gaussian_circuit(random_core_state(1, 0, 1, d), c);
  const OptimalQfi best = qfi_optimal_quadrature(DensityMatrix::from_pure(psi));
  EXPECT_GE(best.phase, 0.0);
  EXPECT_LT(best.phase, kPi);
  double scan = 0.0;
  for (int k = 0; k < 2000; ++k) scan = std::max(scan, qfi(DensityMatrix::from_pure(psi), quadrature_operator(d, kPi * k / 2000)));
  EXPECT_GE(best.value, scan - 1e-9);
}

TEST(ClassicalFidelity, BoundsAndMismatch) {
  Histogram p;
  Histogram q;
  p.bins[3] = 1.0;
  q.bins[4] = 1.0;
  EXPECT_NEAR(classical_fidelity(p, p), 1.0, 1e-15);
  EXPECT_NEAR(classical_fidelity(p, q), 0.0, 1e-15);
  std::vector<double> a{0.5, 0.5};
  std::vector<double> b{1.0, 0.0};
  EXPECT_NEAR(classical_fidelity(a, b, false), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(classical_fidelity(a, b), 0.5, 1e-15);
  std::vector<double> c{1.0};
  EXPECT_THROW(classical_fidelity(a, c), ValidationError);
}

TEST(SqueezingDb, ConversionRoundTrips) {
  EXPECT_NEAR(squeezing_db(0.0), 0.0, 1e-15);
  EXPECT_NEAR(squeezing_db(1.2), 10.42, 1e-2);
  EXPECT_NEAR(xi_from_db(squeezing_db(0.37)), 0.37, 1e-14);
  EXPECT_THROW(squeezing_db(-0.1), ValidationError);
}

TEST(Wigner, SinglePhotonOriginIsMinusOneOverPi) {
  EXPECT_NEAR(wigner_point(fock_state(1, 4), 0.0, 0.0), -1.0 / kPi, 1e-14);
  EXPECT_NEAR(wigner_point(fock_state(0, 4), 0.0, 0.0), 1.0 / kPi, 1e-14);
}

TEST(Wigner, FockStatesFollowLaguerreClosedForm) {
  for (int n = 0; n < 6; ++n) {
    for (double r2 : {0.0, 0.5, 2.0}) {
      const double x = std::sqrt(r2);
      const double expected = std::pow(-1.0, n) / kPi * std::exp(-r2) * std::laguerre(n, 2.0 * r2);
      EXPECT_NEAR(wigner_point(fock_state(n, 8), x, 0.0), expected, 1e-13);
    }
  }
}

TEST(Wigner, CoherentStateIsDisplacedGaussian) {
  const int d = 24;
  const cplx alpha(0.8, -0.5);
  GaussianCircuit c = GaussianCircuit::identity(1);
  c.displacement[0] = alpha;
  const DensityMatrix rho = DensityMatrix::from_pure(apply_gaussian_circuit(random_core_state(1, 0, 1, d), c));
  const double x0 = std::sqrt(2.0) * alpha.real();
  const double p0 = std::sqrt(2.0) * alpha.imag();
  for (double x : {-0.5, 0.3, 1.4}) {
    for (double p : {-1.2, 0.0, 0.4}) {
      const double expected = std::exp(-(x - x0) * (x - x0) - (p - p0) * (p - p0)) / kPi;
      EXPECT_NEAR(wigner_point(rho, x, p), expected, 1e-9);
    }
  }
}

TEST(Wigner, GridIntegratesToOne) {
  const DensityMatrix rho = make_cat(cplx(1.5, 0.0), kPi, 0.9);
  const auto xs = axis(-7, 7, 141);
  const Eigen::MatrixXd w = wigner_numeric(rho, xs, xs);
  EXPECT_LT(w.minCoeff(), 0.0);
  const auto narrow = axis(-1, 1, 21);
  EXPECT_THROW(wigner_numeric(rho, narrow, narrow), NumericalError);
}

TEST(Fidelity, NoonOneWithLossOnOneMode) {
  // 4x4 oracle: L0 on mode b maps |0,1> -> sqrt(eta)|0,1>, L1 maps |0,1> -> sqrt(1-eta)|0,0>.
  const double eta = 0.6;
  const DensityMatrix rho = make_noon(1, 0.0, 1.0, eta, 2);
  CMatrix expected = CMatrix::Zero(4, 4);
  const int i10 = 2, i01 = 1, i00 = 0;
  expected(i10, i10) = 0.5;
  expected(i01, i01) = 0.5 * eta;
  expected(i10, i01) = expected(i01, i10) = 0.5 * std::sqrt(eta);
  expected(i00, i00) = 0.5 * (1.0 - eta);
  EXPECT_LT((rho.elements - expected).cwiseAbs().maxCoeff(), 1e-12);
  const double f = 0.25 * (1.0 + eta + 2.0 * std::sqrt(eta));
  EXPECT_NEAR(state_fidelity(rho, noon_pure(1, 0.0, 2)), f, 1e-12);
}

TEST(Fidelity, OrthogonalStatesGiveZero) {
  EXPECT_NEAR(state_fidelity(fock_state(0, 3), PureState::make(FockSpec(1, 3), fock_state(2, 3).elements.col(2))), 0.0,
              1e-15);
}

TEST(Purity, LossyCatMatchesEigenvalues) {
  const DensityMatrix rho = make_cat(cplx(1.0, 0.0), 0.0, 0.7);
  const auto eig = hermitian_eig(rho.elements);
  EXPECT_NEAR(purity(rho), eig.values.squaredNorm(), 1e-12);
  EXPECT_LT(purity(rho), 1.0);
}

TEST(Qfi, HundredRandomPureStates) {
  Rng rng(21);
  const int d = 10;
  for (int t = 0; t < 100; ++t) {
    CVector v(d);
    for (auto& c : v) c = rng.complex_normal();
    v.normalize();
    // Keep the top level empty so x and p act exactly on the support.
    v(d - 1) = 0.0;
    v.normalize();
    const PureState psi = PureState::make(FockSpec(1, d), v);
    const CMatrix x = quadrature_operator(d, rng.uniform(0.0, kPi));
    const double mean = psi.amplitudes.dot(x * psi.amplitudes).real();
    const double second = psi.amplitudes.dot(x * x * psi.amplitudes).real();
    EXPECT_NEAR(qfi(DensityMatrix::from_pure(psi), x), 4.0 * (second - mean * mean), 1e-6);
  }
}

TEST(Qfi, MaximallyMixedBlockGivesZero) {
  CMatrix m = CMatrix::Zero(3, 3);
  m(0, 0) = m(1, 1) = 0.5;
  CMatrix a = CMatrix::Zero(3, 3);
  a(0, 1) = cplx(0.3, 0.4);
  a(1, 0) = std::conj(a(0, 1));
  a(0, 0) = 1.0;
  EXPECT_NEAR(qfi(DensityMatrix::make(FockSpec(1, 3), m), a), 0.0, 1e-14);
}

TEST(Qfi, ConvexOnCommutingMixtures) {
  // Diagonal states with a generator that connects levels.
  const CMatrix x = quadrature_operator(6, 0.0);
  for (double w : {0.2, 0.5, 0.8}) {
    const DensityMatrix a = fock_state(1, 6);
    const DensityMatrix b = fock_state(2, 6);
    const DensityMatrix mix = DensityMatrix::make(a.spec, w * a.elements + (1 - w) * b.elements);
    EXPECT_LE(qfi(mix, x), w * qfi(a, x) + (1 - w) * qfi(b, x) + 1e-12);
  }
}

TEST(QfiOptimal, VacuumIsTwo) {
  EXPECT_NEAR(qfi_optimal_quadrature(fock_state(0, 6)).value, 2.0, 1e-9);
}

TEST(QfiOptimal, RotationShiftsTheOptimalPhase) {
  const int d = 30;
  auto squeezed = [d](double angle) {
    GaussianCircuit c = GaussianCircuit::identity(1);
    c.squeezing[0] = std::polar(0.4, angle);
    return DensityMatrix::from_pure(apply_gaussian_circuit(random_core_state(1, 0, 1, d), c));
  };
  const OptimalQfi a = qfi_optimal_quadrature(squeezed(0.0));
  const OptimalQfi b = qfi_optimal_quadrature(squeezed(0.6));
  EXPECT_NEAR(a.value, b.value, 1e-6);
  // Squeezing phase phi rotates the ellipse by phi / 2.
  EXPECT_NEAR(std::fmod(b.phase - a.phase + kPi, kPi), 0.3, 1e-5);
}

TEST(ClassicalFidelity, UniformAgainstHalfSupportIsOneHalf) {
  Histogram p;
  Histogram q;
  for (int k = 0; k < kHistogramBins; ++k) {
    p.bins[k] = 1.0 / kHistogramBins;
    q.bins[k] = k < 25 ? 1.0 / 25 : 0.0;
  }
  EXPECT_NEAR(classical_fidelity(p, q), 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(classical_fidelity(p, q), classical_fidelity(q, p));
}

TEST(SqueezingDb, EightDecibelsInverse) { EXPECT_NEAR(xi_from_db(8.0), 0.9210, 1e-4); }

TEST(Wigner, OddCatHasNegativeCentralFringe) {
  const DensityMatrix rho = make_cat(cplx(1.5, 0.0), kPi, 1.0);
  double min = 1e9;
  for (double x = -3.0; x <= 3.0; x += 0.05)
    for (double p = -3.0; p <= 3.0; p += 0.05) min = std::min(min, wigner_point(rho, x, p));
  EXPECT_LT(wigner_point(rho, 0.0, 0.0), 0.0);
  EXPECT_LT(min, -0.05);
}

TEST(Wigner, VacuumPeaksAtOrigin) {
  const DensityMatrix rho = fock_state(0, 4);
  const auto xs = axis(-5, 5, 101);
  const Eigen::MatrixXd w = wigner_numeric(rho, xs, xs);
  EXPECT_GT(w.minCoeff(), 0.0);
  EXPECT_NEAR(w.maxCoeff(), 1.0 / kPi, 1e-12);
}

TEST(PropertyLabel, RangeChecks) {
  EXPECT_NO_THROW((PropertyLabel{PropertyKind::kPurity, 0.4}.validate()));
  EXPECT_THROW((PropertyLabel{PropertyKind::kPurity, 0.0}.validate()), ValidationError);
  EXPECT_THROW((PropertyLabel{PropertyKind::kNegativityClass, 0.5}.validate()), ValidationError);
  EXPECT_THROW((PropertyLabel{PropertyKind::kQfi, -1.0}.validate()), ValidationError);
  EXPECT_EQ(parse_property_kind("cat_size"), PropertyKind::kCatSize);
}

}  // namespace
}  // namespace statelab
