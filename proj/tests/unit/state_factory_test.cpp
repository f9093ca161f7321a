#include "statelab/state_factory.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "statelab/error.hpp"
#include "statelab/properties.hpp"

namespace statelab {
namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

TEST(RandomCoreState, RankZeroIsVacuum) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const CoreState core = random_core_state(2, 0, seed, 8);
    ASSERT_EQ(core.terms.size(), 1u);
    EXPECT_EQ(core.terms[0].occupation, (std::vector<int>{0, 0}));
    EXPECT_NEAR(std::abs(core.terms[0].coefficient - 1.0), 0.0, 1e-15);
  }
}

TEST(RandomCoreState, SingleModeRankTwoHasTopTerm) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const CoreState core = random_core_state(1, 2, seed, 8);
    EXPECT_EQ(core.stellar_rank, 2);
    const PureState psi = core.to_pure();
    EXPECT_NEAR(psi.amplitudes.squaredNorm(), 1.0, 1e-12);
    EXPECT_GT(std::abs(psi.amplitudes(2)), 0.0);
    EXPECT_GE(core.terms.size(), 1u);
    EXPECT_LE(core.terms.size(), 3u);  // only |0>, |1>, |2> exist at total <= 2
  }
}

TEST(RandomCoreState, SupportStaysWithinRank) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const CoreState core = random_core_state(3, 4, seed, 8);
    bool has_top = false;
    for (const auto& t : core.terms) {
      EXPECT_LE(t.total_photons(), 4);
      has_top = has_top || (t.total_photons() == 4 && std::abs(t.coefficient) > 0.0);
    }
    EXPECT_TRUE(has_top);
    EXPECT_GT(core.max_top_weight(), 0.0);
  }
}

TEST(RandomCoreState, RejectsRankBeyondCutoff) {
  EXPECT_THROW(random_core_state(1, 8, 1, 8), ValidationError);
}

TEST(StellarFunction, VacuumIsConstantOne) {
  const CoreState core = random_core_state(2, 0, 7, 8);
  const std::vector<cplx> alpha{cplx(0.3, -1.0), cplx(2.0, 0.5)};
  EXPECT_NEAR(std::abs(stellar_function_eval(core, alpha) - 1.0), 0.0, 1e-15);
}

TEST(StellarFunction, ThreeModeCoreZeroOneTwo) {
  CoreState core{FockSpec(3, 4), {{{0, 1, 2}, cplx(1.0)}}, 3};
  EXPECT_EQ(core.terms[0].total_photons(), 3);
  const cplx z2(0.4, 0.7);
  const cplx z3(-1.1, 0.2);
  const std::vector<cplx> alpha{cplx(1.0), z2, z3};
  const cplx expected = z2 * z3 * z3 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(stellar_function_eval(core, alpha) - expected), 0.0, 1e-14);
}

TEST(StellarFunction, FockStateMatchesCoherentOverlap) {
  for (int n = 0; n < 6; ++n) {
    CoreState core{FockSpec(1, 8), {{{n}, cplx(1.0)}}, n};
    const cplx alpha(0.7, -0.3);
    // e^{|a|^2/2} <a*|n> = a^n / sqrt(n!)
    const cplx expected = std::pow(alpha, n) / std::sqrt(factorial(n));
    const std::vector<cplx> a{alpha};
    EXPECT_NEAR(std::abs(stellar_function_eval(core, a) - expected), 0.0, 1e-13);
  }
}

TEST(GaussianCircuit, IdentityLeavesStateUnchanged) {
  const CoreState core = random_core_state(2, 2, 5, 8);
  const PureState out = apply_gaussian_circuit(core, GaussianCircuit::identity(2));
  EXPECT_LT((out.amplitudes - core.to_pure().amplitudes).norm(), 1e-12);
}

TEST(GaussianCircuit, SqueezedVacuumHasEvenPhotonsOnly) {
  GaussianCircuit c = GaussianCircuit::identity(1);
  c.squeezing[0] = 0.1;
  const PureState out = apply_gaussian_circuit(random_core_state(1, 0, 1, 10), c);
  for (int n = 1; n < 10; n += 2) EXPECT_LT(std::abs(out.amplitudes(n)), 1e-14);
  EXPECT_GT(std::abs(out.amplitudes(2)), 0.01);
}

TEST(GaussianCircuit, DisplacedVacuumIsPoissonian) {
  GaussianCircuit c = GaussianCircuit::identity(1);
  c.displacement[0] = cplx(1.0, 0.0);
  const PureState out = apply_gaussian_circuit(random_core_state(1, 0, 1, 16), c);
  for (int n = 0; n < 16; ++n) {
    const double poisson = std::exp(-1.0) / factorial(n);
    EXPECT_NEAR(std::norm(out.amplitudes(n)), poisson, 1e-6) << "n=" << n;
  }
}

TEST(GaussianCircuit, MatchesClosedFormSqueezedVacuum) {
  GaussianCircuit c = GaussianCircuit::identity(1);
  c.squeezing[0] = 0.4;
  const PureState fock = apply_gaussian_circuit(random_core_state(1, 0, 1, 24), c);
  const PureState closed = squeezed_vacuum_pure(0.4, 24);
  EXPECT_GT(std::norm(fock.amplitudes.dot(closed.amplitudes)), 1.0 - 1e-9);
}

TEST(GaussianCircuit, RejectsWrongChainStructure) {
  GaussianCircuit c = GaussianCircuit::identity(3);
  c.pre_interferometer.pop_back();
  EXPECT_THROW(c.validate(), ValidationError);
  c = GaussianCircuit::identity(3);
  c.post_interferometer[1].mode_a = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(GaussianCircuit, BeamSplitterIsUnitaryOnConservedBlocks) {
  const int d = 5;
  const CMatrix u = beam_splitter_unitary(0.7, 1.3, d);
  // Blocks with total photon number < d are untouched by the truncation.
  for (int na = 0; na < d; ++na) {
    for (int nb = 0; na + nb < d; ++nb) {
      double col_norm = 0.0;
      for (int r = 0; r < d * d; ++r) col_norm += std::norm(u(r, na * d + nb));
      EXPECT_NEAR(col_norm, 1.0, 1e-12);
    }
  }
  // 50:50 on |1,0> gives (cos, e^{i phi} sin) amplitudes on |1,0>, |0,1>.
  const CMatrix h = beam_splitter_unitary(std::numbers::pi / 4, 0.0, d);
  EXPECT_NEAR(std::abs(h(1 * d + 0, 1 * d + 0)), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(std::abs(h(0 * d + 1, 1 * d + 0)), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(GaussianCircuit, TruncationFailureIsLoud) {
  GaussianCircuit c = GaussianCircuit::identity(1);
  c.displacement[0] = cplx(2.5, 0.0);
  EXPECT_THROW(apply_gaussian_circuit(random_core_state(1, 0, 1, 8), c), NumericalError);
}

/// Counts zeros of the truncated single-mode stellar function inside |z| < radius
/// by the argument principle.
int count_stellar_zeros(const PureState& psi, double radius) {
  const int samples = 4096;
  double winding = 0.0;
  cplx prev;
  for (int k = 0; k <= samples; ++k) {
    const cplx z = std::polar(radius, 2.0 * std::numbers::pi * k / samples);
    cplx f(0.0);
    cplx power(1.0);
    for (int n = 0; n < psi.amplitudes.size(); ++n) {
      f += psi.amplitudes(n) * power / std::sqrt(factorial(n));
      power *= z;
    }
    if (k > 0) winding += std::arg(f / prev);
    prev = f;
  }
  return static_cast<int>(std::lround(winding / (2.0 * std::numbers::pi)));
}

TEST(GaussianCircuit, PreservesStellarRank) {
  const int d = 30;
  const std::vector<std::vector<std::pair<int, cplx>>> cores = {
      {{0, 1.0}},
      {{1, 1.0}, {0, 0.3}},
      {{2, 1.0}, {0, 0.8}, {1, cplx(0.0, 0.2)}},
  };
  for (std::size_t r = 0; r < cores.size(); ++r) {
    CVector amps = CVector::Zero(d);
    for (auto [n, c] : cores[r]) amps(n) = c;
    amps.normalize();
    const PureState core = PureState::make(FockSpec(1, d), amps);
    GaussianCircuit c = GaussianCircuit::identity(1);
    c.squeezing[0] = std::polar(0.15, 0.4);
    c.displacement[0] = cplx(0.2, -0.1);
    const PureState out = apply_gaussian_circuit(core, c);
    EXPECT_EQ(count_stellar_zeros(core, 2.0), static_cast<int>(r));
    EXPECT_EQ(count_stellar_zeros(out, 2.0), static_cast<int>(r)) << "rank " << r;
  }
}

TEST(LossChannel, UnitEfficiencyIsIdentity) {
  const CoreState core = random_core_state(2, 2, 9, 6);
  const DensityMatrix rho = DensityMatrix::from_pure(core.to_pure());
  const DensityMatrix out = apply_loss_channel(rho, LossSpec{{1.0, 1.0}});
  EXPECT_LT((out.elements - rho.elements).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(LossChannel, SinglePhotonDecaysToVacuum) {
  const double eta = 0.37;
  CVector one = CVector::Zero(4);
  one(1) = 1.0;
  const DensityMatrix out = apply_loss_channel(PureState::make(FockSpec(1, 4), one), LossSpec{{eta}});
  CMatrix expected = CMatrix::Zero(4, 4);
  expected(1, 1) = eta;
  expected(0, 0) = 1.0 - eta;
  EXPECT_LT((out.elements - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(LossChannel, CoherentStateStaysCoherent) {
  const int d = 20;
  const cplx alpha(0.9, 0.4);
  const double eta = 0.6;
  auto coherent = [d](cplx a) {
    CVector v(d);
    for (int n = 0; n < d; ++n) v(n) = std::exp(-0.5 * std::norm(a)) * std::pow(a, n) / std::sqrt(factorial(n));
    v.normalize();
    return PureState::make(FockSpec(1, d), v);
  };
  const DensityMatrix out = apply_loss_channel(coherent(alpha), LossSpec{{eta}, d - 1});
  EXPECT_GE(state_fidelity(out, coherent(std::sqrt(eta) * alpha)), 1.0 - 1e-6);
  EXPECT_NEAR(out.trace().real(), 1.0, 1e-6);
}

TEST(LossChannel, ChannelsOnDistinctModesCommute) {
  const CoreState core = random_core_state(2, 3, 13, 6);
  const DensityMatrix rho = DensityMatrix::from_pure(core.to_pure());
  const DensityMatrix ab = apply_loss_channel(apply_loss_channel(rho, LossSpec{{0.7, 1.0}}), LossSpec{{1.0, 0.8}});
  const DensityMatrix ba = apply_loss_channel(apply_loss_channel(rho, LossSpec{{1.0, 0.8}}), LossSpec{{0.7, 1.0}});
  EXPECT_LT((ab.elements - ba.elements).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(ab.trace().real(), 1.0, 1e-6);
}

TEST(LossChannel, IsPositiveAndTracePreserving) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const CoreState core = random_core_state(2, 3, seed, 6);
    const DensityMatrix out = apply_loss_channel(core.to_pure(), LossSpec{{0.65, 0.9}});
    // make() re-validates Hermiticity, unit trace and positivity.
    EXPECT_NO_THROW(DensityMatrix::make(out.spec, out.elements));
  }
}

TEST(LossChannel, SingleModeMatchesKrausSum) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> nd;
  const int d = 12;
  CMatrix g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = cplx(nd(rng), nd(rng)) * std::exp(-0.4 * (i + j));
  CMatrix rho = g * g.adjoint();
  rho /= rho.trace();
  for (int truncation : {3, d - 1}) {
    CMatrix expected = CMatrix::Zero(d, d);
    for (const CMatrix& k : loss_kraus_operators(d, 0.63, truncation)) expected += k * rho * k.adjoint();
    const DensityMatrix in{FockSpec(1, d), rho};
    try {
      const DensityMatrix out = apply_loss_channel(in, LossSpec{{0.63}, truncation});
      EXPECT_LT((out.elements - expected).cwiseAbs().maxCoeff(), 1e-12);
    } catch (const NumericalError&) {
      // A short Kraus truncation may leave a trace deficit; the oracle must agree.
      EXPECT_GT(std::abs(expected.trace().real() - 1.0), 1e-6);
    }
  }
}

TEST(LossChannel, RejectsInvalidEfficiency) {
  const DensityMatrix rho = DensityMatrix::from_pure(random_core_state(1, 0, 1, 4).to_pure());
  EXPECT_THROW(apply_loss_channel(rho, LossSpec{{0.0}}), ValidationError);
  EXPECT_THROW(apply_loss_channel(rho, LossSpec{{1.2}}), ValidationError);
}

TEST(Noon, LosslessSinglePhotonIsPure) {
  const DensityMatrix rho = make_noon(1, 0.0, 1.0, 1.0);
  EXPECT_NEAR(purity(rho), 1.0, 1e-12);
  const PureState psi = noon_pure(1, 0.0);
  const std::vector<int> a{1, 0};
  const std::vector<int> b{0, 1};
  EXPECT_NEAR(std::abs(psi.amplitudes(psi.spec.index(a)) - 1.0 / std::sqrt(2.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(psi.amplitudes(psi.spec.index(b)) - 1.0 / std::sqrt(2.0)), 0.0, 1e-15);
}

TEST(Noon, LossyFidelityMatchesNoLossBranch) {
  // Only the no-loss Kraus branch overlaps the ideal state, so
  // F = |(eta_a^{N/2} + eta_b^{N/2}) / 2|^2.
  for (auto [n, ea, eb] : {std::tuple{2, 0.5, 0.5}, std::tuple{3, 0.9, 0.6}, std::tuple{5, 0.7, 0.75}}) {
    const DensityMatrix rho = make_noon(n, 0.3, ea, eb);
    const double expected = std::pow(0.5 * (std::pow(ea, n / 2.0) + std::pow(eb, n / 2.0)), 2);
    EXPECT_NEAR(state_fidelity(rho, noon_pure(n, 0.3)), expected, 1e-12);
    EXPECT_LT(purity(rho), 1.0);
  }
}

TEST(Noon, RejectsZeroPhotons) {
  EXPECT_THROW(make_noon(0, 0.0, 1.0, 1.0), ValidationError);
}

TEST(Cat, SmallAmplitudeEvenCatIsVacuum) {
  const PureState psi = cat_pure(cplx(1e-9, 0.0), 0.0);
  EXPECT_NEAR(std::norm(psi.amplitudes(0)), 1.0, 1e-12);
}

TEST(Cat, OddLimitIsSinglePhoton) {
  const PureState psi = cat_pure(cplx(0.0, 0.0), std::numbers::pi);
  EXPECT_NEAR(std::norm(psi.amplitudes(1)), 1.0, 1e-12);
}

TEST(Cat, ParityFollowsRelativePhase) {
  const DensityMatrix odd = make_cat(cplx(1.0, 0.0), std::numbers::pi, 1.0);
  const DensityMatrix even = make_cat(cplx(1.3, 0.4), 0.0, 1.0);
  for (int n = 0; n < 24; ++n) {
    if (n % 2 == 0) EXPECT_LT(odd.elements(n, n).real(), 1e-9);
    else EXPECT_LT(even.elements(n, n).real(), 1e-9);
  }
}

TEST(Cat, AnalyticNormalizationHoldsAtCutoff24) {
  for (double a : {0.3, 1.0, 2.0}) {
    for (double phi : {0.0, 1.0, 2.5}) {
      const cplx alpha = std::polar(a, 0.7);
      const PureState psi = cat_pure(alpha, phi);
      // Overlap identity |<alpha|-alpha>|^2 = e^{-4|alpha|^2}.
      EXPECT_NEAR(std::pow(std::exp(-2.0 * a * a), 2), std::exp(-4.0 * a * a), 1e-15);
      const double n2 = std::pow(cat_normalization(alpha, phi), -2);
      EXPECT_NEAR(n2, 2.0 + 2.0 * std::cos(phi) * std::exp(-2.0 * a * a), 1e-12);
      EXPECT_NEAR(psi.amplitudes.squaredNorm(), 1.0, 1e-9);
    }
  }
}

TEST(SqueezedVacuum, ZeroSqueezingIsVacuum) {
  const DensityMatrix rho = make_squeezed_vacuum(0.0, 1.0);
  EXPECT_NEAR(rho.elements(0, 0).real(), 1.0, 1e-15);
}

TEST(SqueezedVacuum, CutoffGrowsWithSqueezing) {
  EXPECT_GT(squeezed_vacuum_cutoff(1.2), squeezed_vacuum_cutoff(0.5));
  EXPECT_NO_THROW(make_squeezed_vacuum(1.2, 0.5));
  EXPECT_THROW(make_squeezed_vacuum(1.2, 1.0, 24), NumericalError);
  EXPECT_THROW(make_squeezed_vacuum(1.5, 1.0), ValidationError);
}

TEST(CutoffHeuristic, ClampsToRange) {
  EXPECT_EQ(cutoff_heuristic(0, 0.0), 8);
  EXPECT_EQ(cutoff_heuristic(5, 0.2), 13);
  EXPECT_EQ(cutoff_heuristic(20, 1.2), 24);
}

}  // namespace
}  // namespace statelab
