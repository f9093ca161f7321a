#include "statelab/state_factory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "statelab/error.hpp"
#include "statelab/rng.hpp"

namespace statelab {

namespace {

constexpr int kHeadroom = 2;

/// exp(G) for anti-Hermitian G through the eigendecomposition of iG.
CMatrix exp_anti_hermitian(const CMatrix& generator) {
  const cplx i(0.0, 1.0);
  const EigenDecomposition eig = hermitian_eig(i * generator);
  Eigen::VectorXcd phases(eig.values.size());
  for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
    phases(k) = std::exp(-i * eig.values(k));
  }
  return eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
}

double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

void enumerate_indices(int modes, int max_total, std::vector<int>& current,
                       std::vector<std::vector<int>>& out) {
  if (static_cast<int>(current.size()) == modes) {
    out.push_back(current);
    return;
  }
  int used = 0;
  for (int n : current) used += n;
  for (int n = 0; n + used <= max_total; ++n) {
    current.push_back(n);
    enumerate_indices(modes, max_total, current, out);
    current.pop_back();
  }
}

}  // namespace

int CoreTerm::total_photons() const {
  int total = 0;
  for (int n : occupation) total += n;
  return total;
}

double CoreState::max_top_weight() const {
  double best = 0.0;
  for (const auto& t : terms) {
    if (t.total_photons() == stellar_rank) best = std::max(best, std::abs(t.coefficient));
  }
  return best;
}

PureState CoreState::to_pure() const {
  CVector amps = CVector::Zero(static_cast<Eigen::Index>(spec.dim()));
  for (const auto& t : terms) {
    amps(static_cast<Eigen::Index>(spec.index(t.occupation))) += t.coefficient;
  }
  return PureState::make(spec, std::move(amps));
}

GaussianCircuit GaussianCircuit::identity(int num_modes) {
  GaussianCircuit c;
  c.num_modes = num_modes;
  for (int i = 0; i + 1 < num_modes; ++i) {
    c.pre_interferometer.push_back({i, i + 1, 0.0, 0.0});
    c.post_interferometer.push_back({i, i + 1, 0.0, 0.0});
  }
  c.squeezing.assign(num_modes, cplx(0.0));
  c.displacement.assign(num_modes, cplx(0.0));
  return c;
}

void GaussianCircuit::validate(double xi_max) const {
  if (num_modes < 1) throw ValidationError("GaussianCircuit: num_modes must be positive");
  const auto m = static_cast<std::size_t>(num_modes);
  if (squeezing.size() != m || displacement.size() != m) {
    throw ValidationError("GaussianCircuit: per-mode parameter count mismatch");
  }
  for (const auto* chain : {&pre_interferometer, &post_interferometer}) {
    if (chain->size() != m - 1) {
      throw ValidationError("GaussianCircuit: interferometer needs m-1 beam splitters");
    }
    for (std::size_t k = 0; k < chain->size(); ++k) {
      const auto& bs = (*chain)[k];
      if (bs.mode_a != static_cast<int>(k) || bs.mode_b != static_cast<int>(k) + 1) {
        throw ValidationError("GaussianCircuit: interferometer must be a nearest-neighbour chain");
      }
    }
  }
  if (max_squeezing() > xi_max) {
    throw ValidationError("GaussianCircuit: squeezing exceeds xi_max");
  }
}

double GaussianCircuit::max_squeezing() const {
  double best = 0.0;
  for (const cplx& xi : squeezing) best = std::max(best, std::abs(xi));
  return best;
}

void LossSpec::validate() const {
  for (double eta : efficiencies) {
    if (!(eta > 0.0) || eta > 1.0) {
      throw ValidationError("invalid efficiency: eta must lie in (0, 1], got " +
                            std::to_string(eta));
    }
  }
  if (kraus_truncation < 1) {
    throw ValidationError("LossSpec: kraus_truncation must be >= 1");
  }
}

CoreState random_core_state(int num_modes, int stellar_rank, std::uint64_t seed,
                            int cutoff) {
  if (stellar_rank < 0) throw ValidationError("random_core_state: r must be >= 0");
  if (stellar_rank > cutoff - 1) {
    throw ValidationError("random_core_state: stellar rank " +
                          std::to_string(stellar_rank) + " exceeds cutoff capacity");
  }
  FockSpec spec(num_modes, cutoff);
  Rng rng(seed);

  std::vector<std::vector<int>> all;
  std::vector<int> scratch;
  enumerate_indices(num_modes, stellar_rank, scratch, all);
  std::vector<std::vector<int>> top;
  std::vector<std::vector<int>> lower;
  for (auto& idx : all) {
    int total = 0;
    for (int n : idx) total += n;
    (total == stellar_rank ? top : lower).push_back(idx);
  }

  const int k = rng.integer(1, 4);
  std::vector<std::vector<int>> chosen;
  chosen.push_back(top[rng.integer(0, static_cast<int>(top.size()) - 1)]);
  // Remaining picks come from every other index of total <= r.
  std::vector<std::vector<int>> pool = lower;
  for (auto& idx : top) {
    if (idx != chosen.front()) pool.push_back(idx);
  }
  std::shuffle(pool.begin(), pool.end(), rng.engine());
  for (int i = 1; i < k && i - 1 < static_cast<int>(pool.size()); ++i) {
    chosen.push_back(pool[i - 1]);
  }

  CoreState core{spec, {}, stellar_rank};
  double norm2 = 0.0;
  for (auto& idx : chosen) {
    const cplx c = rng.complex_normal();
    norm2 += std::norm(c);
    core.terms.push_back({idx, c});
  }
  // Fix the global phase so the forced rank-r term is real positive.
  const cplx phase = std::polar(1.0, -std::arg(core.terms.front().coefficient));
  for (auto& t : core.terms) t.coefficient *= phase / std::sqrt(norm2);
  return core;
}

GaussianCircuit random_gaussian_circuit(int num_modes, const CircuitRanges& ranges,
                                        std::uint64_t seed) {
  Rng rng(seed);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  GaussianCircuit c;
  c.num_modes = num_modes;
  auto chain = [&]() {
    std::vector<BeamSplitter> out;
    for (int i = 0; i + 1 < num_modes; ++i) {
      out.push_back({i, i + 1, rng.uniform(0.0, std::numbers::pi / 2), rng.uniform(0.0, kTwoPi)});
    }
    return out;
  };
  c.pre_interferometer = chain();
  for (int i = 0; i < num_modes; ++i) {
    const double r = rng.uniform(ranges.xi_min, ranges.xi_max);
    c.squeezing.push_back(std::polar(r, rng.uniform(0.0, kTwoPi)));
    const double amp = ranges.displacement_max * std::sqrt(rng.uniform());
    c.displacement.push_back(std::polar(amp, rng.uniform(0.0, kTwoPi)));
  }
  c.post_interferometer = chain();
  return c;
}

int cutoff_heuristic(int stellar_rank, double xi_max) {
  const int d = stellar_rank + static_cast<int>(std::ceil(10.0 * xi_max)) + 6;
  return std::clamp(d, 8, 24);
}

CMatrix squeeze_unitary(cplx xi, int cutoff) {
  const int big = cutoff + kHeadroom;
  const CMatrix a = annihilation_matrix(big);
  const CMatrix ad = a.adjoint();
  const CMatrix gen = 0.5 * (std::conj(xi) * (a * a) - xi * (ad * ad));
  return exp_anti_hermitian(gen).topLeftCorner(cutoff, cutoff);
}

CMatrix displacement_unitary(cplx alpha, int cutoff) {
  const int big = cutoff + kHeadroom;
  const CMatrix a = annihilation_matrix(big);
  const CMatrix gen = alpha * a.adjoint() - std::conj(alpha) * a;
  return exp_anti_hermitian(gen).topLeftCorner(cutoff, cutoff);
}

CMatrix beam_splitter_unitary(double theta, double phi, int cutoff) {
  const int big = cutoff + kHeadroom;
  const cplx e = std::polar(1.0, phi);
  CMatrix out = CMatrix::Zero(cutoff * cutoff, cutoff * cutoff);
  // The coupler conserves n_a + n_b, so exponentiate one block per total.
  for (int total = 0; total <= 2 * (big - 1); ++total) {
    std::vector<int> na_list;
    for (int na = std::max(0, total - big + 1); na <= std::min(total, big - 1); ++na) {
      na_list.push_back(na);
    }
    const auto size = static_cast<Eigen::Index>(na_list.size());
    CMatrix gen = CMatrix::Zero(size, size);
    for (Eigen::Index r = 0; r < size; ++r) {
      const int na = na_list[r];
      const int nb = total - na;
      for (Eigen::Index c = 0; c < size; ++c) {
        const int ma = na_list[c];
        const int mb = total - ma;
        // e a b^dagger: |ma, mb> -> sqrt(ma (mb+1)) |ma-1, mb+1>
        if (na == ma - 1 && nb == mb + 1) gen(r, c) += theta * e * std::sqrt(double(ma) * (mb + 1));
        // -conj(e) a^dagger b: |ma, mb> -> sqrt((ma+1) mb) |ma+1, mb-1>
        if (na == ma + 1 && nb == mb - 1) gen(r, c) -= theta * std::conj(e) * std::sqrt(double(ma + 1) * mb);
      }
    }
    const CMatrix block = exp_anti_hermitian(gen);
    for (Eigen::Index r = 0; r < size; ++r) {
      const int na = na_list[r];
      const int nb = total - na;
      if (na >= cutoff || nb >= cutoff) continue;
      for (Eigen::Index c = 0; c < size; ++c) {
        const int ma = na_list[c];
        const int mb = total - ma;
        if (ma >= cutoff || mb >= cutoff) continue;
        out(na * cutoff + nb, ma * cutoff + mb) = block(r, c);
      }
    }
  }
  return out;
}

namespace {

void apply_chain(CVector& amps, const FockSpec& spec,
                 const std::vector<BeamSplitter>& chain) {
  for (const auto& bs : chain) {
    if (bs.theta == 0.0) continue;
    apply_two_mode(amps, spec, beam_splitter_unitary(bs.theta, bs.phi, spec.cutoff()),
                   bs.mode_a, bs.mode_b);
  }
}

}  // namespace

PureState apply_gaussian_circuit(const PureState& input,
                                 const GaussianCircuit& circuit) {
  circuit.validate();
  const FockSpec& spec = input.spec;
  if (circuit.num_modes != spec.num_modes()) {
    throw ValidationError("apply_gaussian_circuit: circuit/spec mode mismatch");
  }
  CVector amps = input.amplitudes;
  apply_chain(amps, spec, circuit.pre_interferometer);
  for (int i = 0; i < spec.num_modes(); ++i) {
    if (circuit.displacement[i] != cplx(0.0)) {
      apply_single_mode(amps, spec, displacement_unitary(circuit.displacement[i], spec.cutoff()), i);
    }
    if (circuit.squeezing[i] != cplx(0.0)) {
      apply_single_mode(amps, spec, squeeze_unitary(circuit.squeezing[i], spec.cutoff()), i);
    }
  }
  apply_chain(amps, spec, circuit.post_interferometer);

  const double norm2 = amps.squaredNorm();
  PureState out{spec, amps / std::sqrt(norm2)};
  check_truncation(out);
  if (std::abs(norm2 - 1.0) > kTailTolerance) {
    throw NumericalError("apply_gaussian_circuit: truncation leaked norm " +
                         std::to_string(1.0 - norm2));
  }
  return out;
}

PureState apply_gaussian_circuit(const CoreState& core,
                                 const GaussianCircuit& circuit) {
  return apply_gaussian_circuit(core.to_pure(), circuit);
}

std::vector<CMatrix> loss_kraus_operators(int cutoff, double eta, int truncation) {
  if (!(eta > 0.0) || eta > 1.0) {
    throw ValidationError("invalid efficiency: eta must lie in (0, 1]");
  }
  std::vector<CMatrix> ops;
  const int nmax = std::min(truncation, cutoff - 1);
  for (int n = 0; n <= nmax; ++n) {
    if (eta == 1.0 && n > 0) break;
    CMatrix l = CMatrix::Zero(cutoff, cutoff);
    for (int k = 0; k + n < cutoff; ++k) {
      // <k|L_n|k+n> = sqrt(C(k+n, n) (1-eta)^n eta^k)
      double log_v = log_factorial(k + n) - log_factorial(k) - log_factorial(n) +
                     k * std::log(eta);
      if (n > 0) log_v += n * std::log1p(-eta);
      l(k, k + n) = std::exp(0.5 * log_v);
    }
    ops.push_back(std::move(l));
  }
  return ops;
}

namespace {

/// Single-mode loss applied elementwise:
/// rho'_{jk} = sum_n c(j,n) c(k,n) rho_{j+n,k+n}, c(j,n) = <j|L_n|j+n>.
CMatrix single_mode_loss(const CMatrix& rho, double eta, int truncation) {
  const int d = static_cast<int>(rho.rows());
  const int nmax = std::min(truncation, d - 1);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, nmax + 1);
  for (int j = 0; j < d; ++j) {
    for (int n = 0; n <= nmax && j + n < d; ++n) {
      double log_v = log_factorial(j + n) - log_factorial(j) - log_factorial(n) + j * std::log(eta);
      if (n > 0) log_v += n * std::log1p(-eta);
      c(j, n) = std::exp(0.5 * log_v);
    }
  }
  CMatrix out = CMatrix::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    for (int j = 0; j < d; ++j) {
      const int top = std::min(nmax, d - 1 - std::max(j, k));
      cplx acc(0.0);
      for (int n = 0; n <= top; ++n) acc += c(j, n) * c(k, n) * rho(j + n, k + n);
      out(j, k) = acc;
    }
  }
  return out;
}

}  // namespace

DensityMatrix apply_loss_channel(const DensityMatrix& rho, const LossSpec& loss) {
  loss.validate();
  const FockSpec& spec = rho.spec;
  if (static_cast<int>(loss.efficiencies.size()) != spec.num_modes()) {
    throw ValidationError("apply_loss_channel: one efficiency per mode required");
  }
  CMatrix current = rho.elements;
  for (int mode = 0; mode < spec.num_modes(); ++mode) {
    const double eta = loss.efficiencies[mode];
    if (eta == 1.0) continue;
    if (spec.num_modes() == 1) {
      current = single_mode_loss(current, eta, loss.kraus_truncation);
      continue;
    }
    CMatrix next = CMatrix::Zero(current.rows(), current.cols());
    for (const CMatrix& k : loss_kraus_operators(spec.cutoff(), eta, loss.kraus_truncation)) {
      next += conjugate_single_mode(current, spec, k, mode);
    }
    current = std::move(next);
  }
  current = (0.5 * (current + current.adjoint())).eval();
  const double tr = current.trace().real();
  if (std::abs(tr - 1.0) > 1e-6) {
    throw NumericalError("apply_loss_channel: trace deficit " + std::to_string(1.0 - tr) +
                         " (Kraus truncation or Fock cutoff too small)");
  }
  return DensityMatrix{spec, std::move(current)};
}

DensityMatrix apply_loss_channel(const PureState& psi, const LossSpec& loss) {
  return apply_loss_channel(DensityMatrix::from_pure(psi), loss);
}

PureState noon_pure(int photons, double phase, int cutoff) {
  if (photons < 1) throw ValidationError("make_noon: N must be >= 1");
  if (cutoff == 0) cutoff = photons + 2;
  if (photons > cutoff - 1) throw ValidationError("make_noon: N exceeds cutoff - 1");
  FockSpec spec(2, cutoff);
  CVector amps = CVector::Zero(static_cast<Eigen::Index>(spec.dim()));
  const double s = 1.0 / std::sqrt(2.0);
  const std::vector<int> left{photons, 0};
  const std::vector<int> right{0, photons};
  amps(static_cast<Eigen::Index>(spec.index(left))) = s;
  amps(static_cast<Eigen::Index>(spec.index(right))) = s * std::polar(1.0, photons * phase);
  return PureState::make(spec, std::move(amps));
}

DensityMatrix make_noon(int photons, double phase, double eta_a, double eta_b, int cutoff) {
  const PureState psi = noon_pure(photons, phase, cutoff);
  LossSpec loss{{eta_a, eta_b}, psi.spec.cutoff() - 1};
  return apply_loss_channel(psi, loss);
}

double cat_normalization(cplx alpha, double phase) {
  const double denom = 2.0 + 2.0 * std::cos(phase) * std::exp(-2.0 * std::norm(alpha));
  if (denom < 1e-12) return std::numeric_limits<double>::infinity();
  return 1.0 / std::sqrt(denom);
}

PureState cat_pure(cplx alpha, double phase, int cutoff) {
  FockSpec spec(1, cutoff);
  CVector amps = CVector::Zero(cutoff);
  const double nalpha = cat_normalization(alpha, phase);
  if (!std::isfinite(nalpha)) {
    // alpha -> 0 with phi -> pi: the odd cat tends to |1>.
    amps(1) = std::abs(alpha) > 0.0 ? std::polar(1.0, std::arg(alpha)) : cplx(1.0);
    return PureState::make(spec, std::move(amps));
  }
  const cplx rel = std::polar(1.0, phase);
  const double env = std::exp(-0.5 * std::norm(alpha));
  cplx power(1.0);
  for (int n = 0; n < cutoff; ++n) {
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    amps(n) = nalpha * env * power * std::exp(-0.5 * log_factorial(n)) * (1.0 + rel * sign);
    power *= alpha;
  }
  const double norm2 = amps.squaredNorm();
  if (std::abs(norm2 - 1.0) > 1e-6) {
    throw NumericalError("make_cat: cutoff " + std::to_string(cutoff) +
                         " too small for |alpha| = " + std::to_string(std::abs(alpha)));
  }
  return PureState::make(spec, amps / std::sqrt(norm2));
}

DensityMatrix make_cat(cplx alpha, double phase, double eta, int cutoff) {
  const PureState psi = cat_pure(alpha, phase, cutoff);
  LossSpec loss{{eta}, cutoff - 1};
  return apply_loss_channel(psi, loss);
}

namespace {

/// Log-probability of |2n> in the squeezed vacuum of real squeezing xi.
double squeezed_log_prob(double xi, int n) {
  const double t = std::tanh(xi);
  return log_factorial(2 * n) - 2.0 * n * std::log(2.0) - 2.0 * log_factorial(n) +
         2.0 * n * std::log(t) - std::log(std::cosh(xi));
}

}  // namespace

int squeezed_vacuum_cutoff(double xi, double tail) {
  if (xi <= 0.0) return 8;
  double mass = 0.0;
  for (int n = 0;; ++n) {
    mass += std::exp(squeezed_log_prob(xi, n));
    if (1.0 - mass < tail) return std::max(8, 2 * n + 3);
    if (n > 500) throw NumericalError("squeezed_vacuum_cutoff: squeezing too large");
  }
}

PureState squeezed_vacuum_pure(double xi, int cutoff) {
  if (xi < 0.0 || xi > 1.2 + 1e-12) {
    throw ValidationError("make_squeezed_vacuum: xi must lie in [0, 1.2]");
  }
  if (cutoff == 0) cutoff = squeezed_vacuum_cutoff(xi);
  FockSpec spec(1, cutoff);
  CVector amps = CVector::Zero(cutoff);
  if (xi == 0.0) {
    amps(0) = 1.0;
    return PureState::make(spec, std::move(amps));
  }
  for (int n = 0; 2 * n < cutoff; ++n) {
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    amps(2 * n) = sign * std::exp(0.5 * squeezed_log_prob(xi, n));
  }
  const double norm2 = amps.squaredNorm();
  if (std::abs(norm2 - 1.0) > 1e-6) {
    throw NumericalError("make_squeezed_vacuum: cutoff insufficient for xi = " +
                         std::to_string(xi));
  }
  PureState out = PureState::make(spec, amps / std::sqrt(norm2));
  check_truncation(out);
  return out;
}

DensityMatrix make_squeezed_vacuum(double xi, double eta, int cutoff) {
  const PureState psi = squeezed_vacuum_pure(xi, cutoff);
  LossSpec loss{{eta}, psi.spec.cutoff() - 1};
  return apply_loss_channel(psi, loss);
}

cplx stellar_function_eval(const CoreState& core, std::span<const cplx> alpha) {
  if (static_cast<int>(alpha.size()) != core.spec.num_modes()) {
    throw ValidationError("stellar_function_eval: alpha has wrong length");
  }
  cplx total(0.0);
  for (const auto& t : core.terms) {
    cplx term = t.coefficient;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      const int n = t.occupation[i];
      for (int k = 0; k < n; ++k) term *= alpha[i];
      term *= std::exp(-0.5 * log_factorial(n));
    }
    total += term;
  }
  return total;
}

}  // namespace statelab
