#pragma once

#include <cstdint>
#include <vector>

#include "statelab/fock.hpp"

namespace statelab {

/// One term c * |n_0, ..., n_{m-1}> of a core state.
struct CoreTerm {
  std::vector<int> occupation;
  cplx coefficient;

  int total_photons() const;
};

/// Finite-support state whose stellar function is a polynomial of degree
/// `stellar_rank`.
struct CoreState {
  FockSpec spec;
  std::vector<CoreTerm> terms;
  int stellar_rank = 0;

  /// Largest |c| among the terms that attain the stellar rank.
  double max_top_weight() const;
  PureState to_pure() const;
};

/// Two-mode coupler exp[theta (e^{i phi} a b^dagger - e^{-i phi} a^dagger b)].
/// Under it a -> cos(theta) a - e^{-i phi} sin(theta) b.
struct BeamSplitter {
  int mode_a = 0;
  int mode_b = 1;
  double theta = 0.0;
  double phi = 0.0;
};

/// G = U (prod_i S_i(xi_i) D_i(alpha_i)) V. Applied to a state: V first, then
/// the displacement and then the squeezer of every mode, then U.
struct GaussianCircuit {
  int num_modes = 1;
  std::vector<BeamSplitter> pre_interferometer;
  std::vector<cplx> squeezing;     // xi_i = r_i e^{i phi_i}
  std::vector<cplx> displacement;  // alpha_i
  std::vector<BeamSplitter> post_interferometer;

  static GaussianCircuit identity(int num_modes);
  /// Throws ValidationError unless sizes and the chain structure are valid.
  void validate(double xi_max = 1e9) const;
  double max_squeezing() const;
};

struct LossSpec {
  std::vector<double> efficiencies;  // eta_i in (0, 1]
  int kraus_truncation = 10;

  void validate() const;
};

/// Options for random circuit sampling.
struct CircuitRanges {
  double xi_min = 0.1;
  double xi_max = 0.2;
  double displacement_max = 0.5;
};

CoreState random_core_state(int num_modes, int stellar_rank,
                            std::uint64_t seed, int cutoff);

/// Chain interferometers with random couplings, random squeezing magnitudes
/// in [xi_min, xi_max) with random phases, random displacements in a disk.
GaussianCircuit random_gaussian_circuit(int num_modes, const CircuitRanges& ranges,
                                        std::uint64_t seed);

/// Per-mode cutoff heuristic: r + ceil(10 xi_max) + 6, clamped to [8, 24].
int cutoff_heuristic(int stellar_rank, double xi_max);

/// Single-mode squeeze, displacement and two-mode beam-splitter unitaries,
/// exponentiated at cutoff d+2 and projected back onto d levels.
CMatrix squeeze_unitary(cplx xi, int cutoff);
CMatrix displacement_unitary(cplx alpha, int cutoff);
CMatrix beam_splitter_unitary(double theta, double phi, int cutoff);

PureState apply_gaussian_circuit(const PureState& input,
                                 const GaussianCircuit& circuit);
PureState apply_gaussian_circuit(const CoreState& core,
                                 const GaussianCircuit& circuit);

/// Kraus operators L_0..L_n of the single-mode loss channel at efficiency eta.
std::vector<CMatrix> loss_kraus_operators(int cutoff, double eta, int truncation);

DensityMatrix apply_loss_channel(const DensityMatrix& rho, const LossSpec& loss);
DensityMatrix apply_loss_channel(const PureState& psi, const LossSpec& loss);

/// Lossless two-mode N00N state (|N,0> + e^{iN phi}|0,N>)/sqrt(2).
PureState noon_pure(int photons, double phase, int cutoff = 0);
DensityMatrix make_noon(int photons, double phase, double eta_a, double eta_b,
                        int cutoff = 0);

/// N_alpha = [2 + 2 cos(phi) e^{-2|alpha|^2}]^{-1/2}.
double cat_normalization(cplx alpha, double phase);
PureState cat_pure(cplx alpha, double phase, int cutoff = 24);
DensityMatrix make_cat(cplx alpha, double phase, double eta, int cutoff = 24);

/// Smallest cutoff whose truncated squeezed-vacuum tail is below `tail`.
int squeezed_vacuum_cutoff(double xi, double tail = 1e-12);
PureState squeezed_vacuum_pure(double xi, int cutoff = 0);
DensityMatrix make_squeezed_vacuum(double xi, double eta, int cutoff = 0);

/// F*(alpha) = sum_terms c prod_i alpha_i^{n_i} / sqrt(n_i!).
cplx stellar_function_eval(const CoreState& core, std::span<const cplx> alpha);

}  // namespace statelab
