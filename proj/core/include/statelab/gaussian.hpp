#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "statelab/fock.hpp"
#include "statelab/state_factory.hpp"

namespace statelab {

/// Gaussian state in phase space, ordering (x_1, p_1, ..., x_m, p_m) with
/// x = (a + a^dagger)/sqrt(2). Vacuum covariance is I/2.
struct GaussianState {
  int num_modes = 1;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  static GaussianState vacuum(int num_modes);
  /// Symmetry (1e-10) and the uncertainty relation V + (i/2) Omega >= 0.
  void validate() const;
};

enum class DegaussKind { kNone = 0, kSubtracted = 1, kAdded = 2 };

/// Gaussian base state, optionally followed by a heralded single-photon
/// subtraction (a rho a^dagger) or addition (a^dagger rho a) on `mode`.
struct DegaussifiedState {
  GaussianState base;
  DegaussKind kind = DegaussKind::kNone;
  int mode = 0;
};

/// Real 2m x 2m symplectic matrices for the circuit elements.
Eigen::MatrixXd beam_splitter_symplectic(int num_modes, const BeamSplitter& bs);
Eigen::MatrixXd squeezer_symplectic(int num_modes, int mode, cplx xi);

GaussianState circuit_to_gaussian(const GaussianCircuit& circuit);
GaussianState loss_on_gaussian(const GaussianState& g, std::span<const double> eta);

/// Symplectic eigenvalues (ascending); all >= 1/2 for physical states.
Eigen::VectorXd symplectic_eigenvalues(const GaussianState& g);

/// <a_k^dagger a_k> of mode k.
double mean_photon_number(const GaussianState& g, int mode);

DegaussifiedState degaussify(const GaussianState& g, DegaussKind kind, int mode);

/// Density of the quadrature x_mode(theta) = x cos(theta) + p sin(theta).
/// Throws if the grid loses more than 1e-3 of the probability mass.
std::vector<double> marginal_density(const DegaussifiedState& state, int mode,
                                     double theta, std::span<const double> grid);

/// Wigner function at phase-space point r (length 2m).
double wigner_value(const DegaussifiedState& state, const Eigen::VectorXd& point);

struct WignerMinResult {
  double value = 0.0;
  bool converged = true;
};

/// Minimum of the Wigner function. Gaussian states report 0 (the infimum of a
/// positive function). For degaussified states the search runs in the
/// two-dimensional image of the rank-1 polynomial factor, where for each
/// value of the factor the Gaussian envelope is maximized in closed form.
WignerMinResult wigner_min(const DegaussifiedState& state);

/// First and second quadrature moments of a Fock-space density matrix, in
/// the same ordering and convention as GaussianState.
GaussianState moments_from_fock(const DensityMatrix& rho);

}  // namespace statelab
