#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "statelab/fock.hpp"
#include "statelab/homodyne.hpp"

namespace statelab {

enum class PropertyKind { kPurity, kFidelity, kQfi, kCatSize, kNegativityClass, kWignerMin };

std::string to_string(PropertyKind kind);
PropertyKind parse_property_kind(const std::string& name);

struct PropertyLabel {
  PropertyKind kind;
  double value;

  /// Range checks: purity in (0,1], fidelity in [0,1], qfi >= 0, size >= 0,
  /// negativity class in {0,1}.
  void validate() const;
};

/// <psi|rho|psi>.
double state_fidelity(const DensityMatrix& rho, const PureState& ideal);

/// tr(rho^2).
double purity(const DensityMatrix& rho);

inline constexpr double kQfiSupportCutoff = 1e-10;

/// 2 sum_{k,l: lambda_k+lambda_l > 1e-10} (lambda_k-lambda_l)^2/(lambda_k+lambda_l) |<k|A|l>|^2.
double qfi(const DensityMatrix& rho, const CMatrix& observable);

/// cos(phi) x + sin(phi) p on `cutoff` levels.
CMatrix quadrature_operator(int cutoff, double phi);

struct OptimalQfi {
  double value = 0.0;
  double phase = 0.0;
};

/// Maximizes qfi(rho, cos(phi) x + sin(phi) p) over phi in [0, pi): a
/// 64-point scan followed by golden-section refinement.
OptimalQfi qfi_optimal_quadrature(const DensityMatrix& rho);

/// (sum_k sqrt(P_k Q_k))^2, or the unsquared coefficient if `squared` is false.
double classical_fidelity(const Histogram& p, const Histogram& q, bool squared = true);
double classical_fidelity(std::span<const double> p, std::span<const double> q,
                          bool squared = true);

/// 10 log10(e^{2 xi}).
double squeezing_db(double xi);
double xi_from_db(double db);

/// Wigner function of a single-mode state on the grid xs x ps; element (i, j)
/// is W(xs[i], ps[j]). Throws if the grid integral is off by more than 1e-3.
Eigen::MatrixXd wigner_numeric(const DensityMatrix& rho, std::span<const double> xs,
                               std::span<const double> ps);

/// Pointwise Wigner value without the grid-mass check.
double wigner_point(const DensityMatrix& rho, double x, double p);

}  // namespace statelab
