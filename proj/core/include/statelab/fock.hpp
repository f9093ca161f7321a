#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace statelab {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Truncated multimode Fock space: `num_modes` modes, levels 0..cutoff-1 each.
///
/// Mode ordering: mode 0 is the slowest-varying index, so the flat index of
/// |n_0, n_1, ..., n_{m-1}> is sum_i n_i * d^(m-1-i). Every module that
/// builds or reads Fock vectors relies on this ordering.
class FockSpec {
 public:
  FockSpec(int num_modes, int cutoff);

  int num_modes() const { return num_modes_; }
  int cutoff() const { return cutoff_; }
  std::size_t dim() const { return dim_; }

  std::size_t index(std::span<const int> occupation) const;
  std::vector<int> occupation(std::size_t flat_index) const;

  /// Number of basis states for modes strictly before / after `mode`.
  std::size_t outer_dim(int mode) const;
  std::size_t inner_dim(int mode) const;

  bool operator==(const FockSpec& other) const = default;

 private:
  int num_modes_;
  int cutoff_;
  std::size_t dim_;
};

/// Normalized pure state in a truncated Fock space.
struct PureState {
  FockSpec spec;
  CVector amplitudes;

  /// Validates dimension and norm (|1 - <psi|psi>| <= 1e-9).
  static PureState make(const FockSpec& spec, CVector amplitudes);
};

/// Density matrix in a truncated Fock space.
struct DensityMatrix {
  FockSpec spec;
  CMatrix elements;

  /// Validates Hermiticity (1e-9), unit trace (1e-6) and positivity (-1e-8).
  static DensityMatrix make(const FockSpec& spec, CMatrix elements);
  static DensityMatrix from_pure(const PureState& psi);

  cplx trace() const { return elements.trace(); }
};

struct EigenDecomposition {
  Eigen::VectorXd values;  // ascending
  CMatrix vectors;         // orthonormal columns
};

/// Truncated annihilation operator: sqrt(n) at (n-1, n).
CMatrix annihilation_matrix(int cutoff);

/// Identity on every mode except `mode`, where `op` acts.
CMatrix embed_single_mode_op(const CMatrix& op, int mode, const FockSpec& spec);

/// Reduced state of a single mode.
DensityMatrix partial_trace_keep(const DensityMatrix& rho, int keep_mode);

/// Reduced state of a single mode taken directly from a pure state vector.
DensityMatrix reduced_from_pure(const PureState& psi, int keep_mode);

EigenDecomposition hermitian_eig(const CMatrix& matrix);

/// In-place application of a single-mode d x d operator to a state vector.
void apply_single_mode(CVector& amplitudes, const FockSpec& spec,
                       const CMatrix& op, int mode);

/// In-place application of a two-mode (d^2 x d^2) operator. The operator's
/// basis index is n_a * d + n_b for modes (mode_a, mode_b), mode_a != mode_b.
void apply_two_mode(CVector& amplitudes, const FockSpec& spec,
                    const CMatrix& op, int mode_a, int mode_b);

/// Returns K rho K^dagger for a single-mode K embedded at `mode`.
CMatrix conjugate_single_mode(const CMatrix& rho, const FockSpec& spec,
                              const CMatrix& op, int mode);

/// Population of the top Fock level of `mode`.
double top_level_population(const PureState& psi, int mode);
double top_level_population(const DensityMatrix& rho, int mode);

/// Default tolerance for the top-level population truncation check.
inline constexpr double kTailTolerance = 1e-3;

/// Throws NumericalError if any mode's top level carries more than `tol`.
void check_truncation(const PureState& psi, double tol = kTailTolerance);
void check_truncation(const DensityMatrix& rho, double tol = kTailTolerance);

}  // namespace statelab
