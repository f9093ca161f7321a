#include "statelab/fock.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "statelab/error.hpp"

namespace statelab {

FockSpec::FockSpec(int num_modes, int cutoff)
    : num_modes_(num_modes), cutoff_(cutoff), dim_(1) {
  if (num_modes < 1) {
    throw ValidationError("FockSpec: num_modes must be positive");
  }
  if (cutoff < 2) {
    throw ValidationError("invalid cutoff: need d >= 2, got " +
                          std::to_string(cutoff));
  }
  for (int i = 0; i < num_modes; ++i) dim_ *= static_cast<std::size_t>(cutoff);
}

std::size_t FockSpec::index(std::span<const int> occupation) const {
  if (static_cast<int>(occupation.size()) != num_modes_) {
    throw ValidationError("FockSpec::index: occupation has wrong length");
  }
  std::size_t idx = 0;
  for (int n : occupation) {
    if (n < 0 || n >= cutoff_) {
      throw ValidationError("FockSpec::index: occupation exceeds cutoff");
    }
    idx = idx * static_cast<std::size_t>(cutoff_) + static_cast<std::size_t>(n);
  }
  return idx;
}

std::vector<int> FockSpec::occupation(std::size_t flat_index) const {
  std::vector<int> occ(num_modes_);
  for (int i = num_modes_ - 1; i >= 0; --i) {
    occ[i] = static_cast<int>(flat_index % cutoff_);
    flat_index /= cutoff_;
  }
  return occ;
}

std::size_t FockSpec::outer_dim(int mode) const {
  std::size_t n = 1;
  for (int i = 0; i < mode; ++i) n *= cutoff_;
  return n;
}

std::size_t FockSpec::inner_dim(int mode) const {
  std::size_t n = 1;
  for (int i = mode + 1; i < num_modes_; ++i) n *= cutoff_;
  return n;
}

namespace {

void check_mode(const FockSpec& spec, int mode) {
  if (mode < 0 || mode >= spec.num_modes()) {
    throw ValidationError("mode index " + std::to_string(mode) +
                          " out of range for " +
                          std::to_string(spec.num_modes()) + " modes");
  }
}

double max_abs(const CMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace

PureState PureState::make(const FockSpec& spec, CVector amplitudes) {
  if (static_cast<std::size_t>(amplitudes.size()) != spec.dim()) {
    throw ValidationError("PureState: amplitude count does not match spec");
  }
  const double norm2 = amplitudes.squaredNorm();
  if (std::abs(norm2 - 1.0) > 1e-9) {
    throw NumericalError("PureState: squared norm " + std::to_string(norm2) +
                         " deviates from 1");
  }
  return PureState{spec, std::move(amplitudes)};
}

DensityMatrix DensityMatrix::make(const FockSpec& spec, CMatrix elements) {
  const auto d = static_cast<Eigen::Index>(spec.dim());
  if (elements.rows() != d || elements.cols() != d) {
    throw ValidationError("DensityMatrix: shape does not match spec");
  }
  if (max_abs(elements - elements.adjoint()) > 1e-9) {
    throw NumericalError("DensityMatrix: not Hermitian");
  }
  const cplx tr = elements.trace();
  if (std::abs(tr - 1.0) > 1e-6) {
    throw NumericalError("DensityMatrix: trace " + std::to_string(tr.real()) +
                         " deviates from 1");
  }
  // Positivity check is O(D^3); skipped for very large spaces.
  if (d <= 1024) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(elements, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8) {
      throw NumericalError("DensityMatrix: negative eigenvalue " +
                           std::to_string(es.eigenvalues().minCoeff()));
    }
  }
  return DensityMatrix{spec, std::move(elements)};
}

DensityMatrix DensityMatrix::from_pure(const PureState& psi) {
  return DensityMatrix{psi.spec, psi.amplitudes * psi.amplitudes.adjoint()};
}

CMatrix annihilation_matrix(int cutoff) {
  if (cutoff < 2) {
    throw ValidationError("invalid cutoff: need d >= 2, got " +
                          std::to_string(cutoff));
  }
  CMatrix a = CMatrix::Zero(cutoff, cutoff);
  for (int n = 1; n < cutoff; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

CMatrix embed_single_mode_op(const CMatrix& op, int mode, const FockSpec& spec) {
  check_mode(spec, mode);
  const int d = spec.cutoff();
  if (op.rows() != d || op.cols() != d) {
    throw ValidationError("embed_single_mode_op: operator is not d x d");
  }
  const auto outer = static_cast<Eigen::Index>(spec.outer_dim(mode));
  const auto inner = static_cast<Eigen::Index>(spec.inner_dim(mode));
  const auto dim = static_cast<Eigen::Index>(spec.dim());
  CMatrix out = CMatrix::Zero(dim, dim);
  for (Eigen::Index o = 0; o < outer; ++o) {
    for (int n = 0; n < d; ++n) {
      for (int k = 0; k < d; ++k) {
        const cplx v = op(n, k);
        if (v == cplx(0.0)) continue;
        for (Eigen::Index j = 0; j < inner; ++j) {
          out((o * d + n) * inner + j, (o * d + k) * inner + j) = v;
        }
      }
    }
  }
  return out;
}

DensityMatrix partial_trace_keep(const DensityMatrix& rho, int keep_mode) {
  const FockSpec& spec = rho.spec;
  check_mode(spec, keep_mode);
  const int d = spec.cutoff();
  const auto outer = static_cast<Eigen::Index>(spec.outer_dim(keep_mode));
  const auto inner = static_cast<Eigen::Index>(spec.inner_dim(keep_mode));
  CMatrix red = CMatrix::Zero(d, d);
  for (Eigen::Index o = 0; o < outer; ++o) {
    for (Eigen::Index j = 0; j < inner; ++j) {
      for (int n = 0; n < d; ++n) {
        const Eigen::Index row = (o * d + n) * inner + j;
        for (int k = 0; k < d; ++k) {
          red(n, k) += rho.elements(row, (o * d + k) * inner + j);
        }
      }
    }
  }
  return DensityMatrix{FockSpec(1, d), std::move(red)};
}

DensityMatrix reduced_from_pure(const PureState& psi, int keep_mode) {
  const FockSpec& spec = psi.spec;
  check_mode(spec, keep_mode);
  const int d = spec.cutoff();
  const auto outer = static_cast<Eigen::Index>(spec.outer_dim(keep_mode));
  const auto inner = static_cast<Eigen::Index>(spec.inner_dim(keep_mode));
  // Gather the d x (outer*inner) matrix with rows indexed by the kept mode.
  CMatrix block(d, outer * inner);
  for (Eigen::Index o = 0; o < outer; ++o) {
    for (int n = 0; n < d; ++n) {
      for (Eigen::Index j = 0; j < inner; ++j) {
        block(n, o * inner + j) = psi.amplitudes((o * d + n) * inner + j);
      }
    }
  }
  CMatrix red = block * block.adjoint();
  return DensityMatrix{FockSpec(1, d), std::move(red)};
}

EigenDecomposition hermitian_eig(const CMatrix& matrix) {
  if (matrix.rows() != matrix.cols()) {
    throw ValidationError("hermitian_eig: matrix is not square");
  }
  const double scale = std::max(1.0, max_abs(matrix));
  if (max_abs(matrix - matrix.adjoint()) > 1e-8 * scale) {
    throw ValidationError("hermitian_eig: matrix is not Hermitian");
  }
  // Symmetrize to remove round-off asymmetry before solving.
  const CMatrix herm = 0.5 * (matrix + matrix.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(herm);
  if (es.info() != Eigen::Success) {
    throw NumericalError("hermitian_eig: eigen solver failed");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

void apply_single_mode(CVector& amplitudes, const FockSpec& spec,
                       const CMatrix& op, int mode) {
  check_mode(spec, mode);
  const int d = spec.cutoff();
  if (op.rows() != d || op.cols() != d) {
    throw ValidationError("apply_single_mode: operator is not d x d");
  }
  const auto outer = static_cast<Eigen::Index>(spec.outer_dim(mode));
  const auto inner = static_cast<Eigen::Index>(spec.inner_dim(mode));
  using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (Eigen::Index o = 0; o < outer; ++o) {
    Eigen::Map<RowMat> block(amplitudes.data() + o * d * inner, d, inner);
    RowMat updated = op * block;
    block = updated;
  }
}

void apply_two_mode(CVector& amplitudes, const FockSpec& spec,
                    const CMatrix& op, int mode_a, int mode_b) {
  check_mode(spec, mode_a);
  check_mode(spec, mode_b);
  if (mode_a == mode_b) {
    throw ValidationError("apply_two_mode: modes must differ");
  }
  const int d = spec.cutoff();
  const int dd = d * d;
  if (op.rows() != dd || op.cols() != dd) {
    throw ValidationError("apply_two_mode: operator is not d^2 x d^2");
  }
  const int m = spec.num_modes();
  std::vector<std::size_t> stride(m);
  {
    std::size_t s = 1;
    for (int i = m - 1; i >= 0; --i) {
      stride[i] = s;
      s *= d;
    }
  }
  const std::size_t sa = stride[mode_a];
  const std::size_t sb = stride[mode_b];
  CVector local(dd);
  CVector result(dd);
  const std::size_t dim = spec.dim();
  for (std::size_t base = 0; base < dim; ++base) {
    // Visit each fiber once: only from indices where both modes are zero.
    if ((base / sa) % d != 0 || (base / sb) % d != 0) continue;
    for (int na = 0; na < d; ++na) {
      for (int nb = 0; nb < d; ++nb) {
        local(na * d + nb) = amplitudes(base + na * sa + nb * sb);
      }
    }
    result.noalias() = op * local;
    for (int na = 0; na < d; ++na) {
      for (int nb = 0; nb < d; ++nb) {
        amplitudes(base + na * sa + nb * sb) = result(na * d + nb);
      }
    }
  }
}

CMatrix conjugate_single_mode(const CMatrix& rho, const FockSpec& spec,
                              const CMatrix& op, int mode) {
  // K rho: apply K to each column; then (K (K rho)^dagger)^dagger.
  CMatrix left = rho;
  for (Eigen::Index c = 0; c < left.cols(); ++c) {
    CVector col = left.col(c);
    apply_single_mode(col, spec, op, mode);
    left.col(c) = col;
  }
  CMatrix adj = left.adjoint();
  for (Eigen::Index c = 0; c < adj.cols(); ++c) {
    CVector col = adj.col(c);
    apply_single_mode(col, spec, op, mode);
    adj.col(c) = col;
  }
  return adj.adjoint();
}

double top_level_population(const PureState& psi, int mode) {
  const DensityMatrix red = reduced_from_pure(psi, mode);
  const int d = psi.spec.cutoff();
  return red.elements(d - 1, d - 1).real();
}

double top_level_population(const DensityMatrix& rho, int mode) {
  check_mode(rho.spec, mode);
  const int d = rho.spec.cutoff();
  double pop = 0.0;
  for (std::size_t i = 0; i < rho.spec.dim(); ++i) {
    if (rho.spec.occupation(i)[mode] == d - 1) {
      pop += rho.elements(static_cast<Eigen::Index>(i),
                          static_cast<Eigen::Index>(i)).real();
    }
  }
  return pop;
}

void check_truncation(const PureState& psi, double tol) {
  for (int mode = 0; mode < psi.spec.num_modes(); ++mode) {
    const double pop = top_level_population(psi, mode);
    if (pop > tol) {
      throw NumericalError("truncation: mode " + std::to_string(mode) +
                           " top-level population " + std::to_string(pop) +
                           " exceeds tolerance");
    }
  }
}

void check_truncation(const DensityMatrix& rho, double tol) {
  for (int mode = 0; mode < rho.spec.num_modes(); ++mode) {
    const double pop = top_level_population(rho, mode);
    if (pop > tol) {
      throw NumericalError("truncation: mode " + std::to_string(mode) +
                           " top-level population " + std::to_string(pop) +
                           " exceeds tolerance");
    }
  }
}

}  // namespace statelab
