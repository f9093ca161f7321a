#include "statelab/properties.hpp"

#include <cmath>
#include <numbers>

#include "statelab/error.hpp"

namespace statelab {

std::string to_string(PropertyKind kind) {
  switch (kind) {
    case PropertyKind::kPurity: return "purity";
    case PropertyKind::kFidelity: return "fidelity";
    case PropertyKind::kQfi: return "qfi";
    case PropertyKind::kCatSize: return "cat_size";
    case PropertyKind::kNegativityClass: return "negativity_class";
    case PropertyKind::kWignerMin: return "wigner_min";
  }
  return "unknown";
}

PropertyKind parse_property_kind(const std::string& name) {
  for (auto k : {PropertyKind::kPurity, PropertyKind::kFidelity, PropertyKind::kQfi,
                 PropertyKind::kCatSize, PropertyKind::kNegativityClass, PropertyKind::kWignerMin}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown property kind '" + name + "'");
}

void PropertyLabel::validate() const {
  const double tol = 1e-9;
  bool ok = std::isfinite(value);
  switch (kind) {
    case PropertyKind::kPurity: ok = ok && value > 0.0 && value <= 1.0 + tol; break;
    case PropertyKind::kFidelity: ok = ok && value >= -tol && value <= 1.0 + tol; break;
    case PropertyKind::kQfi: ok = ok && value >= -tol; break;
    case PropertyKind::kCatSize: ok = ok && value >= 0.0; break;
    case PropertyKind::kNegativityClass: ok = ok && (value == 0.0 || value == 1.0); break;
    case PropertyKind::kWignerMin: break;
  }
  if (!ok) {
    throw ValidationError("label " + to_string(kind) + " out of range: " + std::to_string(value));
  }
}

double state_fidelity(const DensityMatrix& rho, const PureState& ideal) {
  if (!(rho.spec == ideal.spec)) {
    throw ValidationError("state_fidelity: dimension mismatch");
  }
  const cplx f = ideal.amplitudes.dot(rho.elements * ideal.amplitudes);
  return std::clamp(f.real(), 0.0, 1.0);
}

double purity(const DensityMatrix& rho) { return rho.elements.cwiseAbs2().sum(); }

namespace {

/// Weights 2 (l_k - l_l)^2 / (l_k + l_l) on the support, zero elsewhere.
Eigen::MatrixXd qfi_weights(const Eigen::VectorXd& lambda) {
  const auto n = lambda.size();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index l = 0; l < n; ++l) {
      const double s = lambda(k) + lambda(l);
      if (s > kQfiSupportCutoff) {
        const double diff = lambda(k) - lambda(l);
        w(k, l) = 2.0 * diff * diff / s;
      }
    }
  }
  return w;
}

}  // namespace

double qfi(const DensityMatrix& rho, const CMatrix& observable) {
  if (observable.rows() != rho.elements.rows() || observable.cols() != rho.elements.cols()) {
    throw ValidationError("qfi: observable dimension mismatch");
  }
  const double scale = std::max(1.0, observable.cwiseAbs().maxCoeff());
  if ((observable - observable.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw ValidationError("qfi: observable is not Hermitian");
  }
  const EigenDecomposition eig = hermitian_eig(rho.elements);
  const CMatrix a_kl = eig.vectors.adjoint() * observable * eig.vectors;
  return (qfi_weights(eig.values).array() * a_kl.cwiseAbs2().array()).sum();
}

CMatrix quadrature_operator(int cutoff, double phi) {
  const CMatrix a = annihilation_matrix(cutoff);
  const CMatrix x = (a + a.adjoint()) / std::sqrt(2.0);
  const CMatrix p = cplx(0.0, -1.0) * (a - a.adjoint()) / std::sqrt(2.0);
  return std::cos(phi) * x + std::sin(phi) * p;
}

OptimalQfi qfi_optimal_quadrature(const DensityMatrix& rho) {
  if (rho.spec.num_modes() != 1) {
    throw ValidationError("qfi_optimal_quadrature: single-mode state required");
  }
  const int d = rho.spec.cutoff();
  const EigenDecomposition eig = hermitian_eig(rho.elements);
  const Eigen::MatrixXd w = qfi_weights(eig.values);
  const CMatrix xk = eig.vectors.adjoint() * quadrature_operator(d, 0.0) * eig.vectors;
  const CMatrix pk = eig.vectors.adjoint() * quadrature_operator(d, std::numbers::pi / 2) * eig.vectors;
  auto f = [&](double phi) {
    const CMatrix a = std::cos(phi) * xk + std::sin(phi) * pk;
    return (w.array() * a.cwiseAbs2().array()).sum();
  };

  constexpr int kScan = 64;
  const double step = std::numbers::pi / kScan;
  int best = 0;
  double best_val = -1.0;
  for (int k = 0; k < kScan; ++k) {
    const double v = f(k * step);
    if (v > best_val) {
      best_val = v;
      best = k;
    }
  }
  // F is pi-periodic, so the bracket may wrap below zero.
  double lo = (best - 1) * step;
  double hi = (best + 1) * step;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double e = lo + inv_phi * (hi - lo);
  double fc = f(c);
  double fe = f(e);
  while (hi - lo > 1e-10) {
    if (fc > fe) {
      hi = e;
      e = c;
      fe = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = e;
      fc = fe;
      e = lo + inv_phi * (hi - lo);
      fe = f(e);
    }
  }
  double phase = 0.5 * (lo + hi);
  double value = f(phase);
  if (best_val > value) {
    value = best_val;
    phase = best * step;
  }
  phase = std::fmod(phase, std::numbers::pi);
  if (phase < 0.0) phase += std::numbers::pi;
  return {value, phase};
}

double classical_fidelity(std::span<const double> p, std::span<const double> q, bool squared) {
  if (p.size() != q.size()) throw ValidationError("classical_fidelity: binning mismatch");
  double bc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) bc += std::sqrt(std::max(0.0, p[k] * q[k]));
  return squared ? bc * bc : bc;
}

double classical_fidelity(const Histogram& p, const Histogram& q, bool squared) {
  return classical_fidelity(std::span<const double>(p.bins), std::span<const double>(q.bins), squared);
}

double squeezing_db(double xi) {
  if (xi < 0.0) throw ValidationError("squeezing_db: xi must be >= 0");
  return 10.0 * std::log10(std::exp(2.0 * xi));
}

double xi_from_db(double db) { return db * std::log(10.0) / 20.0; }

double wigner_point(const DensityMatrix& rho, double x, double p) {
  if (rho.spec.num_modes() != 1) {
    throw ValidationError("wigner_numeric: single-mode state required");
  }
  const int d = rho.spec.cutoff();
  const cplx alpha(x / std::sqrt(2.0), p / std::sqrt(2.0));
  const double b = 4.0 * std::norm(alpha);
  double w = 0.0;
  for (int m = 0; m < d; ++m) {
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    const cplx diag = rho.elements(m, m);
    if (std::abs(diag) > 0.0) w += sign * diag.real() * std::assoc_laguerre(m, 0, b);
    cplx power = 2.0 * alpha;
    for (int n = m + 1; n < d; ++n) {
      const cplx rmn = rho.elements(m, n);
      if (std::abs(rmn) > 0.0) {
        const double ratio = std::exp(0.5 * (std::lgamma(m + 1.0) - std::lgamma(n + 1.0)));
        w += 2.0 * sign * (rmn * power).real() * ratio *
             std::assoc_laguerre(static_cast<unsigned>(m), static_cast<unsigned>(n - m), b);
      }
      power *= 2.0 * alpha;
    }
  }
  return w * std::exp(-0.5 * b) / std::numbers::pi;
}

Eigen::MatrixXd wigner_numeric(const DensityMatrix& rho, std::span<const double> xs,
                               std::span<const double> ps) {
  Eigen::MatrixXd out(xs.size(), ps.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < ps.size(); ++j) out(i, j) = wigner_point(rho, xs[i], ps[j]);
  }
  if (xs.size() >= 2 && ps.size() >= 2) {
    double total = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
      for (std::size_t j = 1; j < ps.size(); ++j) {
        const double cell = 0.25 * (out(i, j) + out(i - 1, j) + out(i, j - 1) + out(i - 1, j - 1));
        total += cell * (xs[i] - xs[i - 1]) * (ps[j] - ps[j - 1]);
      }
    }
    if (std::abs(total - 1.0) > 1e-3) {
      throw NumericalError("wigner_numeric: grid mass loss, integral " + std::to_string(total));
    }
  }
  return out;
}

}  // namespace statelab
