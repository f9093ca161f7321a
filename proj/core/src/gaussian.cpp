#include "statelab/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "statelab/error.hpp"

namespace statelab {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd symplectic_form(int num_modes) {
  MatrixXd omega = MatrixXd::Zero(2 * num_modes, 2 * num_modes);
  for (int i = 0; i < num_modes; ++i) {
    omega(2 * i, 2 * i + 1) = 1.0;
    omega(2 * i + 1, 2 * i) = -1.0;
  }
  return omega;
}

void check_mode(int num_modes, int mode) {
  if (mode < 0 || mode >= num_modes) {
    throw ValidationError("mode index " + std::to_string(mode) + " out of range");
  }
}

/// Linear form w(r) = row . r + offset and constant kappa such that the
/// degaussified Wigner function is (|w(r)|^2 + kappa) W0(r) / norm.
struct RankOneForm {
  Eigen::RowVectorXcd row;
  cplx offset;
  double kappa = 0.0;
  double norm = 1.0;
};

RankOneForm rank_one_form(const DegaussifiedState& s) {
  const GaussianState& g = s.base;
  const int dim = 2 * g.num_modes;
  const MatrixXd vinv = g.cov.inverse();
  const int k = s.mode;
  Eigen::RowVectorXcd u = Eigen::RowVectorXcd::Zero(dim);
  u(2 * k) = 1.0 / std::sqrt(2.0);
  u(2 * k + 1) = cplx(0.0, 1.0 / std::sqrt(2.0));
  const double trace_inv = vinv(2 * k, 2 * k) + vinv(2 * k + 1, 2 * k + 1);

  MatrixXd m;
  VectorXd c;
  RankOneForm f;
  if (s.kind == DegaussKind::kSubtracted) {
    m = MatrixXd::Identity(dim, dim) - 0.5 * vinv;
    c = 0.5 * vinv * g.mean;
    f.kappa = 0.5 * (1.0 - 0.25 * trace_inv);
  } else {
    m = MatrixXd::Identity(dim, dim) + 0.5 * vinv;
    c = -0.5 * vinv * g.mean;
    f.kappa = -0.5 * (1.0 + 0.25 * trace_inv);
  }
  f.row = u * m.cast<cplx>();
  f.offset = (u * c.cast<cplx>())(0);
  const VectorXd mu = m * g.mean + c;
  const cplx centre = (u * mu.cast<cplx>())(0);
  const cplx quad = (f.row * g.cov.cast<cplx>() * f.row.adjoint())(0);
  f.norm = quad.real() + std::norm(centre) + f.kappa;
  return f;
}

double log_gaussian_peak(const GaussianState& g) {
  const double logdet = std::log(g.cov.determinant());
  return -g.num_modes * std::log(2.0 * std::numbers::pi) - 0.5 * logdet;
}

}  // namespace

GaussianState GaussianState::vacuum(int num_modes) {
  if (num_modes < 1) throw ValidationError("GaussianState: num_modes must be positive");
  return {num_modes, VectorXd::Zero(2 * num_modes),
          0.5 * MatrixXd::Identity(2 * num_modes, 2 * num_modes)};
}

void GaussianState::validate() const {
  const int dim = 2 * num_modes;
  if (mean.size() != dim || cov.rows() != dim || cov.cols() != dim) {
    throw ValidationError("GaussianState: shape mismatch");
  }
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw NumericalError("GaussianState: covariance not symmetric");
  }
  const Eigen::MatrixXcd form =
      cov.cast<cplx>() + cplx(0.0, 0.5) * symplectic_form(num_modes).cast<cplx>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(form, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9) {
    throw NumericalError("GaussianState: uncertainty relation violated");
  }
}

Eigen::MatrixXd beam_splitter_symplectic(int num_modes, const BeamSplitter& bs) {
  check_mode(num_modes, bs.mode_a);
  check_mode(num_modes, bs.mode_b);
  // Complex 2x2 map on (alpha_a, alpha_b): [[c, -e^{-i phi} s], [e^{i phi} s, c]].
  const double c = std::cos(bs.theta);
  const double s = std::sin(bs.theta);
  const cplx t[2][2] = {{c, -std::polar(s, -bs.phi)}, {std::polar(s, bs.phi), c}};
  const int modes[2] = {bs.mode_a, bs.mode_b};
  MatrixXd out = MatrixXd::Identity(2 * num_modes, 2 * num_modes);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const int r = 2 * modes[i];
      const int q = 2 * modes[j];
      out(r, q) = t[i][j].real();
      out(r, q + 1) = -t[i][j].imag();
      out(r + 1, q) = t[i][j].imag();
      out(r + 1, q + 1) = t[i][j].real();
    }
  }
  return out;
}

Eigen::MatrixXd squeezer_symplectic(int num_modes, int mode, cplx xi) {
  check_mode(num_modes, mode);
  const double r = std::abs(xi);
  const double phi = std::arg(xi);
  const double ch = std::cosh(r);
  const double sh = std::sinh(r);
  MatrixXd out = MatrixXd::Identity(2 * num_modes, 2 * num_modes);
  const int q = 2 * mode;
  out(q, q) = ch - sh * std::cos(phi);
  out(q, q + 1) = -sh * std::sin(phi);
  out(q + 1, q) = -sh * std::sin(phi);
  out(q + 1, q + 1) = ch + sh * std::cos(phi);
  return out;
}

GaussianState circuit_to_gaussian(const GaussianCircuit& circuit) {
  circuit.validate();
  const int m = circuit.num_modes;
  GaussianState g = GaussianState::vacuum(m);
  auto apply = [&g](const MatrixXd& s) {
    g.mean = s * g.mean;
    g.cov = s * g.cov * s.transpose();
  };
  for (const auto& bs : circuit.pre_interferometer) apply(beam_splitter_symplectic(m, bs));
  for (int i = 0; i < m; ++i) {
    g.mean(2 * i) += std::sqrt(2.0) * circuit.displacement[i].real();
    g.mean(2 * i + 1) += std::sqrt(2.0) * circuit.displacement[i].imag();
    apply(squeezer_symplectic(m, i, circuit.squeezing[i]));
  }
  for (const auto& bs : circuit.post_interferometer) apply(beam_splitter_symplectic(m, bs));
  g.cov = (0.5 * (g.cov + g.cov.transpose())).eval();
  return g;
}

GaussianState loss_on_gaussian(const GaussianState& g, std::span<const double> eta) {
  if (static_cast<int>(eta.size()) != g.num_modes) {
    throw ValidationError("loss_on_gaussian: one efficiency per mode required");
  }
  VectorXd scale(2 * g.num_modes);
  VectorXd noise(2 * g.num_modes);
  for (int i = 0; i < g.num_modes; ++i) {
    if (!(eta[i] > 0.0) || eta[i] > 1.0) {
      throw ValidationError("invalid efficiency: eta must lie in (0, 1]");
    }
    scale(2 * i) = scale(2 * i + 1) = std::sqrt(eta[i]);
    noise(2 * i) = noise(2 * i + 1) = 0.5 * (1.0 - eta[i]);
  }
  GaussianState out = g;
  out.mean = scale.asDiagonal() * g.mean;
  out.cov = scale.asDiagonal() * g.cov * scale.asDiagonal();
  out.cov += noise.asDiagonal();
  return out;
}

Eigen::VectorXd symplectic_eigenvalues(const GaussianState& g) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(g.cov);
  const MatrixXd root = es.operatorSqrt();
  const Eigen::MatrixXcd form =
      cplx(0.0, 1.0) * (root * symplectic_form(g.num_modes) * root).cast<cplx>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ev(form, Eigen::EigenvaluesOnly);
  // Eigenvalues come in +/- nu pairs; the upper half is the spectrum.
  return ev.eigenvalues().tail(g.num_modes);
}

double mean_photon_number(const GaussianState& g, int mode) {
  check_mode(g.num_modes, mode);
  const int q = 2 * mode;
  return 0.5 * (g.cov(q, q) + g.cov(q + 1, q + 1) - 1.0) +
         0.5 * (g.mean(q) * g.mean(q) + g.mean(q + 1) * g.mean(q + 1));
}

DegaussifiedState degaussify(const GaussianState& g, DegaussKind kind, int mode) {
  g.validate();
  check_mode(g.num_modes, mode);
  DegaussifiedState s{g, kind, mode};
  if (kind == DegaussKind::kSubtracted && mean_photon_number(g, mode) <= 1e-9) {
    throw ValidationError("degaussify: photon subtraction has zero success probability");
  }
  return s;
}

std::vector<double> marginal_density(const DegaussifiedState& state, int mode,
                                     double theta, std::span<const double> grid) {
  const GaussianState& g = state.base;
  check_mode(g.num_modes, mode);
  const int dim = 2 * g.num_modes;
  VectorXd v = VectorXd::Zero(dim);
  v(2 * mode) = std::cos(theta);
  v(2 * mode + 1) = std::sin(theta);
  const VectorXd cv = g.cov * v;
  const double s2 = v.dot(cv);
  const double q0 = v.dot(g.mean);
  const double gauss_norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * s2);

  // Polynomial prefactor (a0 + |b0 + b1 t|^2) / norm with t = q - q0.
  double a0 = 1.0;
  cplx b0(0.0);
  cplx b1(0.0);
  double norm = 1.0;
  if (state.kind != DegaussKind::kNone) {
    const RankOneForm f = rank_one_form(state);
    const MatrixXd cond = g.cov - cv * cv.transpose() / s2;
    a0 = (f.row * cond.cast<cplx>() * f.row.adjoint())(0).real() + f.kappa;
    b0 = (f.row * g.mean.cast<cplx>())(0) + f.offset;
    b1 = (f.row * cv.cast<cplx>())(0) / s2;
    norm = f.norm;
  }

  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i] - q0;
    const double poly = state.kind == DegaussKind::kNone ? 1.0 : (a0 + std::norm(b0 + b1 * t)) / norm;
    out[i] = poly * gauss_norm * std::exp(-0.5 * t * t / s2);
  }
  if (grid.size() >= 2) {
    double mass = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      mass += 0.5 * (out[i] + out[i - 1]) * (grid[i] - grid[i - 1]);
    }
    if (mass < 1.0 - 1e-3) {
      throw NumericalError("marginal_density: grid too narrow, mass " + std::to_string(mass));
    }
  }
  return out;
}

double wigner_value(const DegaussifiedState& state, const Eigen::VectorXd& point) {
  const GaussianState& g = state.base;
  const VectorXd delta = point - g.mean;
  const double quad = delta.dot(g.cov.ldlt().solve(delta));
  const double w0 = std::exp(log_gaussian_peak(g) - 0.5 * quad);
  if (state.kind == DegaussKind::kNone) return w0;
  const RankOneForm f = rank_one_form(state);
  const cplx w = (f.row * point.cast<cplx>())(0) + f.offset;
  return (std::norm(w) + f.kappa) * w0 / f.norm;
}

WignerMinResult wigner_min(const DegaussifiedState& state) {
  if (state.kind == DegaussKind::kNone) return {0.0, true};
  const GaussianState& g = state.base;
  const RankOneForm f = rank_one_form(state);
  if (f.kappa >= 0.0) return {0.0, true};

  // Image of the linear form: y = P r + y_c, a 2D Gaussian with covariance
  // P V P^T once the envelope is maximized over the fibre {P r = y - y_c}.
  Eigen::MatrixXd p(2, 2 * g.num_modes);
  p.row(0) = f.row.real();
  p.row(1) = f.row.imag();
  const Eigen::Vector2d yc(f.offset.real(), f.offset.imag());
  const Eigen::Vector2d ybar = p * g.mean + yc;
  Eigen::Matrix2d sigma = p * g.cov * p.transpose();
  sigma += 1e-14 * sigma.trace() * Eigen::Matrix2d::Identity();
  const Eigen::Matrix2d prec = sigma.inverse();
  const double kappa = f.kappa;

  auto value = [&](const Eigen::Vector2d& y) {
    const Eigen::Vector2d d = y - ybar;
    return (y.squaredNorm() + kappa) * std::exp(-0.5 * d.dot(prec * d));
  };
  auto gradient = [&](const Eigen::Vector2d& y) {
    const Eigen::Vector2d d = y - ybar;
    const double env = std::exp(-0.5 * d.dot(prec * d));
    return Eigen::Vector2d((2.0 * y - (y.squaredNorm() + kappa) * (prec * d)) * env);
  };
  auto hessian = [&](const Eigen::Vector2d& y) {
    const Eigen::Vector2d d = y - ybar;
    const Eigen::Vector2d u = prec * d;
    const double q = y.squaredNorm() + kappa;
    const double env = std::exp(-0.5 * d.dot(u));
    const Eigen::Matrix2d h = 2.0 * Eigen::Matrix2d::Identity() - 2.0 * (y * u.transpose() + u * y.transpose()) -
                              q * prec + q * u * u.transpose();
    return Eigen::Matrix2d(h * env);
  };

  // 32 starts: the origin, the envelope centre, and 30 points spread over
  // the disk |y|^2 < -kappa where the prefactor is negative.
  const double radius = std::sqrt(-kappa);
  const double length = std::min(radius, std::sqrt(Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(sigma).eigenvalues()(0)));
  std::vector<Eigen::Vector2d> starts{Eigen::Vector2d::Zero(), ybar};
  for (int ring = 1; ring <= 3; ++ring) {
    for (int k = 0; k < 10; ++k) {
      const double ang = 2.0 * std::numbers::pi * (k + 0.5 * ring) / 10.0;
      const double rr = radius * ring / 3.5;
      starts.emplace_back(rr * std::cos(ang), rr * std::sin(ang));
    }
  }

  // Damped Newton with a gradient fallback where the Hessian is indefinite.
  double best = std::numeric_limits<double>::infinity();
  bool best_converged = false;
  for (Eigen::Vector2d y : starts) {
    double fy = value(y);
    bool converged = false;
    for (int iter = 0; iter < 2000; ++iter) {
      const Eigen::Vector2d grad = gradient(y);
      if (grad.norm() == 0.0) {
        converged = true;
        break;
      }
      Eigen::Vector2d dir;
      const Eigen::LLT<Eigen::Matrix2d> llt(hessian(y));
      if (llt.info() == Eigen::Success) {
        dir = llt.solve(grad);
      } else {
        const Eigen::Vector2d d = y - ybar;
        const double env = std::exp(-0.5 * d.dot(prec * d));
        dir = grad * (length * length / (-kappa * env));
      }
      double step = 1.0;
      Eigen::Vector2d trial = y - step * dir;
      double ft = value(trial);
      while (ft > fy - 1e-4 * step * grad.dot(dir) && step > 1e-16) {
        step *= 0.5;
        trial = y - step * dir;
        ft = value(trial);
      }
      if (step <= 1e-16 || (step * dir).norm() < 1e-12 * length) {
        converged = true;  // no further progress at double precision
        if (ft < fy) {
          y = trial;
          fy = ft;
        }
        break;
      }
      y = trial;
      fy = ft;
    }
    if (fy < best) {
      best = fy;
      best_converged = converged;
    }
  }
  const double scale = std::exp(log_gaussian_peak(g)) / f.norm;
  return {std::min(0.0, best * scale), best_converged};
}

GaussianState moments_from_fock(const DensityMatrix& rho) {
  const FockSpec& spec = rho.spec;
  const int m = spec.num_modes();
  const int d = spec.cutoff();
  // Single-mode operators are formed at d+1 levels so that products such as
  // a a^dagger are exact on all d retained levels.
  const CMatrix a_big = annihilation_matrix(d + 1);
  const CMatrix x_big = (a_big + a_big.adjoint()) / std::sqrt(2.0);
  const CMatrix p_big = cplx(0.0, -1.0) * (a_big - a_big.adjoint()) / std::sqrt(2.0);
  const CMatrix quad_big[2] = {x_big, p_big};

  std::vector<CMatrix> single(2 * m);
  for (int i = 0; i < m; ++i) {
    for (int q = 0; q < 2; ++q) {
      single[2 * i + q] = embed_single_mode_op(quad_big[q].topLeftCorner(d, d), i, spec);
    }
  }
  auto expect = [&rho](const CMatrix& op) { return (rho.elements * op).trace().real(); };

  GaussianState g{m, VectorXd::Zero(2 * m), MatrixXd::Zero(2 * m, 2 * m)};
  for (int j = 0; j < 2 * m; ++j) g.mean(j) = expect(single[j]);
  for (int j = 0; j < 2 * m; ++j) {
    for (int k = j; k < 2 * m; ++k) {
      double sym;
      if (j / 2 == k / 2) {
        const CMatrix prod = (quad_big[j % 2] * quad_big[k % 2] + quad_big[k % 2] * quad_big[j % 2])
                                 .topLeftCorner(d, d);
        sym = 0.5 * expect(embed_single_mode_op(prod, j / 2, spec));
      } else {
        sym = expect(single[j] * single[k]);
      }
      g.cov(j, k) = g.cov(k, j) = sym - g.mean(j) * g.mean(k);
    }
  }
  return g;
}

}  // namespace statelab
