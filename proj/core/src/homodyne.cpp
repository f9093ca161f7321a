#include "statelab/homodyne.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "statelab/error.hpp"
#include "statelab/rng.hpp"

namespace statelab {

void HomodyneSetting::validate(int num_modes) const {
  if (mode < 0 || mode >= num_modes) {
    throw ValidationError("HomodyneSetting: mode out of range");
  }
  if (!(phase >= 0.0) || phase >= std::numbers::pi) {
    throw ValidationError("HomodyneSetting: phase must lie in [0, pi)");
  }
}

double Histogram::sum() const { return std::accumulate(bins.begin(), bins.end(), 0.0); }

std::vector<double> default_grid() {
  std::vector<double> grid(kGridPoints);
  const double step = (kHistogramHi - kHistogramLo) / (kGridPoints - 1);
  for (int i = 0; i < kGridPoints; ++i) grid[i] = kHistogramLo + step * i;
  return grid;
}

double grid_phase(int k) { return std::numbers::pi * k / kPhasesPerMode; }

std::vector<double> hermite_functions(int count, double x) {
  std::vector<double> psi(count, 0.0);
  if (count == 0) return psi;
  psi[0] = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
  if (count > 1) psi[1] = std::sqrt(2.0) * x * psi[0];
  for (int n = 1; n + 1 < count; ++n) {
    psi[n + 1] = std::sqrt(2.0 / (n + 1)) * x * psi[n] - std::sqrt(double(n) / (n + 1)) * psi[n - 1];
  }
  return psi;
}

namespace {

double trapezoid(std::span<const double> f, std::span<const double> grid) {
  double mass = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    mass += 0.5 * (f[i] + f[i - 1]) * (grid[i] - grid[i - 1]);
  }
  return mass;
}

}  // namespace

std::vector<std::vector<double>> fock_marginals(const DensityMatrix& single_mode,
                                                std::span<const double> phases,
                                                std::span<const double> grid) {
  if (single_mode.spec.num_modes() != 1) {
    throw ValidationError("fock_marginals: single-mode state required");
  }
  const int d = single_mode.spec.cutoff();
  const auto npts = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd psi(d, npts);
  for (Eigen::Index j = 0; j < npts; ++j) {
    const auto h = hermite_functions(d, grid[j]);
    for (int n = 0; n < d; ++n) psi(n, j) = h[n];
  }
  std::vector<std::vector<double>> out;
  out.reserve(phases.size());
  for (double theta : phases) {
    // c_n = e^{i n theta} psi_n(x); p(x) = Re(c^dagger rho c).
    Eigen::VectorXcd rot(d);
    for (int n = 0; n < d; ++n) rot(n) = std::polar(1.0, n * theta);
    const CMatrix c = rot.asDiagonal() * psi.cast<cplx>();
    const CMatrix rc = single_mode.elements * c;
    std::vector<double> dens(grid.size());
    for (Eigen::Index j = 0; j < npts; ++j) {
      dens[j] = std::max(0.0, (c.col(j).adjoint() * rc.col(j))(0).real());
    }
    const double mass = trapezoid(dens, grid);
    if (mass < 1.0 - 1e-3) {
      throw NumericalError("fock_marginal: grid mass loss " + std::to_string(1.0 - mass));
    }
    out.push_back(std::move(dens));
  }
  return out;
}

std::vector<double> fock_marginal(const DensityMatrix& rho, const HomodyneSetting& setting,
                                  std::span<const double> grid) {
  if (grid.size() < 400 || grid.front() > kHistogramLo || grid.back() < kHistogramHi) {
    throw ValidationError("fock_marginal: grid must cover [-8, 8] with >= 400 points");
  }
  setting.validate(rho.spec.num_modes());
  const DensityMatrix reduced =
      rho.spec.num_modes() == 1 ? rho : partial_trace_keep(rho, setting.mode);
  const double phase[1] = {setting.phase};
  return fock_marginals(reduced, phase, grid).front();
}

Histogram bin_histogram(std::span<const double> density, std::span<const double> grid,
                        int* folded) {
  if (density.size() != grid.size() || grid.size() < 2) {
    throw ValidationError("bin_histogram: density and grid sizes differ");
  }
  Histogram h;
  const double width = (kHistogramHi - kHistogramLo) / kHistogramBins;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double area = 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
    const double mid = 0.5 * (grid[i] + grid[i - 1]);
    int bin = static_cast<int>(std::floor((mid - kHistogramLo) / width));
    if (bin < 0 || bin >= kHistogramBins) {
      if (folded != nullptr && area > 0.0) ++*folded;
      bin = std::clamp(bin, 0, kHistogramBins - 1);
    }
    h.bins[bin] += area;
  }
  const double total = h.sum();
  if (!(total > 0.0)) throw ValidationError("bin_histogram: density has no mass");
  for (double& b : h.bins) b /= total;
  return h;
}

Stage parse_stage(const std::string& name) {
  if (name == "pretrain") return Stage::kPretrain;
  if (name == "multimode-negativity" || name == "negativity") return Stage::kMultimodeNegativity;
  if (name == "noon") return Stage::kNoon;
  if (name == "cat") return Stage::kCat;
  if (name == "squeezed") return Stage::kSqueezed;
  throw ValidationError("invalid stage '" + name + "'");
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::kPretrain: return "pretrain";
    case Stage::kMultimodeNegativity: return "multimode-negativity";
    case Stage::kNoon: return "noon";
    case Stage::kCat: return "cat";
    case Stage::kSqueezed: return "squeezed";
  }
  return "unknown";
}

std::vector<HomodyneSetting> stage_settings(int num_modes, Stage stage) {
  if (num_modes < 1) throw ValidationError("stage_settings: num_modes must be positive");
  std::vector<HomodyneSetting> out;
  const double pi = std::numbers::pi;
  for (int mode = 0; mode < num_modes; ++mode) {
    switch (stage) {
      case Stage::kMultimodeNegativity:
        for (double p : {0.0, pi / 3.0, 2.0 * pi / 3.0}) out.push_back({mode, p});
        break;
      case Stage::kSqueezed:
        for (double p : {0.0, pi / 4.0, pi / 2.0}) out.push_back({mode, p});
        break;
      default:
        for (int k = 0; k < kPhasesPerMode; ++k) out.push_back({mode, grid_phase(k)});
        break;
    }
  }
  return out;
}

MeasurementPlan sample_measurement_plan(int num_modes, Stage stage, std::uint64_t seed) {
  MeasurementPlan plan;
  plan.all = stage_settings(num_modes, stage);
  if (stage == Stage::kMultimodeNegativity || stage == Stage::kSqueezed) {
    plan.context.resize(plan.all.size());
    std::iota(plan.context.begin(), plan.context.end(), 0);
    return plan;
  }
  Rng rng(seed);
  std::vector<char> in_context(plan.all.size(), 0);
  for (int mode = 0; mode < num_modes; ++mode) {
    const int count = rng.integer(10, 15);
    std::vector<int> idx(kPhasesPerMode);
    std::iota(idx.begin(), idx.end(), mode * kPhasesPerMode);
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    for (int k = 0; k < count; ++k) in_context[idx[k]] = 1;
  }
  for (int i = 0; i < static_cast<int>(plan.all.size()); ++i) {
    (in_context[i] ? plan.context : plan.query).push_back(i);
  }
  return plan;
}

}  // namespace statelab
