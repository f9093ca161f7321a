#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "statelab/fock.hpp"

namespace statelab {

inline constexpr int kHistogramBins = 50;
inline constexpr double kHistogramLo = -8.0;
inline constexpr double kHistogramHi = 8.0;
inline constexpr int kGridPoints = 401;
inline constexpr int kPhasesPerMode = 100;

/// Local homodyne measurement of x_mode(phase), phase in [0, pi).
struct HomodyneSetting {
  int mode = 0;
  double phase = 0.0;

  void validate(int num_modes) const;
  bool operator==(const HomodyneSetting&) const = default;
};

struct Histogram {
  std::array<double, kHistogramBins> bins{};

  double sum() const;
};

/// One measured setting and its binned outcome distribution.
struct HomodyneRecord {
  HomodyneSetting setting;
  Histogram histogram;
};

/// 401 uniform points on [-8, 8].
std::vector<double> default_grid();

/// Phase k*pi/100 for k = 0..99.
double grid_phase(int k);

/// Hermite functions psi_0..psi_{count-1} at x (three-term recurrence).
std::vector<double> hermite_functions(int count, double x);

/// p(x|theta) of the reduced state of `setting.mode`. Multimode inputs are
/// reduced first. Throws if the grid loses more than 1e-3 of the mass.
std::vector<double> fock_marginal(const DensityMatrix& rho,
                                  const HomodyneSetting& setting,
                                  std::span<const double> grid);

/// Same, evaluated for several phases of one single-mode state at once.
std::vector<std::vector<double>> fock_marginals(const DensityMatrix& single_mode,
                                                std::span<const double> phases,
                                                std::span<const double> grid);

/// Per-bin trapezoidal mass over [-8, 8], renormalized to sum 1. Intervals
/// outside the range fold into the edge bins and increment `*folded`.
Histogram bin_histogram(std::span<const double> density, std::span<const double> grid,
                        int* folded = nullptr);

/// Which measurement protocol a dataset family uses.
enum class Stage { kPretrain, kMultimodeNegativity, kNoon, kCat, kSqueezed };

Stage parse_stage(const std::string& name);
std::string to_string(Stage stage);

/// All settings of a protocol plus a context/query partition given as
/// indices into `all`.
struct MeasurementPlan {
  std::vector<HomodyneSetting> all;
  std::vector<int> context;
  std::vector<int> query;
};

/// The full set of settings measured for a stage: 100 grid phases per mode
/// for the random-context stages, three fixed phases per mode otherwise.
std::vector<HomodyneSetting> stage_settings(int num_modes, Stage stage);

MeasurementPlan sample_measurement_plan(int num_modes, Stage stage, std::uint64_t seed);

}  // namespace statelab
