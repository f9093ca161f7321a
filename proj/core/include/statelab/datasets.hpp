#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "statelab/gaussian.hpp"
#include "statelab/homodyne.hpp"
#include "statelab/properties.hpp"

namespace statelab {

enum class Family { kPretrain, kOod, kNegativity, kNoon, kCat, kSqueezed };

std::string to_string(Family f);
Family parse_family(const std::string& name);

enum class Split { kTrain = 0, kTest = 1 };

struct StateDatasetEntry {
  int num_modes = 1;
  int stellar_rank = 0;  // -1 for infinite-rank families
  std::vector<double> xi;   // squeezing magnitudes per mode
  std::vector<double> eta;  // loss efficiencies per mode
  std::map<std::string, double> params;  // family-specific (N, alpha, phase, ...)
  std::vector<HomodyneRecord> records;
  std::vector<PropertyLabel> labels;
  Split split = Split::kTrain;

  double label(PropertyKind kind) const;
  double param(const std::string& name) const;
  bool operator==(const StateDatasetEntry&) const;
};

struct PretrainRanges {
  std::vector<int> modes{1, 2, 3};
  std::vector<int> ranks{0, 1, 2, 3, 4, 5};
  double xi_min = 0.1;
  double xi_max = 0.2;
  double displacement_max = 0.5;
  double eta_min = 0.6;
  double eta_max = 1.0;
};

struct DownstreamRanges {
  double eta_min = 0.5;
  double eta_max = 1.0;
  double negativity_xi_max_db = 8.0;
  double negativity_displacement_max = 0.5;
  double negativity_eta_min = 1.0;  // negativity states are lossless by default
  double negativity_eta_max = 1.0;
  int noon_max_photons = 8;
  double cat_alpha_max = 2.0;
  double squeezed_xi_max = 1.2;
};

struct GenConfig {
  Family family = Family::kPretrain;
  int count = 0;        // 0 selects the family default
  int train_count = -1;  // -1 selects the family default
  int num_modes = 5;    // negativity only
  std::uint64_t seed = 0;
  PretrainRanges pretrain;
  DownstreamRanges downstream;
  int threads = 1;
  int max_retries = 20;
};

/// Family defaults: pretrain 6000, ood 500, negativity 750 (600 train),
/// noon 2000 (600), cat 1500 (600), squeezed 1500 (600). Pretraining sets
/// are all train, OOD sets all test.
int default_count(Family f);
int default_train_count(Family f, int count);
/// m = 4, r in {3, 4, 5}, other ranges as for pretraining.
PretrainRanges default_ood_ranges();

/// Defaults for a family; OOD configs get the OOD ranges.
GenConfig default_gen_config(Family f);

/// Phase-space description of one negativity-family state.
struct NegativitySample {
  GaussianCircuit circuit;
  std::vector<double> eta;
  DegaussKind kind = DegaussKind::kNone;
  int mode = 0;

  DegaussifiedState state() const;
};

NegativitySample sample_negativity_state(int num_modes, const DownstreamRanges& ranges,
                                         std::uint64_t seed);

struct DatasetManifest {
  Family family = Family::kPretrain;
  std::uint32_t format_version = 1;
  int train_count = 0;
  int test_count = 0;
  std::uint64_t seed = 0;
  nlohmann::json ranges = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();  // e.g. tau, resample count

  int count() const { return train_count + test_count; }
  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
  bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<StateDatasetEntry> entries;

  std::vector<const StateDatasetEntry*> split(Split s) const;
};

/// Generates a whole dataset. Every entry derives its randomness from
/// (seed, index, attempt), so the result is independent of `threads`.
Dataset generate_dataset(const GenConfig& config,
                         const std::function<void(const std::string&)>& log = {});

/// Single-entry generators used by generate_dataset. They throw on
/// truncation or precondition failures; the caller resamples.
StateDatasetEntry make_pretrain_entry(const PretrainRanges& ranges, std::uint64_t seed);
StateDatasetEntry make_noon_entry(const DownstreamRanges& ranges, std::uint64_t seed);
StateDatasetEntry make_cat_entry(const DownstreamRanges& ranges, std::uint64_t seed);
StateDatasetEntry make_squeezed_entry(const DownstreamRanges& ranges, std::uint64_t seed);
/// Unlabelled for the class (tau is a dataset-level quantity); carries the
/// wigner_min label.
StateDatasetEntry make_negativity_entry(int num_modes, const DownstreamRanges& ranges, std::uint64_t seed);

/// 100-phase marginal table of every mode of a multimode pure state under
/// per-mode loss, via the reduced single-mode states.
std::vector<HomodyneRecord> pretrain_records(const PureState& psi, std::span<const double> eta);

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

/// Streams entries one at a time; the manifest is read on open.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& path);
  const DatasetManifest& manifest() const { return manifest_; }
  /// False at the end of the file. Throws IoError on checksum failures.
  bool next(StateDatasetEntry& entry);

 private:
  std::string path_;
  std::ifstream in_;
  DatasetManifest manifest_;
  std::vector<std::string> param_names_;
  int read_ = 0;
};

/// Human-readable summary of a manifest.
std::string describe(const DatasetManifest& manifest);

}  // namespace statelab
