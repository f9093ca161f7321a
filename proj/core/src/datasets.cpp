#include "statelab/datasets.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <numbers>
#include <sstream>
#include <thread>

#include "statelab/container.hpp"
#include "statelab/error.hpp"
#include "statelab/rng.hpp"
#include "statelab/state_factory.hpp"

namespace statelab {

static_assert(std::endian::native == std::endian::little, "dataset files assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'L', 'D', 'A', 'T', 'A', '\0', '\0'};
constexpr char kEntryTag[4] = {'E', 'N', 'T', 'R'};
constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::kPretrain: return "pretrain";
    case Family::kOod: return "ood";
    case Family::kNegativity: return "negativity";
    case Family::kNoon: return "noon";
    case Family::kCat: return "cat";
    case Family::kSqueezed: return "squeezed";
  }
  return "unknown";
}

Family parse_family(const std::string& name) {
  for (auto f : {Family::kPretrain, Family::kOod, Family::kNegativity, Family::kNoon, Family::kCat,
                 Family::kSqueezed}) {
    if (to_string(f) == name) return f;
  }
  throw ValidationError("unknown family '" + name + "'");
}

double StateDatasetEntry::label(PropertyKind kind) const {
  for (const auto& l : labels) {
    if (l.kind == kind) return l.value;
  }
  throw ValidationError("entry has no " + to_string(kind) + " label");
}

double StateDatasetEntry::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw ValidationError("entry has no parameter '" + name + "'");
  return it->second;
}

bool StateDatasetEntry::operator==(const StateDatasetEntry& o) const {
  if (num_modes != o.num_modes || stellar_rank != o.stellar_rank || xi != o.xi || eta != o.eta ||
      params != o.params || split != o.split || records.size() != o.records.size() ||
      labels.size() != o.labels.size()) {
    return false;
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].kind != o.labels[i].kind || labels[i].value != o.labels[i].value) return false;
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!(records[i].setting == o.records[i].setting) ||
        records[i].histogram.bins != o.records[i].histogram.bins) {
      return false;
    }
  }
  return true;
}

int default_count(Family f) {
  switch (f) {
    case Family::kPretrain: return 6000;
    case Family::kOod: return 500;
    case Family::kNegativity: return 750;
    case Family::kNoon: return 2000;
    case Family::kCat: return 1500;
    case Family::kSqueezed: return 1500;
  }
  return 0;
}

int default_train_count(Family f, int count) {
  switch (f) {
    case Family::kPretrain: return count;
    case Family::kOod: return 0;
    default: return std::min(600, count);
  }
}

PretrainRanges default_ood_ranges() {
  PretrainRanges r;
  r.modes = {4};
  r.ranks = {3, 4, 5};
  return r;
}

GenConfig default_gen_config(Family f) {
  GenConfig c;
  c.family = f;
  if (f == Family::kOod) c.pretrain = default_ood_ranges();
  return c;
}

nlohmann::json DatasetManifest::to_json() const {
  return {{"family", to_string(family)}, {"format_version", format_version},
          {"train_count", train_count}, {"test_count", test_count},
          {"seed", seed},               {"ranges", ranges},
          {"extra", extra}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  try {
    DatasetManifest m;
    m.family = parse_family(j.at("family").get<std::string>());
    m.format_version = j.at("format_version").get<std::uint32_t>();
    m.train_count = j.at("train_count").get<int>();
    m.test_count = j.at("test_count").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.ranges = j.value("ranges", nlohmann::json::object());
    m.extra = j.value("extra", nlohmann::json::object());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed dataset manifest: ") + e.what());
  }
}

std::vector<const StateDatasetEntry*> Dataset::split(Split s) const {
  std::vector<const StateDatasetEntry*> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

namespace {

/// Marginal records of single-mode reduced states for the given settings,
/// evaluating all phases of a mode in one pass.
std::vector<HomodyneRecord> records_from_reduced(const std::vector<DensityMatrix>& reduced,
                                                 const std::vector<HomodyneSetting>& settings) {
  const std::vector<double> grid = default_grid();
  std::vector<HomodyneRecord> out(settings.size());
  for (int mode = 0; mode < static_cast<int>(reduced.size()); ++mode) {
    std::vector<std::size_t> idx;
    std::vector<double> phases;
    for (std::size_t i = 0; i < settings.size(); ++i) {
      if (settings[i].mode == mode) {
        idx.push_back(i);
        phases.push_back(settings[i].phase);
      }
    }
    if (idx.empty()) continue;
    const auto dens = fock_marginals(reduced[mode], phases, grid);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out[idx[k]] = {settings[idx[k]], bin_histogram(dens[k], grid)};
    }
  }
  return out;
}

std::vector<HomodyneSetting> context_settings(int num_modes, Stage stage, std::uint64_t seed) {
  const MeasurementPlan plan = sample_measurement_plan(num_modes, stage, seed);
  std::vector<HomodyneSetting> out;
  for (int i : plan.context) out.push_back(plan.all[i]);
  return out;
}

std::vector<double> squeezing_magnitudes(const GaussianCircuit& c) {
  std::vector<double> out;
  for (cplx xi : c.squeezing) out.push_back(std::abs(xi));
  return out;
}

}  // namespace

std::vector<HomodyneRecord> pretrain_records(const PureState& psi, std::span<const double> eta) {
  const int m = psi.spec.num_modes();
  if (static_cast<int>(eta.size()) != m) {
    throw ValidationError("pretrain_records: one efficiency per mode required");
  }
  const int d = psi.spec.cutoff();
  std::vector<DensityMatrix> reduced;
  for (int mode = 0; mode < m; ++mode) {
    const DensityMatrix red = m == 1 ? DensityMatrix::from_pure(psi) : reduced_from_pure(psi, mode);
    reduced.push_back(apply_loss_channel(red, LossSpec{{eta[mode]}, d - 1}));
  }
  return records_from_reduced(reduced, stage_settings(m, Stage::kPretrain));
}

StateDatasetEntry make_pretrain_entry(const PretrainRanges& ranges, std::uint64_t seed) {
  if (ranges.modes.empty() || ranges.ranks.empty()) {
    throw ValidationError("pretraining ranges need at least one mode count and rank");
  }
  Rng rng(seed);
  StateDatasetEntry e;
  e.num_modes = ranges.modes[rng.integer(0, static_cast<int>(ranges.modes.size()) - 1)];
  e.stellar_rank = ranges.ranks[rng.integer(0, static_cast<int>(ranges.ranks.size()) - 1)];
  const int cutoff = cutoff_heuristic(e.stellar_rank, ranges.xi_max);
  const CoreState core = random_core_state(e.num_modes, e.stellar_rank, rng.engine()(), cutoff);
  const CircuitRanges cr{ranges.xi_min, ranges.xi_max, ranges.displacement_max};
  const GaussianCircuit circuit = random_gaussian_circuit(e.num_modes, cr, rng.engine()());
  const PureState psi = apply_gaussian_circuit(core, circuit);
  for (int i = 0; i < e.num_modes; ++i) e.eta.push_back(rng.uniform(ranges.eta_min, ranges.eta_max));
  e.xi = squeezing_magnitudes(circuit);
  e.params["top_weight"] = core.max_top_weight();
  e.params["cutoff"] = cutoff;
  e.records = pretrain_records(psi, e.eta);
  return e;
}

StateDatasetEntry make_noon_entry(const DownstreamRanges& ranges, std::uint64_t seed) {
  Rng rng(seed);
  StateDatasetEntry e;
  const int n = rng.integer(1, ranges.noon_max_photons);
  const double phase = rng.uniform(0.0, kTwoPi);
  e.num_modes = 2;
  e.stellar_rank = n;
  e.eta = {rng.uniform(ranges.eta_min, ranges.eta_max), rng.uniform(ranges.eta_min, ranges.eta_max)};
  e.xi = {0.0, 0.0};
  e.params["photons"] = n;
  e.params["phase"] = phase;
  const DensityMatrix rho = make_noon(n, phase, e.eta[0], e.eta[1]);
  e.labels = {{PropertyKind::kPurity, purity(rho)},
              {PropertyKind::kFidelity, state_fidelity(rho, noon_pure(n, phase))}};
  const std::vector<DensityMatrix> reduced{partial_trace_keep(rho, 0), partial_trace_keep(rho, 1)};
  e.records = records_from_reduced(reduced, context_settings(2, Stage::kNoon, rng.engine()()));
  return e;
}

StateDatasetEntry make_cat_entry(const DownstreamRanges& ranges, std::uint64_t seed) {
  Rng rng(seed);
  StateDatasetEntry e;
  const double alpha = rng.uniform(0.0, ranges.cat_alpha_max);
  const double phase = rng.uniform(0.0, kTwoPi);
  e.num_modes = 1;
  e.stellar_rank = -1;
  e.eta = {rng.uniform(ranges.eta_min, ranges.eta_max)};
  e.xi = {0.0};
  e.params["alpha"] = alpha;
  e.params["phase"] = phase;
  const DensityMatrix rho = make_cat(cplx(alpha, 0.0), phase, e.eta[0]);
  e.labels = {{PropertyKind::kCatSize, alpha * alpha},
              {PropertyKind::kFidelity, state_fidelity(rho, cat_pure(cplx(alpha, 0.0), phase))}};
  e.records = records_from_reduced({rho}, context_settings(1, Stage::kCat, rng.engine()()));
  return e;
}

StateDatasetEntry make_squeezed_entry(const DownstreamRanges& ranges, std::uint64_t seed) {
  Rng rng(seed);
  StateDatasetEntry e;
  const double xi = rng.uniform(0.0, ranges.squeezed_xi_max);
  e.num_modes = 1;
  e.stellar_rank = 0;
  e.eta = {rng.uniform(ranges.eta_min, ranges.eta_max)};
  e.xi = {xi};
  const DensityMatrix rho = make_squeezed_vacuum(xi, e.eta[0]);
  e.labels = {{PropertyKind::kQfi, qfi_optimal_quadrature(rho).value},
              {PropertyKind::kFidelity,
               state_fidelity(rho, squeezed_vacuum_pure(xi, rho.spec.cutoff()))}};
  e.records = records_from_reduced({rho}, stage_settings(1, Stage::kSqueezed));
  return e;
}

DegaussifiedState NegativitySample::state() const {
  const GaussianState g = loss_on_gaussian(circuit_to_gaussian(circuit), eta);
  if (kind == DegaussKind::kNone) return {g, DegaussKind::kNone, 0};
  return degaussify(g, kind, mode);
}

NegativitySample sample_negativity_state(int num_modes, const DownstreamRanges& ranges,
                                         std::uint64_t seed) {
  if (num_modes < 1) throw ValidationError("negativity: num_modes must be positive");
  Rng rng(seed);
  NegativitySample s;
  const CircuitRanges cr{0.0, xi_from_db(ranges.negativity_xi_max_db),
                         ranges.negativity_displacement_max};
  s.circuit = random_gaussian_circuit(num_modes, cr, rng.engine()());
  for (int i = 0; i < num_modes; ++i) {
    s.eta.push_back(rng.uniform(ranges.negativity_eta_min, ranges.negativity_eta_max));
  }
  if (rng.uniform() < 2.0 / 3.0) {
    s.kind = rng.integer(0, 1) == 0 ? DegaussKind::kSubtracted : DegaussKind::kAdded;
    s.mode = rng.integer(0, num_modes - 1);
  }
  return s;
}

StateDatasetEntry make_negativity_entry(int num_modes, const DownstreamRanges& ranges,
                                        std::uint64_t seed) {
  const NegativitySample s = sample_negativity_state(num_modes, ranges, seed);
  const DegaussifiedState state = s.state();
  StateDatasetEntry e;
  e.num_modes = num_modes;
  e.stellar_rank = s.kind == DegaussKind::kNone ? 0 : 1;
  e.xi = squeezing_magnitudes(s.circuit);
  e.eta = s.eta;
  e.params["degauss_kind"] = static_cast<double>(s.kind);
  e.params["degauss_mode"] = s.mode;
  const WignerMinResult wmin = wigner_min(state);
  if (!wmin.converged) throw NumericalError("wigner_min did not converge");
  e.labels = {{PropertyKind::kWignerMin, wmin.value}};
  const std::vector<double> grid = default_grid();
  for (const HomodyneSetting& st : stage_settings(num_modes, Stage::kMultimodeNegativity)) {
    e.records.push_back({st, bin_histogram(marginal_density(state, st.mode, st.phase, grid), grid)});
  }
  return e;
}

namespace {

nlohmann::json ranges_json(const GenConfig& c) {
  if (c.family == Family::kPretrain || c.family == Family::kOod) {
    const PretrainRanges& r = c.pretrain;
    return {{"modes", r.modes},         {"ranks", r.ranks},
            {"xi_min", r.xi_min},       {"xi_max", r.xi_max},
            {"displacement_max", r.displacement_max},
            {"eta_min", r.eta_min},     {"eta_max", r.eta_max}};
  }
  const DownstreamRanges& r = c.downstream;
  nlohmann::json j = {{"eta_min", r.eta_min}, {"eta_max", r.eta_max}};
  switch (c.family) {
    case Family::kNegativity:
      j["num_modes"] = c.num_modes;
      j["eta_min"] = r.negativity_eta_min;
      j["eta_max"] = r.negativity_eta_max;
      j["xi_max_db"] = r.negativity_xi_max_db;
      j["displacement_max"] = r.negativity_displacement_max;
      break;
    case Family::kNoon: j["max_photons"] = r.noon_max_photons; break;
    case Family::kCat: j["alpha_max"] = r.cat_alpha_max; break;
    case Family::kSqueezed: j["xi_max"] = r.squeezed_xi_max; break;
    default: break;
  }
  return j;
}

StateDatasetEntry make_entry(const GenConfig& c, std::uint64_t seed) {
  switch (c.family) {
    case Family::kPretrain:
    case Family::kOod: return make_pretrain_entry(c.pretrain, seed);
    case Family::kNegativity: return make_negativity_entry(c.num_modes, c.downstream, seed);
    case Family::kNoon: return make_noon_entry(c.downstream, seed);
    case Family::kCat: return make_cat_entry(c.downstream, seed);
    case Family::kSqueezed: return make_squeezed_entry(c.downstream, seed);
  }
  throw ValidationError("unknown family");
}

void check_entry(const StateDatasetEntry& e, int expected_records) {
  if (static_cast<int>(e.records.size()) != expected_records) {
    throw NumericalError("entry has " + std::to_string(e.records.size()) + " records, expected " +
                         std::to_string(expected_records));
  }
  for (const auto& r : e.records) {
    r.setting.validate(e.num_modes);
    if (std::abs(r.histogram.sum() - 1.0) > 1e-9) throw NumericalError("histogram does not sum to 1");
  }
  for (const auto& l : e.labels) l.validate();
}

int expected_records(Family f, int num_modes) {
  switch (f) {
    case Family::kPretrain:
    case Family::kOod: return num_modes * kPhasesPerMode;
    case Family::kNegativity:
    case Family::kSqueezed: return num_modes * 3;
    default: return -1;  // random context size
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Dataset generate_dataset(const GenConfig& config,
                         const std::function<void(const std::string&)>& log) {
  const int count = config.count > 0 ? config.count : default_count(config.family);
  const int train = config.train_count >= 0 ? config.train_count
                                            : default_train_count(config.family, count);
  if (train > count) throw ValidationError("train count exceeds dataset size");
  if (config.max_retries < 0) throw ValidationError("max_retries must be >= 0");
  if (config.family == Family::kNegativity && config.num_modes < 1) {
    throw ValidationError("negativity: num_modes must be positive");
  }

  std::vector<StateDatasetEntry> entries(count);
  std::vector<int> resamples(count, 0);
  std::vector<std::string> notes(count);
  std::vector<std::exception_ptr> failures(count);

  auto work = [&](int i) {
    std::string last;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
      try {
        StateDatasetEntry e = make_entry(config, mix_seed(mix_seed(config.seed, i), attempt));
        const int want = expected_records(config.family, e.num_modes);
        if (want >= 0) check_entry(e, want);
        else check_entry(e, static_cast<int>(e.records.size()));
        e.split = i < train ? Split::kTrain : Split::kTest;
        entries[i] = std::move(e);
        resamples[i] = attempt;
        if (attempt > 0) notes[i] = "entry " + std::to_string(i) + " resampled " +
                                    std::to_string(attempt) + "x: " + last;
        return;
      } catch (const Error& err) {
        last = err.what();
      } catch (...) {
        failures[i] = std::current_exception();
        return;
      }
    }
    failures[i] = std::make_exception_ptr(NumericalError(
        "entry " + std::to_string(i) + " failed after " + std::to_string(config.max_retries + 1) +
        " attempts: " + last));
  };

  const int threads = std::max(1, std::min(config.threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (int i = t; i < count; i += threads) work(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (int i = 0; i < count; ++i) {
    if (failures[i]) std::rethrow_exception(failures[i]);
  }

  Dataset ds;
  ds.manifest.family = config.family;
  ds.manifest.format_version = kDatasetFormatVersion;
  ds.manifest.train_count = train;
  ds.manifest.test_count = count - train;
  ds.manifest.seed = config.seed;
  ds.manifest.ranges = ranges_json(config);
  int total_resamples = 0;
  for (int i = 0; i < count; ++i) {
    total_resamples += resamples[i];
    if (log && !notes[i].empty()) log(notes[i]);
  }
  ds.manifest.extra["resampled"] = total_resamples;

  if (config.family == Family::kNegativity) {
    std::vector<double> wmins;
    for (const auto& e : entries) wmins.push_back(e.label(PropertyKind::kWignerMin));
    const double tau = median(wmins);
    int positives = 0;
    for (auto& e : entries) {
      const bool negative = e.label(PropertyKind::kWignerMin) < tau;
      positives += negative ? 1 : 0;
      e.labels.push_back({PropertyKind::kNegativityClass, negative ? 1.0 : 0.0});
    }
    ds.manifest.extra["tau"] = tau;
    ds.manifest.extra["num_modes"] = config.num_modes;
    ds.manifest.extra["positive_fraction"] = static_cast<double>(positives) / count;
    if (log) {
      std::ostringstream os;
      os << "negativity: phase-space path, m = " << config.num_modes << ", tau = " << tau
         << ", class-1 fraction " << static_cast<double>(positives) / count;
      log(os.str());
    }
  }
  ds.entries = std::move(entries);
  return ds;
}

namespace {

std::vector<std::string> collect_param_names(const std::vector<StateDatasetEntry>& entries) {
  std::vector<std::string> names;
  for (const auto& e : entries) {
    for (const auto& [k, v] : e.params) {
      if (std::find(names.begin(), names.end(), k) == names.end()) names.push_back(k);
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<double> encode_entry(const StateDatasetEntry& e, const std::vector<std::string>& names) {
  std::vector<double> p;
  p.push_back(e.num_modes);
  p.push_back(e.stellar_rank);
  p.push_back(static_cast<double>(e.split));
  p.push_back(static_cast<double>(e.xi.size()));
  p.insert(p.end(), e.xi.begin(), e.xi.end());
  p.push_back(static_cast<double>(e.eta.size()));
  p.insert(p.end(), e.eta.begin(), e.eta.end());
  p.push_back(static_cast<double>(e.params.size()));
  for (const auto& [k, v] : e.params) {
    p.push_back(static_cast<double>(std::find(names.begin(), names.end(), k) - names.begin()));
    p.push_back(v);
  }
  p.push_back(static_cast<double>(e.labels.size()));
  for (const auto& l : e.labels) {
    p.push_back(static_cast<double>(l.kind));
    p.push_back(l.value);
  }
  p.push_back(static_cast<double>(e.records.size()));
  for (const auto& r : e.records) {
    p.push_back(r.setting.mode);
    p.push_back(r.setting.phase);
    p.insert(p.end(), r.histogram.bins.begin(), r.histogram.bins.end());
  }
  return p;
}

class PayloadCursor {
 public:
  explicit PayloadCursor(const std::vector<double>& p) : p_(p) {}
  double next() {
    if (pos_ >= p_.size()) throw IoError("dataset entry payload truncated");
    return p_[pos_++];
  }
  std::size_t count() {
    const double v = next();
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e9) throw IoError("dataset entry has a bad length field");
    return static_cast<std::size_t>(v);
  }
  bool done() const { return pos_ == p_.size(); }

 private:
  const std::vector<double>& p_;
  std::size_t pos_ = 0;
};

StateDatasetEntry decode_entry(const std::vector<double>& payload, const std::vector<std::string>& names) {
  PayloadCursor c(payload);
  StateDatasetEntry e;
  e.num_modes = static_cast<int>(c.next());
  e.stellar_rank = static_cast<int>(c.next());
  e.split = c.next() == 0.0 ? Split::kTrain : Split::kTest;
  e.xi.resize(c.count());
  for (double& v : e.xi) v = c.next();
  e.eta.resize(c.count());
  for (double& v : e.eta) v = c.next();
  const std::size_t np = c.count();
  for (std::size_t i = 0; i < np; ++i) {
    const std::size_t idx = c.count();
    if (idx >= names.size()) throw IoError("dataset entry references an unknown parameter");
    e.params[names[idx]] = c.next();
  }
  e.labels.resize(c.count());
  for (auto& l : e.labels) {
    const double k = c.next();
    if (k < 0.0 || k > static_cast<double>(PropertyKind::kWignerMin)) throw IoError("bad label kind");
    l.kind = static_cast<PropertyKind>(static_cast<int>(k));
    l.value = c.next();
  }
  e.records.resize(c.count());
  for (auto& r : e.records) {
    r.setting.mode = static_cast<int>(c.next());
    r.setting.phase = c.next();
    for (double& b : r.histogram.bins) b = c.next();
  }
  if (!c.done()) throw IoError("dataset entry has trailing data");
  return e;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated dataset file " + path);
  return v;
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  const std::vector<std::string> names = collect_param_names(dataset.entries);
  nlohmann::json header = dataset.manifest.to_json();
  header["format_version"] = kDatasetFormatVersion;
  header["param_names"] = names;
  const std::string text = header.dump();
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kDatasetFormatVersion);
  write_pod(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& e : dataset.entries) {
    const std::vector<double> payload = encode_entry(e, names);
    const auto n = static_cast<std::uint32_t>(payload.size());
    std::uint64_t h = fnv1a(kEntryTag, sizeof(kEntryTag));
    h = fnv1a(&n, sizeof(n), h);
    h = fnv1a(payload.data(), payload.size() * sizeof(double), h);
    out.write(kEntryTag, sizeof(kEntryTag));
    write_pod(out, n);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(double)));
    write_pod(out, h);
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

DatasetReader::DatasetReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw IoError("cannot open " + path);
  char magic[8];
  in_.read(magic, sizeof(magic));
  if (!in_ || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError(path + " is not a dataset file");
  }
  const auto version = read_pod<std::uint32_t>(in_, path);
  if (version != kDatasetFormatVersion) {
    throw IoError("unsupported dataset format version " + std::to_string(version));
  }
  const auto len = read_pod<std::uint64_t>(in_, path);
  if (len > (1ull << 30)) throw IoError("dataset header too large");
  std::string text(len, '\0');
  in_.read(text.data(), static_cast<std::streamsize>(len));
  if (!in_) throw IoError("truncated dataset file " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    param_names_ = header.at("param_names").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed dataset header: " + std::string(e.what()));
  }
  manifest_ = DatasetManifest::from_json(header);
}

bool DatasetReader::next(StateDatasetEntry& entry) {
  if (read_ == manifest_.count()) {
    if (in_.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in " + path_);
    return false;
  }
  char tag[4];
  in_.read(tag, sizeof(tag));
  if (!in_ || std::memcmp(tag, kEntryTag, sizeof(kEntryTag)) != 0) {
    throw IoError("corrupt entry header in " + path_);
  }
  const auto n = read_pod<std::uint32_t>(in_, path_);
  std::vector<double> payload(n);
  in_.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in_) throw IoError("truncated dataset file " + path_);
  const auto stored = read_pod<std::uint64_t>(in_, path_);
  std::uint64_t h = fnv1a(kEntryTag, sizeof(kEntryTag));
  h = fnv1a(&n, sizeof(n), h);
  h = fnv1a(payload.data(), payload.size() * sizeof(double), h);
  if (h != stored) throw IoError("checksum mismatch in entry " + std::to_string(read_) + " of " + path_);
  entry = decode_entry(payload, param_names_);
  ++read_;
  return true;
}

Dataset load_dataset(const std::string& path) {
  DatasetReader reader(path);
  Dataset ds;
  ds.manifest = reader.manifest();
  ds.entries.reserve(static_cast<std::size_t>(ds.manifest.count()));
  StateDatasetEntry e;
  while (reader.next(e)) ds.entries.push_back(std::move(e));
  return ds;
}

std::string describe(const DatasetManifest& m) {
  std::ostringstream os;
  os << "family:   " << to_string(m.family) << "\n"
     << "version:  " << m.format_version << "\n"
     << "entries:  " << m.count() << " (train " << m.train_count << ", test " << m.test_count << ")\n"
     << "seed:     " << m.seed << "\n"
     << "ranges:   " << m.ranges.dump() << "\n";
  if (!m.extra.empty()) os << "extra:    " << m.extra.dump() << "\n";
  return os.str();
}

}  // namespace statelab
