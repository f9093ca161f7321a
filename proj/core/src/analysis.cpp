#include "statelab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "statelab/error.hpp"
#include "statelab/rng.hpp"

namespace statelab {

double r_squared(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || truth.empty()) {
    throw ValidationError("r_squared: inputs must have equal nonzero length");
  }
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / truth.size();
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  }
  if (ss_tot == 0.0) throw ValidationError("r_squared: undefined for constant truth");
  return 1.0 - ss_res / ss_tot;
}

ClassificationMetrics classification_metrics(std::span<const double> prob, std::span<const double> labels,
                                             double threshold) {
  if (prob.size() != labels.size()) throw ValidationError("classification_metrics: length mismatch");
  if (prob.empty()) throw ValidationError("classification_metrics: empty input");
  ClassificationMetrics m;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const bool predicted = prob[i] >= threshold;
    const bool actual = labels[i] >= 0.5;
    if (predicted && actual) ++m.true_positive;
    else if (!predicted && !actual) ++m.true_negative;
    else if (predicted) ++m.false_positive;
    else ++m.false_negative;
  }
  m.accuracy = static_cast<double>(m.true_positive + m.true_negative) / prob.size();
  return m;
}

namespace {

/// Row-conditional affinities with per-point precision found by bisection
/// so that the entropy matches log(perplexity).
Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& dist2, double perplexity) {
  const Eigen::Index n = dist2.rows();
  const double target = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) dmin = std::min(dmin, dist2(i, j));
    }
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0.0;
      double weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double shifted = dist2(i, j) - dmin;
        const double v = std::exp(-beta * shifted);
        p(i, j) = v;
        sum += v;
        weighted += shifted * v;
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      p.row(i) /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
  }
  return p;
}

double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y) {
  const Eigen::Index n = y.rows();
  Eigen::MatrixXd num(n, n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    num(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      num(i, j) = num(j, i) = v;
      total += 2.0 * v;
    }
  }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || p(i, j) <= 0.0) continue;
      const double q = std::max(num(i, j) / total, 1e-300);
      kl += p(i, j) * std::log(p(i, j) / q);
    }
  }
  return kl;
}

}  // namespace

TsneResult tsne_embed(const Eigen::MatrixXd& data, const TsneConfig& config) {
  const Eigen::Index n = data.rows();
  if (n < 2 || n > 5000) throw ValidationError("tsne_embed: need 2 <= N <= 5000 points");
  if (!(config.perplexity > 0.0) || config.perplexity >= n / 3.0) {
    throw ValidationError("tsne_embed: perplexity must be positive and below N/3");
  }
  if (config.iterations < 1) throw ValidationError("tsne_embed: iterations must be positive");

  Eigen::MatrixXd dist2(n, n);
  double max_d = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    dist2(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      dist2(i, j) = dist2(j, i) = (data.row(i) - data.row(j)).squaredNorm();
      max_d = std::max(max_d, dist2(i, j));
    }
  }
  if (max_d == 0.0) throw ValidationError("tsne_embed: all input points are identical");

  const Eigen::MatrixXd cond = conditional_affinities(dist2, config.perplexity);
  Eigen::MatrixXd p = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);
  p.diagonal().setZero();

  Rng rng(config.seed);
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i, 0) = rng.normal(0.0, 1e-2);
    y(i, 1) = rng.normal(0.0, 1e-2);
  }

  TsneResult result;
  result.initial_kl = kl_divergence(p, y);

  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd num(n, n);
  Eigen::MatrixXd grad(n, 2);
  for (int iter = 0; iter < config.iterations; ++iter) {
    const bool early = iter < config.exaggeration_iterations;
    const double exaggeration = early ? config.early_exaggeration : 1.0;
    const double momentum = early ? 0.5 : 0.8;

    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        num(i, j) = num(j, i) = v;
        total += 2.0 * v;
      }
    }
    grad.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double w = (exaggeration * p(i, j) - num(i, j) / total) * num(i, j);
        grad.row(i) += 4.0 * w * (y.row(i) - y.row(j));
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int k = 0; k < 2; ++k) {
        const bool same_sign = (grad(i, k) > 0.0) == (update(i, k) > 0.0);
        gains(i, k) = same_sign ? std::max(gains(i, k) * 0.8, 0.01) : gains(i, k) + 0.2;
        update(i, k) = momentum * update(i, k) - config.learning_rate * gains(i, k) * grad(i, k);
      }
    }
    y += update;
    const Eigen::RowVector2d centre = y.colwise().mean();
    y.rowwise() -= centre;
  }
  result.final_kl = kl_divergence(p, y);
  result.points = std::move(y);
  return result;
}

double silhouette_score(const Eigen::MatrixXd& points, std::span<const int> labels) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (labels.size() != n) throw ValidationError("silhouette_score: label count mismatch");
  std::map<int, int> sizes;
  for (int l : labels) ++sizes[l];
  if (sizes.size() < 2) throw ValidationError("silhouette_score: need at least two clusters");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[labels[i]] == 1) continue;  // singleton clusters score 0
    std::map<int, double> sums;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sums[labels[j]] += (points.row(i) - points.row(j)).norm();
    }
    const double a = sums[labels[i]] / (sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, size] : sizes) {
      if (label != labels[i]) b = std::min(b, sums[label] / size);
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

MarginalPredictor model_predictor(const nn::OsfmModel& model) {
  return [&model](const StateDatasetEntry& entry, std::span<const HomodyneRecord> context,
                  std::span<const HomodyneSetting> queries) {
    const Eigen::VectorXd z = nn::encode_representation(model, context, entry.num_modes);
    std::vector<Histogram> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(nn::generate_marginal(model, z, q, entry.num_modes));
    return out;
  };
}

BucketStats EvalReport::pooled(bool ood) const {
  const auto& v = ood ? ood_fidelity : id_fidelity;
  BucketStats s;
  s.count = static_cast<int>(v.size());
  if (!v.empty()) s.mean_fidelity = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  return s;
}

namespace {

void add_to(std::map<BucketKey, std::pair<double, int>>& acc, const BucketKey& k, double f) {
  auto& [sum, count] = acc[k];
  sum += f;
  ++count;
}

template <typename K>
std::map<K, BucketStats> finalize(const std::map<K, std::pair<double, int>>& acc) {
  std::map<K, BucketStats> out;
  for (const auto& [k, v] : acc) out[k] = {v.first / v.second, v.second};
  return out;
}

bool non_increasing(const std::map<std::pair<bool, int>, BucketStats>& m, bool ood) {
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& [k, s] : m) {
    if (k.first != ood) continue;
    if (s.mean_fidelity > prev) return false;
    prev = s.mean_fidelity;
  }
  return true;
}

}  // namespace

EvalReport fidelity_report(const MarginalPredictor& predictor,
                           std::span<const StateDatasetEntry* const> id,
                           std::span<const StateDatasetEntry* const> ood,
                           const ReportOptions& options) {
  if (!(options.xi_band_width > 0.0)) throw ValidationError("fidelity_report: band width must be positive");
  EvalReport report;
  report.xi_band_width = options.xi_band_width;
  std::map<BucketKey, std::pair<double, int>> acc;
  std::map<std::pair<bool, int>, std::pair<double, int>> rank_acc;
  std::map<std::pair<bool, int>, std::pair<double, int>> mode_acc;

  for (int split = 0; split < 2; ++split) {
    const bool is_ood = split == 1;
    const auto entries = is_ood ? ood : id;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const StateDatasetEntry& e = *entries[i];
      if (static_cast<int>(e.records.size()) != e.num_modes * kPhasesPerMode) {
        throw ValidationError("fidelity_report: entries need the full phase table");
      }
      const std::uint64_t seed = mix_seed(mix_seed(options.seed, split), i);
      const MeasurementPlan plan = sample_measurement_plan(e.num_modes, Stage::kPretrain, seed);
      std::vector<HomodyneRecord> context;
      for (int c : plan.context) context.push_back(e.records[c]);
      std::vector<HomodyneSetting> queries;
      for (int q : plan.query) queries.push_back(plan.all[q]);
      const std::vector<Histogram> pred = predictor(e, context, queries);
      if (pred.size() != queries.size()) throw ValidationError("fidelity_report: predictor output size");
      double f = 0.0;
      for (std::size_t q = 0; q < queries.size(); ++q) {
        f += classical_fidelity(pred[q], e.records[plan.query[q]].histogram);
      }
      f /= static_cast<double>(queries.size());
      (is_ood ? report.ood_fidelity : report.id_fidelity).push_back(f);

      double xi_mean = 0.0;
      for (double x : e.xi) xi_mean += x;
      if (!e.xi.empty()) xi_mean /= static_cast<double>(e.xi.size());
      const int band = static_cast<int>(std::floor(xi_mean / options.xi_band_width + 1e-9));
      add_to(acc, {is_ood, e.stellar_rank, e.num_modes, band}, f);
      auto& r = rank_acc[{is_ood, e.stellar_rank}];
      r.first += f;
      ++r.second;
      auto& m = mode_acc[{is_ood, e.num_modes}];
      m.first += f;
      ++m.second;
    }
  }
  report.buckets = finalize(acc);
  report.by_rank = finalize(rank_acc);
  report.by_modes = finalize(mode_acc);
  const bool trend_on_ood = id.empty();
  report.rank_non_increasing = non_increasing(report.by_rank, trend_on_ood);
  report.modes_non_increasing = non_increasing(report.by_modes, trend_on_ood);
  return report;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "kind,split,r,m,xi_lo,xi_hi,count,value\n";
  auto split = [](bool ood) { return ood ? "OOD" : "ID"; };
  for (const auto& [k, s] : buckets) {
    os << "bucket," << split(k.ood) << ',' << k.rank << ',' << k.modes << ',' << k.xi_band * xi_band_width
       << ',' << (k.xi_band + 1) * xi_band_width << ',' << s.count << ',' << s.mean_fidelity << '\n';
  }
  for (const auto& [k, s] : by_rank) {
    os << "rank," << split(k.first) << ',' << k.second << ",,,," << s.count << ',' << s.mean_fidelity << '\n';
  }
  for (const auto& [k, s] : by_modes) {
    os << "modes," << split(k.first) << ",," << k.second << ",,," << s.count << ',' << s.mean_fidelity << '\n';
  }
  for (bool ood : {false, true}) {
    const BucketStats s = pooled(ood);
    if (s.count > 0) os << "pooled," << split(ood) << ",,,,," << s.count << ',' << s.mean_fidelity << '\n';
  }
  os << "trend_rank_non_increasing,,,,,,," << (rank_non_increasing ? 1 : 0) << '\n';
  os << "trend_modes_non_increasing,,,,,,," << (modes_non_increasing ? 1 : 0) << '\n';
  return os.str();
}

std::string embedding_csv(std::span<const EmbeddingRow> rows) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "x,y,family,r,m,xi,weight\n";
  for (const auto& r : rows) {
    os << r.x << ',' << r.y << ',' << r.family << ',' << r.rank << ',' << r.modes << ',' << r.xi << ','
       << r.weight << '\n';
  }
  return os.str();
}

std::vector<HomodyneRecord> context_records(const StateDatasetEntry& entry, std::uint64_t seed) {
  if (static_cast<int>(entry.records.size()) != entry.num_modes * kPhasesPerMode) return entry.records;
  const MeasurementPlan plan = sample_measurement_plan(entry.num_modes, Stage::kPretrain, seed);
  std::vector<HomodyneRecord> out;
  out.reserve(plan.context.size());
  for (int c : plan.context) out.push_back(entry.records[c]);
  return out;
}

Eigen::MatrixXd representation_matrix(const nn::OsfmModel& model, std::span<const EmbedInput> states,
                                      std::uint64_t seed) {
  Eigen::MatrixXd z(static_cast<Eigen::Index>(states.size()), model.dims.z_dim);
  for (std::size_t i = 0; i < states.size(); ++i) {
    const StateDatasetEntry& e = *states[i].entry;
    z.row(static_cast<Eigen::Index>(i)) =
        nn::encode_representation(model, context_records(e, mix_seed(seed, i)), e.num_modes).transpose();
  }
  return z;
}

std::vector<EmbeddingRow> embed_states(const nn::OsfmModel& model, std::span<const EmbedInput> states,
                                       const TsneConfig& config) {
  const TsneResult t = tsne_embed(representation_matrix(model, states, config.seed), config);
  std::vector<EmbeddingRow> rows;
  rows.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const StateDatasetEntry& e = *states[i].entry;
    EmbeddingRow row;
    row.x = t.points(static_cast<Eigen::Index>(i), 0);
    row.y = t.points(static_cast<Eigen::Index>(i), 1);
    row.family = states[i].family;
    row.rank = e.stellar_rank;
    row.modes = e.num_modes;
    for (double x : e.xi) row.xi += x;
    if (!e.xi.empty()) row.xi /= static_cast<double>(e.xi.size());
    const auto w = e.params.find("top_weight");
    row.weight = w == e.params.end() ? 0.0 : w->second;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace statelab
