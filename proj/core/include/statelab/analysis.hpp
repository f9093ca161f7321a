#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "statelab/datasets.hpp"
#include "statelab/nn/osfm.hpp"

namespace statelab {

/// 1 - SS_res / SS_tot. Throws on empty or mismatched input or constant truth.
double r_squared(std::span<const double> pred, std::span<const double> truth);

struct ClassificationMetrics {
  double accuracy = 0.0;
  int true_positive = 0;
  int true_negative = 0;
  int false_positive = 0;
  int false_negative = 0;

  int total() const { return true_positive + true_negative + false_positive + false_negative; }
};

/// Predicted class is prob >= threshold; labels are 0/1.
ClassificationMetrics classification_metrics(std::span<const double> prob, std::span<const double> labels,
                                             double threshold = 0.5);

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double learning_rate = 200.0;
  std::uint64_t seed = 0;
};

struct TsneResult {
  Eigen::MatrixXd points;  // N x 2
  double initial_kl = 0.0;
  double final_kl = 0.0;
};

/// Exact O(N^2) t-SNE on the rows of `data`. Throws for N > 5000,
/// perplexity >= N/3 or identical inputs.
TsneResult tsne_embed(const Eigen::MatrixXd& data, const TsneConfig& config = {});

/// Mean silhouette coefficient of the rows of `points` under `labels`
/// (Euclidean). Needs at least two clusters.
double silhouette_score(const Eigen::MatrixXd& points, std::span<const int> labels);

/// Predicted histograms for `queries` given the context records of a state.
using MarginalPredictor = std::function<std::vector<Histogram>(
    const StateDatasetEntry& entry, std::span<const HomodyneRecord> context,
    std::span<const HomodyneSetting> queries)>;

/// Encodes the context and decodes every query with the latent at its prior mean.
MarginalPredictor model_predictor(const nn::OsfmModel& model);

struct BucketKey {
  bool ood = false;
  int rank = 0;
  int modes = 1;
  int xi_band = 0;  // floor(mean xi / band width)

  auto operator<=>(const BucketKey&) const = default;
};

struct BucketStats {
  double mean_fidelity = 0.0;
  int count = 0;
};

struct ReportOptions {
  std::uint64_t seed = 0;
  double xi_band_width = 0.05;
};

struct EvalReport {
  double xi_band_width = 0.05;
  std::map<BucketKey, BucketStats> buckets;
  std::map<std::pair<bool, int>, BucketStats> by_rank;   // (ood, r)
  std::map<std::pair<bool, int>, BucketStats> by_modes;  // (ood, m)
  std::vector<double> id_fidelity;   // per state, input order
  std::vector<double> ood_fidelity;
  bool rank_non_increasing = true;   // over the ID ranks
  bool modes_non_increasing = true;  // over the ID mode counts

  BucketStats pooled(bool ood) const;
  /// kind,split,r,m,xi_lo,xi_hi,count,value rows: buckets, per-rank and
  /// per-mode summaries, then trend rows.
  std::string to_csv() const;
};

/// Mean query classical fidelity per state, bucketed by (ID/OOD, r, m, xi band).
/// Every state gets a fresh context/query split of the 100-phase table.
EvalReport fidelity_report(const MarginalPredictor& predictor,
                           std::span<const StateDatasetEntry* const> id,
                           std::span<const StateDatasetEntry* const> ood,
                           const ReportOptions& options = {});

struct EmbeddingRow {
  double x = 0.0;
  double y = 0.0;
  std::string family;
  int rank = 0;
  int modes = 1;
  double xi = 0.0;
  double weight = 0.0;  // max top-rank weight where defined
};

std::string embedding_csv(std::span<const EmbeddingRow> rows);

/// Context records of a state: a sampled pretraining context for entries
/// holding the full phase table, all stored records otherwise.
std::vector<HomodyneRecord> context_records(const StateDatasetEntry& entry, std::uint64_t seed);

struct EmbedInput {
  const StateDatasetEntry* entry = nullptr;
  std::string family;
};

/// Rows of encode_representation over each state's context (seeded per index).
Eigen::MatrixXd representation_matrix(const nn::OsfmModel& model, std::span<const EmbedInput> states,
                                      std::uint64_t seed);

/// t-SNE of the representations with per-state metadata, in input order.
std::vector<EmbeddingRow> embed_states(const nn::OsfmModel& model, std::span<const EmbedInput> states,
                                       const TsneConfig& config);

/// Writes `text` to `path`; throws IoError on failure.
void write_text(const std::string& path, const std::string& text);

}  // namespace statelab
