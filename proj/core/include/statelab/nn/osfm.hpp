#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "statelab/homodyne.hpp"
#include "statelab/nn/mlp.hpp"
#include "statelab/rng.hpp"

namespace statelab::nn {

struct ModelDims {
  int bins = kHistogramBins;
  int setting_hidden = 32;
  int hist_hidden = 32;
  int trunk_hidden = 32;
  int z_dim = 32;
  int latent_dim = 8;
  int latent_hidden = 64;
  int decoder_hidden = 128;

  bool operator==(const ModelDims&) const = default;
};

inline constexpr int kSettingDim = 2;

/// Min-max scaling of regression targets onto [0, 1].
struct MinMaxScaler {
  double lo = 0.0;
  double hi = 1.0;

  static MinMaxScaler fit(std::span<const double> values);
  double transform(double v) const;
  double inverse(double v) const;
  bool operator==(const MinMaxScaler&) const = default;
};

/// Per-feature standardization (x - mean) / scale of head inputs, fitted on
/// the training set. Empty vectors mean identity.
struct FeatureScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  /// Features are rows of `x`. Constant features keep scale 1.
  static FeatureScaler fit(const Eigen::MatrixXd& x);
  bool empty() const { return mean.size() == 0; }
  void apply(Eigen::MatrixXd& x) const;
  bool operator==(const FeatureScaler& o) const;
};

/// Prediction head D_k together with what it needs at inference time.
struct TaskHead {
  Mlp net;
  bool classification = false;
  int extra_inputs = 0;
  MinMaxScaler scaler;
  FeatureScaler inputs;

  bool operator==(const TaskHead&) const = default;
};

/// Settings (2 x n) and histograms (bins x n) of a set of records.
struct RecordBatch {
  Eigen::MatrixXd settings;
  Eigen::MatrixXd histograms;

  Eigen::Index size() const { return settings.cols(); }
};

/// (mode / m, theta / pi).
Eigen::Vector2d encode_setting(const HomodyneSetting& setting, int num_modes);
RecordBatch to_record_batch(std::span<const HomodyneRecord> records, int num_modes);

struct OsfmModel {
  ModelDims dims;
  Mlp enc_setting;  // 2 -> setting_hidden, rectified
  Mlp enc_hist;     // bins -> hist_hidden, rectified
  Mlp enc_trunk;    // setting_hidden + hist_hidden -> trunk_hidden -> z_dim
  Mlp prior;        // z + 2 -> latent_hidden -> (mu, log var)
  Mlp posterior;    // z + 2 + bins -> latent_hidden -> (mu, log var)
  Mlp decoder;      // z + 2 + latent -> hidden -> hidden -> bins logits
  std::map<std::string, TaskHead> heads;

  static OsfmModel create(const ModelDims& dims, std::uint64_t seed);
  OsfmModel zeros_like() const;

  std::vector<ParamRef> encoder_parameters();
  std::vector<ParamRef> generator_parameters();
  /// Encoder followed by generator tensors.
  std::vector<ParamRef> pretrain_parameters();
  std::vector<ParamRef> head_parameters(const std::string& task);
  /// Everything, heads in task order.
  std::vector<ParamRef> all_parameters();

  bool operator==(const OsfmModel&) const = default;
};

/// Forward state of the encoder over several record sets at once.
struct EncoderPass {
  Mlp::Cache setting_cache;
  Mlp::Cache hist_cache;
  Mlp::Cache trunk_cache;
  std::vector<Eigen::Index> offsets;  // record set k owns columns [offsets[k], offsets[k+1])
  Eigen::MatrixXd z;                  // z_dim x sets
};

EncoderPass encode_sets(const OsfmModel& model, std::span<const RecordBatch* const> sets);
/// Propagates dL/dz (z_dim x sets) into the encoder gradients.
void encode_sets_backward(const OsfmModel& model, const EncoderPass& pass, const Eigen::MatrixXd& dz,
                          OsfmModel& grads);

/// z = mean of the per-record encodings. Throws on an empty record set.
Eigen::VectorXd encode_representation(const OsfmModel& model, const RecordBatch& records);
Eigen::VectorXd encode_representation(const OsfmModel& model, std::span<const HomodyneRecord> records,
                                      int num_modes);

enum class GenerateMode { kMean, kSample };

/// Decoded 50-bin distribution for a query setting. kSample draws the latent
/// from the prior using `rng`; kMean uses the prior mean.
Eigen::VectorXd generate_distribution(const OsfmModel& model, const Eigen::VectorXd& z,
                                      const Eigen::Vector2d& setting, GenerateMode mode,
                                      Rng* rng = nullptr);
Histogram generate_marginal(const OsfmModel& model, const Eigen::VectorXd& z,
                            const HomodyneSetting& setting, int num_modes,
                            GenerateMode mode = GenerateMode::kMean, Rng* rng = nullptr);

double triplet_loss(const Eigen::VectorXd& za, const Eigen::VectorXd& zp, const Eigen::VectorXd& zn,
                    double margin);

struct Triplet {
  int anchor = 0;
  int positive = 0;
  int negative = 0;

  bool operator==(const Triplet&) const = default;
};

/// Every column is an anchor; the farthest same-label column is its positive
/// and the nearest other-label column its negative, ties to the lowest index.
/// Anchors without a positive or a negative are skipped.
std::vector<Triplet> mine_hard_triplets(const Eigen::MatrixXd& z, std::span<const int> labels);

struct TrainConfig {
  int batch_states = 16;
  int subsets_per_state = 2;
  int queries_per_subset = 16;
  double margin = 1.0;
  double triplet_weight_max = 0.2;
  double kl_weight = 0.01;
  AdamConfig adam;
  int epochs = 200;
  std::uint64_t seed = 0;
  ModelDims dims;
};

/// lambda(t), linear from 0 at step 0 to triplet_weight_max at the final step.
double triplet_weight(const TrainConfig& config, std::int64_t step, std::int64_t total_steps);

/// One context subset of one state together with its query targets.
struct PretrainItem {
  int state = 0;
  RecordBatch context;
  RecordBatch query;
};

struct LossWeights {
  double recon = 1.0;
  double kl = 0.0;
  double triplet = 0.0;
};

struct LossBreakdown {
  double recon = 0.0;
  double kl = 0.0;
  double triplet = 0.0;
  double triplet_weight = 0.0;
  double total = 0.0;
};

/// Mean cross-entropy over all queries + kl * mean KL(q || p) + triplet *
/// mean hard-triplet hinge. `noise` (latent_dim x total queries) drives the
/// reparameterized posterior sample. Gradients are added to `grads` if given.
LossBreakdown pretrain_objective(const OsfmModel& model, std::span<const PretrainItem> items,
                                 const LossWeights& weights, double margin,
                                 const Eigen::MatrixXd& noise, OsfmModel* grads);

/// A state's full measurement table in stage_settings order.
struct PretrainSample {
  int num_modes = 1;
  std::vector<HomodyneRecord> records;
};

/// Draws K context/query splits for each listed state.
std::vector<PretrainItem> sample_pretrain_items(std::span<const PretrainSample> data,
                                                std::span<const int> states, const TrainConfig& config,
                                                Rng& rng);

/// One Adam step on a batch. Throws NumericalError if the loss is not finite.
LossBreakdown pretrain_step(OsfmModel& model, AdamState& adam, std::span<const PretrainItem> items,
                            const TrainConfig& config, double lambda, Rng& rng);

struct EpochLog {
  int epoch = 0;
  double recon = 0.0;
  double kl = 0.0;
  double triplet = 0.0;
  double lambda_start = 0.0;  // lambda(t) at the first step of the epoch
  double lambda_end = 0.0;    // and at its last step
  double total = 0.0;
};

/// Runs epochs [first_epoch, config.epochs). Every epoch reseeds from
/// (config.seed, epoch), so resuming from a saved model and optimizer state
/// reproduces an uninterrupted run.
std::vector<EpochLog> pretrain(OsfmModel& model, AdamState& adam, std::span<const PretrainSample> data,
                               const TrainConfig& config, int first_epoch = 0,
                               const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace statelab::nn
