#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "statelab/nn/mlp.hpp"
#include "statelab/nn/osfm.hpp"

namespace statelab::nn {

/// Known downstream tasks: "negativity", "noon:purity", "noon:fidelity",
/// "cat:size", "cat:fidelity", "squeezed:qfi", "squeezed:fidelity".
struct TaskInfo {
  std::string id;
  std::string family;
  bool classification = false;
  std::vector<int> hidden;
  int extra_inputs = 0;
};

/// Throws ValidationError for an unknown task id.
TaskInfo task_info(const std::string& task);
std::vector<std::string> known_tasks();

struct LabelledExample {
  RecordBatch records;
  std::vector<double> extra;  // appended to z, e.g. the photon number N
  double label = 0.0;
};

struct FinetuneConfig {
  int epochs = 200;
  int batch = 32;
  AdamConfig adam;
  double encoder_lr_scale = 0.1;  // encoder step size relative to adam.lr
  bool freeze_encoder = false;
  std::uint64_t seed = 0;
};

struct FinetuneLog {
  int epoch = 0;
  double loss = 0.0;
};

/// Adds (or replaces) a freshly initialized head for `task`. A regression
/// head stores the min-max scaler fitted on `labels`.
void add_head(OsfmModel& model, const std::string& task, std::span<const double> labels, std::uint64_t seed);

/// Fits the head's input standardization on the representations (plus extra
/// inputs) of `data` under the current encoder.
void fit_head_inputs(OsfmModel& model, const std::string& task, std::span<const LabelledExample> data);

/// Mean BCE (classification) or MSE on scaled targets (regression), with
/// gradients added to `grads` if given.
double finetune_objective(const OsfmModel& model, const std::string& task,
                          std::span<const LabelledExample> batch, OsfmModel* grads);

/// Creates the head (with fitted input standardization) if missing, then trains encoder and head (head only with
/// freeze_encoder) with Adam.
std::vector<FinetuneLog> finetune(OsfmModel& model, const std::string& task,
                                  std::span<const LabelledExample> data, const FinetuneConfig& config);

/// Class probability for classification tasks, inverse-scaled value otherwise.
double predict_property(const OsfmModel& model, const std::string& task, const RecordBatch& records,
                        std::span<const double> extra = {});
std::vector<double> predict_batch(const OsfmModel& model, const std::string& task,
                                  std::span<const LabelledExample> data);

/// Fully connected network on the raw concatenated histograms (plus extra
/// inputs), standardized per feature: in -> 64 -> 32 -> 1.
struct FcnnBaseline {
  std::string task;
  TaskHead head;

  bool operator==(const FcnnBaseline&) const = default;
};

Eigen::VectorXd fcnn_features(const LabelledExample& example);
double fcnn_objective(const FcnnBaseline& model, std::span<const LabelledExample> batch, FcnnBaseline* grads);
FcnnBaseline train_fcnn(const std::string& task, std::span<const LabelledExample> data,
                        const FinetuneConfig& config);
std::vector<double> fcnn_predict(const FcnnBaseline& model, std::span<const LabelledExample> data);

}  // namespace statelab::nn
