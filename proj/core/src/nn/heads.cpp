#include "statelab/nn/heads.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "statelab/error.hpp"

namespace statelab::nn {

TaskInfo task_info(const std::string& task) {
  if (task == "negativity") return {task, "negativity", true, {8, 4}, 0};
  if (task == "noon:purity" || task == "noon:fidelity") return {task, "noon", false, {16}, 1};
  if (task == "cat:size" || task == "cat:fidelity") return {task, "cat", false, {16}, 0};
  if (task == "squeezed:qfi" || task == "squeezed:fidelity") return {task, "squeezed", false, {16}, 0};
  throw ValidationError("unknown task '" + task + "'");
}

std::vector<std::string> known_tasks() {
  return {"negativity", "noon:purity", "noon:fidelity", "cat:size", "cat:fidelity", "squeezed:qfi",
          "squeezed:fidelity"};
}

namespace {

/// Loss of scalar outputs y against labels; dy receives dL/dy.
double scalar_loss(const Eigen::RowVectorXd& y, const Eigen::RowVectorXd& target, bool classification,
                   Eigen::RowVectorXd* dy) {
  const double inv = 1.0 / static_cast<double>(y.size());
  double loss = 0.0;
  if (dy != nullptr) dy->resize(y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    if (classification) {
      // BCE on logits: softplus(y) - t y.
      const double softplus = std::max(y(j), 0.0) + std::log1p(std::exp(-std::abs(y(j))));
      loss += (softplus - target(j) * y(j)) * inv;
      if (dy != nullptr) (*dy)(j) = (1.0 / (1.0 + std::exp(-y(j))) - target(j)) * inv;
    } else {
      const double e = y(j) - target(j);
      loss += e * e * inv;
      if (dy != nullptr) (*dy)(j) = 2.0 * e * inv;
    }
  }
  return loss;
}

Eigen::RowVectorXd scaled_targets(const TaskHead& head, std::span<const LabelledExample> batch) {
  Eigen::RowVectorXd t(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    t(j) = head.classification ? batch[j].label : head.scaler.transform(batch[j].label);
  }
  return t;
}

void check_extra(const TaskHead& head, const std::string& task, std::span<const double> extra) {
  if (static_cast<int>(extra.size()) != head.extra_inputs) {
    throw ValidationError("task '" + task + "' expects " + std::to_string(head.extra_inputs) +
                          " extra inputs, got " + std::to_string(extra.size()));
  }
}

const TaskHead& find_head(const OsfmModel& model, const std::string& task) {
  auto it = model.heads.find(task);
  if (it == model.heads.end()) throw ValidationError("model has no head for task '" + task + "'");
  return it->second;
}

Eigen::MatrixXd head_inputs(const Eigen::MatrixXd& z, const TaskHead& head, const std::string& task,
                            std::span<const LabelledExample> batch) {
  Eigen::MatrixXd x(z.rows() + head.extra_inputs, z.cols());
  x.topRows(z.rows()) = z;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    check_extra(head, task, batch[j].extra);
    for (int e = 0; e < head.extra_inputs; ++e) x(z.rows() + e, j) = batch[j].extra[e];
  }
  return x;
}

double sigmoid(double y) { return 1.0 / (1.0 + std::exp(-y)); }

}  // namespace

void add_head(OsfmModel& model, const std::string& task, std::span<const double> labels, std::uint64_t seed) {
  const TaskInfo info = task_info(task);
  Rng rng(seed);
  std::vector<int> dims{model.dims.z_dim + info.extra_inputs};
  dims.insert(dims.end(), info.hidden.begin(), info.hidden.end());
  dims.push_back(1);
  TaskHead head;
  head.net = Mlp(dims, Activation::kLinear, rng);
  head.classification = info.classification;
  head.extra_inputs = info.extra_inputs;
  if (!info.classification) head.scaler = MinMaxScaler::fit(labels);
  model.heads[task] = std::move(head);
}

double finetune_objective(const OsfmModel& model, const std::string& task, std::span<const LabelledExample> batch,
                          OsfmModel* grads) {
  if (batch.empty()) throw ValidationError("finetune: empty batch");
  const TaskHead& head = find_head(model, task);
  std::vector<const RecordBatch*> sets;
  for (const auto& ex : batch) sets.push_back(&ex.records);
  const EncoderPass pass = encode_sets(model, sets);
  Eigen::MatrixXd x = head_inputs(pass.z, head, task, batch);
  head.inputs.apply(x);
  Mlp::Cache cache;
  const Eigen::RowVectorXd y = head.net.forward(x, cache).row(0);
  Eigen::RowVectorXd dy;
  const double loss = scalar_loss(y, scaled_targets(head, batch), head.classification, grads ? &dy : nullptr);
  if (grads != nullptr) {
    Eigen::MatrixXd dx = head.net.backward(cache, dy, grads->heads.at(task).net);
    if (!head.inputs.empty()) dx.array().colwise() /= head.inputs.scale.array();
    encode_sets_backward(model, pass, dx.topRows(model.dims.z_dim), *grads);
  }
  return loss;
}

void fit_head_inputs(OsfmModel& model, const std::string& task, std::span<const LabelledExample> data) {
  if (data.empty()) throw ValidationError("fit_head_inputs: no examples");
  TaskHead& head = model.heads.at(task);
  head.inputs = {};
  std::vector<const RecordBatch*> sets;
  for (const auto& ex : data) sets.push_back(&ex.records);
  const EncoderPass pass = encode_sets(model, sets);
  head.inputs = FeatureScaler::fit(head_inputs(pass.z, head, task, data));
}

std::vector<FinetuneLog> finetune(OsfmModel& model, const std::string& task, std::span<const LabelledExample> data,
                                  const FinetuneConfig& config) {
  if (data.empty()) throw ValidationError("finetune: no labelled examples");
  const TaskInfo info = task_info(task);
  for (const auto& ex : data) {
    if (static_cast<int>(ex.extra.size()) != info.extra_inputs) {
      throw ValidationError("finetune: label/feature count mismatch for task '" + task + "'");
    }
  }
  if (!model.heads.contains(task)) {
    std::vector<double> labels;
    for (const auto& ex : data) labels.push_back(ex.label);
    add_head(model, task, labels, mix_seed(config.seed, 0x4ead));
    fit_head_inputs(model, task, data);
  }
  if (!(config.encoder_lr_scale > 0.0)) throw ValidationError("finetune: encoder_lr_scale must be positive");
  AdamConfig encoder_adam = config.adam;
  encoder_adam.lr *= config.encoder_lr_scale;
  AdamState head_state;
  AdamState encoder_state;
  std::vector<FinetuneLog> logs;
  const auto n = data.size();
  const auto batch = static_cast<std::size_t>(std::max(1, config.batch));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch) + 1));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    FinetuneLog log{epoch, 0.0};
    for (std::size_t lo = 0; lo < n; lo += batch) {
      std::vector<LabelledExample> mb;
      for (std::size_t k = lo; k < std::min(n, lo + batch); ++k) mb.push_back(data[order[k]]);
      OsfmModel grads = model.zeros_like();
      const double loss = finetune_objective(model, task, mb, &grads);
      if (!std::isfinite(loss)) throw NumericalError("finetune: non-finite loss at epoch " + std::to_string(epoch));
      log.loss += loss * static_cast<double>(mb.size()) / static_cast<double>(n);
      adam_step(model.head_parameters(task), grads.head_parameters(task), head_state, config.adam);
      if (!config.freeze_encoder) {
        adam_step(model.encoder_parameters(), grads.encoder_parameters(), encoder_state, encoder_adam);
      }
    }
    logs.push_back(log);
  }
  return logs;
}

double predict_property(const OsfmModel& model, const std::string& task, const RecordBatch& records,
                        std::span<const double> extra) {
  const TaskHead& head = find_head(model, task);
  check_extra(head, task, extra);
  const Eigen::VectorXd z = encode_representation(model, records);
  Eigen::MatrixXd x(z.size() + head.extra_inputs, 1);
  x.col(0).head(z.size()) = z;
  for (int e = 0; e < head.extra_inputs; ++e) x(z.size() + e, 0) = extra[e];
  head.inputs.apply(x);
  const double y = head.net.forward(x)(0, 0);
  return head.classification ? sigmoid(y) : head.scaler.inverse(y);
}

std::vector<double> predict_batch(const OsfmModel& model, const std::string& task,
                                  std::span<const LabelledExample> data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(predict_property(model, task, ex.records, ex.extra));
  return out;
}

Eigen::VectorXd fcnn_features(const LabelledExample& example) {
  const Eigen::MatrixXd& h = example.records.histograms;
  Eigen::VectorXd f(h.size() + static_cast<Eigen::Index>(example.extra.size()));
  f.head(h.size()) = Eigen::Map<const Eigen::VectorXd>(h.data(), h.size());
  for (std::size_t e = 0; e < example.extra.size(); ++e) f(h.size() + e) = example.extra[e];
  return f;
}

namespace {

Eigen::MatrixXd fcnn_inputs(const FcnnBaseline& model, std::span<const LabelledExample> batch) {
  Eigen::MatrixXd x(model.head.net.input_dim(), batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Eigen::VectorXd f = fcnn_features(batch[j]);
    if (f.size() != x.rows()) {
      throw ValidationError("fcnn: example " + std::to_string(j) + " has " + std::to_string(f.size()) +
                            " features, expected " + std::to_string(x.rows()));
    }
    x.col(j) = f;
  }
  model.head.inputs.apply(x);
  return x;
}

}  // namespace

double fcnn_objective(const FcnnBaseline& model, std::span<const LabelledExample> batch, FcnnBaseline* grads) {
  if (batch.empty()) throw ValidationError("fcnn: empty batch");
  Mlp::Cache cache;
  const Eigen::RowVectorXd y = model.head.net.forward(fcnn_inputs(model, batch), cache).row(0);
  Eigen::RowVectorXd dy;
  const double loss =
      scalar_loss(y, scaled_targets(model.head, batch), model.head.classification, grads ? &dy : nullptr);
  if (grads != nullptr) model.head.net.backward(cache, dy, grads->head.net);
  return loss;
}

FcnnBaseline train_fcnn(const std::string& task, std::span<const LabelledExample> data,
                        const FinetuneConfig& config) {
  if (data.empty()) throw ValidationError("fcnn: no labelled examples");
  const TaskInfo info = task_info(task);
  const auto in = static_cast<int>(fcnn_features(data.front()).size());
  Rng rng(mix_seed(config.seed, 0xfc));
  FcnnBaseline model;
  model.task = task;
  model.head.net = Mlp({in, 64, 32, 1}, Activation::kLinear, rng);
  model.head.classification = info.classification;
  model.head.extra_inputs = info.extra_inputs;
  if (!info.classification) {
    std::vector<double> labels;
    for (const auto& ex : data) labels.push_back(ex.label);
    model.head.scaler = MinMaxScaler::fit(labels);
  }
  model.head.inputs = FeatureScaler::fit(fcnn_inputs(model, data));
  AdamState adam;
  const auto n = data.size();
  const auto batch = static_cast<std::size_t>(std::max(1, config.batch));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng erng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch) + 1));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), erng.engine());
    for (std::size_t lo = 0; lo < n; lo += batch) {
      std::vector<LabelledExample> mb;
      for (std::size_t k = lo; k < std::min(n, lo + batch); ++k) mb.push_back(data[order[k]]);
      FcnnBaseline grads = model;
      grads.head.net = model.head.net.zeros_like();
      const double loss = fcnn_objective(model, mb, &grads);
      if (!std::isfinite(loss)) throw NumericalError("fcnn: non-finite loss at epoch " + std::to_string(epoch));
      std::vector<ParamRef> p;
      std::vector<ParamRef> g;
      model.head.net.append_parameters("fcnn", p);
      grads.head.net.append_parameters("fcnn", g);
      adam_step(p, g, adam, config.adam);
    }
  }
  return model;
}

std::vector<double> fcnn_predict(const FcnnBaseline& model, std::span<const LabelledExample> data) {
  if (data.empty()) return {};
  const Eigen::RowVectorXd y = model.head.net.forward(fcnn_inputs(model, data)).row(0);
  std::vector<double> out(data.size());
  for (std::size_t j = 0; j < data.size(); ++j) {
    out[j] = model.head.classification ? sigmoid(y(j)) : model.head.scaler.inverse(y(j));
  }
  return out;
}

}  // namespace statelab::nn
