#include "statelab/nn/checkpoint.hpp"

#include "statelab/container.hpp"
#include "statelab/error.hpp"

namespace statelab::nn {

namespace {

constexpr char kModelMagic[] = "SLMODEL\0";
constexpr char kFcnnMagic[] = "SLFCNN\0\0";

std::string magic(const char (&m)[9]) { return std::string(m, 8); }

}  // namespace

nlohmann::json to_json(const ModelDims& d) {
  return {{"bins", d.bins},           {"setting_hidden", d.setting_hidden}, {"hist_hidden", d.hist_hidden},
          {"trunk_hidden", d.trunk_hidden}, {"z_dim", d.z_dim},             {"latent_dim", d.latent_dim},
          {"latent_hidden", d.latent_hidden}, {"decoder_hidden", d.decoder_hidden}};
}

ModelDims model_dims_from_json(const nlohmann::json& j) {
  ModelDims d;
  d.bins = j.value("bins", d.bins);
  d.setting_hidden = j.value("setting_hidden", d.setting_hidden);
  d.hist_hidden = j.value("hist_hidden", d.hist_hidden);
  d.trunk_hidden = j.value("trunk_hidden", d.trunk_hidden);
  d.z_dim = j.value("z_dim", d.z_dim);
  d.latent_dim = j.value("latent_dim", d.latent_dim);
  d.latent_hidden = j.value("latent_hidden", d.latent_hidden);
  d.decoder_hidden = j.value("decoder_hidden", d.decoder_hidden);
  return d;
}

nlohmann::json to_json(const AdamConfig& c) {
  return {{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}

AdamConfig adam_config_from_json(const nlohmann::json& j) {
  AdamConfig c;
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"batch_states", c.batch_states},
          {"subsets_per_state", c.subsets_per_state},
          {"queries_per_subset", c.queries_per_subset},
          {"margin", c.margin},
          {"triplet_weight_max", c.triplet_weight_max},
          {"kl_weight", c.kl_weight},
          {"adam", to_json(c.adam)},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"dims", to_json(c.dims)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_states = j.value("batch_states", c.batch_states);
  c.subsets_per_state = j.value("subsets_per_state", c.subsets_per_state);
  c.queries_per_subset = j.value("queries_per_subset", c.queries_per_subset);
  c.margin = j.value("margin", c.margin);
  c.triplet_weight_max = j.value("triplet_weight_max", c.triplet_weight_max);
  c.kl_weight = j.value("kl_weight", c.kl_weight);
  if (j.contains("adam")) c.adam = adam_config_from_json(j.at("adam"));
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  if (j.contains("dims")) c.dims = model_dims_from_json(j.at("dims"));
  return c;
}

nlohmann::json to_json(const FinetuneConfig& c) {
  return {{"epochs", c.epochs},
          {"batch", c.batch},
          {"adam", to_json(c.adam)},
          {"encoder_lr_scale", c.encoder_lr_scale},
          {"freeze_encoder", c.freeze_encoder},
          {"seed", c.seed}};
}

FinetuneConfig finetune_config_from_json(const nlohmann::json& j) {
  FinetuneConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  if (j.contains("adam")) c.adam = adam_config_from_json(j.at("adam"));
  c.encoder_lr_scale = j.value("encoder_lr_scale", c.encoder_lr_scale);
  c.freeze_encoder = j.value("freeze_encoder", c.freeze_encoder);
  c.seed = j.value("seed", c.seed);
  return c;
}

bool Checkpoint::operator==(const Checkpoint& o) const {
  return model == o.model && to_json(config) == to_json(o.config) && adam.step == o.adam.step &&
         adam.m == o.adam.m && adam.v == o.adam.v && epochs_done == o.epochs_done && metadata == o.metadata;
}

namespace {

void put_params(TensorContainer& c, std::vector<ParamRef> params) {
  for (const auto& p : params) {
    c.put(p.name, Eigen::Map<const Eigen::MatrixXd>(p.data, p.rows, p.cols));
  }
}

void get_params(const TensorContainer& c, std::vector<ParamRef> params) {
  for (const auto& p : params) {
    const Eigen::MatrixXd& t = c.get(p.name);
    if (t.rows() != p.rows || t.cols() != p.cols) throw IoError("checkpoint: shape mismatch for " + p.name);
    Eigen::Map<Eigen::MatrixXd>(p.data, p.rows, p.cols) = t;
  }
}

nlohmann::json head_json(const TaskHead& h) {
  return {{"dims", h.net.dims()},
          {"classification", h.classification},
          {"extra_inputs", h.extra_inputs},
          {"output", h.net.output_activation() == Activation::kRelu ? "relu" : "linear"}};
}

TaskHead head_from_json(const nlohmann::json& j) {
  Rng rng(0);
  TaskHead h;
  h.net = Mlp(j.at("dims").get<std::vector<int>>(),
              j.at("output").get<std::string>() == "relu" ? Activation::kRelu : Activation::kLinear, rng);
  h.classification = j.at("classification").get<bool>();
  h.extra_inputs = j.at("extra_inputs").get<int>();
  return h;
}

Eigen::MatrixXd scaler_tensor(const MinMaxScaler& s) {
  Eigen::MatrixXd t(2, 1);
  t << s.lo, s.hi;
  return t;
}

/// Mean and scale as the two columns; an empty scaler is stored as 0 x 2.
Eigen::MatrixXd inputs_tensor(const FeatureScaler& s) {
  Eigen::MatrixXd t(s.mean.size(), 2);
  if (!s.empty()) t << s.mean, s.scale;
  return t;
}

FeatureScaler inputs_from_tensor(const Eigen::MatrixXd& t) {
  FeatureScaler s;
  if (t.rows() > 0) {
    if (t.cols() != 2) throw IoError("checkpoint: malformed input scaler");
    s.mean = t.col(0);
    s.scale = t.col(1);
  }
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  TensorContainer c;
  OsfmModel model = ckpt.model;
  c.header["dims"] = to_json(model.dims);
  c.header["train_config"] = to_json(ckpt.config);
  c.header["epochs_done"] = ckpt.epochs_done;
  c.header["metadata"] = ckpt.metadata;
  c.header["heads"] = nlohmann::json::object();
  for (const auto& [task, head] : model.heads) c.header["heads"][task] = head_json(head);
  c.header["adam_step"] = ckpt.adam.step;
  c.header["adam_tensors"] = ckpt.adam.m.size();
  put_params(c, model.all_parameters());
  for (const auto& [task, head] : model.heads) {
    c.put("scaler." + task, scaler_tensor(head.scaler));
    c.put("inputs." + task, inputs_tensor(head.inputs));
  }
  for (std::size_t i = 0; i < ckpt.adam.m.size(); ++i) {
    c.put("adam.m." + std::to_string(i), ckpt.adam.m[i]);
    c.put("adam.v." + std::to_string(i), ckpt.adam.v[i]);
  }
  write_container(path, magic(kModelMagic), kCheckpointVersion, c);
}

Checkpoint load_checkpoint(const std::string& path) {
  const TensorContainer c = read_container(path, magic(kModelMagic), kCheckpointVersion);
  Checkpoint ckpt;
  try {
    ckpt.model = OsfmModel::create(model_dims_from_json(c.header.at("dims")), 0);
    for (const auto& [task, j] : c.header.at("heads").items()) ckpt.model.heads[task] = head_from_json(j);
    ckpt.config = train_config_from_json(c.header.at("train_config"));
    ckpt.epochs_done = c.header.at("epochs_done").get<int>();
    ckpt.metadata = c.header.at("metadata");
    ckpt.adam.step = c.header.at("adam_step").get<std::int64_t>();
    const auto n_adam = c.header.at("adam_tensors").get<std::size_t>();
    for (std::size_t i = 0; i < n_adam; ++i) {
      ckpt.adam.m.push_back(c.get("adam.m." + std::to_string(i)).col(0));
      ckpt.adam.v.push_back(c.get("adam.v." + std::to_string(i)).col(0));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path + "': malformed checkpoint header: " + e.what());
  }
  get_params(c, ckpt.model.all_parameters());
  for (auto& [task, head] : ckpt.model.heads) {
    const Eigen::MatrixXd& s = c.get("scaler." + task);
    head.scaler = {s(0, 0), s(1, 0)};
    head.inputs = inputs_from_tensor(c.get("inputs." + task));
  }
  return ckpt;
}

void save_fcnn(const std::string& path, const FcnnBaseline& model, const nlohmann::json& metadata) {
  TensorContainer c;
  c.header["task"] = model.task;
  c.header["head"] = head_json(model.head);
  c.header["metadata"] = metadata.is_null() ? nlohmann::json::object() : metadata;
  FcnnBaseline copy = model;
  std::vector<ParamRef> p;
  copy.head.net.append_parameters("fcnn", p);
  put_params(c, p);
  c.put("scaler", scaler_tensor(model.head.scaler));
  c.put("inputs", inputs_tensor(model.head.inputs));
  write_container(path, magic(kFcnnMagic), kCheckpointVersion, c);
}

FcnnBaseline load_fcnn(const std::string& path, nlohmann::json* metadata) {
  const TensorContainer c = read_container(path, magic(kFcnnMagic), kCheckpointVersion);
  FcnnBaseline model;
  try {
    model.task = c.header.at("task").get<std::string>();
    model.head = head_from_json(c.header.at("head"));
    if (metadata != nullptr) *metadata = c.header.at("metadata");
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path + "': malformed header: " + e.what());
  }
  std::vector<ParamRef> p;
  model.head.net.append_parameters("fcnn", p);
  get_params(c, p);
  const Eigen::MatrixXd& s = c.get("scaler");
  model.head.scaler = {s(0, 0), s(1, 0)};
  model.head.inputs = inputs_from_tensor(c.get("inputs"));
  return model;
}

}  // namespace statelab::nn
