#pragma once

#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "statelab/nn/heads.hpp"
#include "statelab/nn/osfm.hpp"

namespace statelab::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json to_json(const ModelDims& d);
ModelDims model_dims_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AdamConfig& c);
AdamConfig adam_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FinetuneConfig& c);
FinetuneConfig finetune_config_from_json(const nlohmann::json& j);

struct Checkpoint {
  OsfmModel model;
  TrainConfig config;
  AdamState adam;  // empty when no pretraining optimizer state is kept
  int epochs_done = 0;
  nlohmann::json metadata = nlohmann::json::object();

  bool operator==(const Checkpoint&) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

void save_fcnn(const std::string& path, const FcnnBaseline& model, const nlohmann::json& metadata = {});
FcnnBaseline load_fcnn(const std::string& path, nlohmann::json* metadata = nullptr);

}  // namespace statelab::nn
