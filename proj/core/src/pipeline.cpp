#include "statelab/pipeline.hpp"

#include "statelab/error.hpp"

namespace statelab {

PropertyKind task_label_kind(const std::string& task) {
  if (task == "negativity") return PropertyKind::kNegativityClass;
  if (task == "noon:purity") return PropertyKind::kPurity;
  if (task == "cat:size") return PropertyKind::kCatSize;
  if (task == "squeezed:qfi") return PropertyKind::kQfi;
  if (task == "noon:fidelity" || task == "cat:fidelity" || task == "squeezed:fidelity") {
    return PropertyKind::kFidelity;
  }
  throw ValidationError("unknown task '" + task + "'");
}

Family task_family(const std::string& task) { return parse_family(nn::task_info(task).family); }

nn::LabelledExample to_example(const StateDatasetEntry& entry, const std::string& task) {
  const nn::TaskInfo info = nn::task_info(task);
  nn::LabelledExample ex;
  ex.records = nn::to_record_batch(entry.records, entry.num_modes);
  if (info.extra_inputs > 0) ex.extra = {entry.param("photons")};
  ex.label = entry.label(task_label_kind(task));
  return ex;
}

std::vector<nn::LabelledExample> to_examples(std::span<const StateDatasetEntry* const> entries,
                                             const std::string& task) {
  std::vector<nn::LabelledExample> out;
  out.reserve(entries.size());
  for (const auto* e : entries) out.push_back(to_example(*e, task));
  return out;
}

std::vector<nn::PretrainSample> to_pretrain_samples(std::span<const StateDatasetEntry* const> entries) {
  std::vector<nn::PretrainSample> out;
  out.reserve(entries.size());
  for (const auto* e : entries) {
    if (static_cast<int>(e->records.size()) != e->num_modes * kPhasesPerMode) {
      throw ValidationError("pretraining needs the full phase table of every state");
    }
    out.push_back({e->num_modes, e->records});
  }
  return out;
}

std::vector<const StateDatasetEntry*> entry_pointers(const Dataset& dataset) {
  std::vector<const StateDatasetEntry*> out;
  for (const auto& e : dataset.entries) out.push_back(&e);
  return out;
}

}  // namespace statelab
