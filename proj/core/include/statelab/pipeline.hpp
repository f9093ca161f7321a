#pragma once

#include <span>
#include <string>
#include <vector>

#include "statelab/datasets.hpp"
#include "statelab/nn/heads.hpp"
#include "statelab/nn/osfm.hpp"

namespace statelab {

/// Label kind and dataset family a downstream task reads.
PropertyKind task_label_kind(const std::string& task);
Family task_family(const std::string& task);

/// All stored records of the entry as encoder input; N00N tasks append the
/// photon number as an extra head input.
nn::LabelledExample to_example(const StateDatasetEntry& entry, const std::string& task);
std::vector<nn::LabelledExample> to_examples(std::span<const StateDatasetEntry* const> entries,
                                             const std::string& task);

std::vector<nn::PretrainSample> to_pretrain_samples(std::span<const StateDatasetEntry* const> entries);

/// Pointers to every entry (Dataset::split selects one split).
std::vector<const StateDatasetEntry*> entry_pointers(const Dataset& dataset);

}  // namespace statelab
