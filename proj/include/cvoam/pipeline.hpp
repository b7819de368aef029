#pragma once

#include <string>
#include <vector>

#include "cvoam/network.hpp"

namespace cvoam {

// segment_corpus + melspec, grouped per utterance for sentence batching.
// Labels are inventory consonant indices.
std::vector<TrainUtterance> featurize_manifest(const Manifest& manifest,
                                               const PhoneInventory& inventory, int window_ms,
                                               const MelParams& mel,
                                               const std::string& tier_name = "phones");

EvalResult evaluate_manifest(const ModelParams& params, const Manifest& manifest,
                             const std::string& tier_name = "phones");

}  // namespace cvoam
