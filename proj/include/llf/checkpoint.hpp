#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "llf/dataset.hpp"
#include "llf/flows.hpp"
#include "llf/weak_signals.hpp"

namespace llf {

// Everything needed to reload a trained model and predict identically:
// flow layout, the feature conditioning transform, the label scaler for
// regression, and the run seed that owns the prediction RNG stream.
struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::optional<Standardizer> standardizer;
    std::optional<LabelScaler> scaler;
};

void save_checkpoint(const FlowModel& model, const CheckpointMeta& meta, const std::string& path);

struct LoadedCheckpoint {
    FlowModel model;
    CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace llf
