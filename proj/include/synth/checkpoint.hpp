#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "synth/gan.hpp"

namespace synth {

inline constexpr int kCheckpointVersion = 1;

nlohmann::json net_to_json(const DenseNet& net);
DenseNet net_from_json(const nlohmann::json& j);

// Versioned JSON checkpoint: schema, rules, both networks (row-major layer
// arrays at full precision), training seed and step counter.
void save_checkpoint(const GanModel& model, uint64_t seed, long step,
                     const std::string& path);

struct Checkpoint {
    GanModel model;
    uint64_t seed = 0;
    long step = 0;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace synth
