#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bcx/datagen.hpp"
#include "bcx/model.hpp"
#include "bcx/traineval.hpp"

namespace bcx {

// Settings shared by the evaluation sweeps.
struct SweepConfig {
    std::vector<int> train_sizes{64, 256, 512};
    std::vector<double> noise_ratios{0.0, 0.01, 0.05, 0.1};
    std::vector<int> boundary_strides{1, 2};
    std::uint64_t noise_seed = 1;
};

struct RunConfig {
    DatasetConfig dataset;
    ModelConfig model;
    TrainConfig train;
    SweepConfig sweep;
};

json to_json(const SweepConfig& c);
json to_json(const RunConfig& c);

// Missing keys take defaults; unknown keys, type mismatches and violated
// constraints throw ConfigError naming the key path.
RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const std::filesystem::path& file);

}  // namespace bcx
