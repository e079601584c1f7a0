#pragma once

#include <cstdint>
#include <vector>

#include "bcx/traineval.hpp"

namespace bcx {

struct ScalingPoint {
    int train_samples = 0;
    TrainResult run;
    EvalReport test;
};

// One training run per size on the first `size` training samples, all with
// the same seed; each evaluated on the test split.
std::vector<ScalingPoint> data_scaling(const Dataset& ds, const ModelConfig& model, const TrainConfig& cfg,
                                       std::span<const int> sizes, std::uint64_t seed, int threads = 1,
                                       const ProgressFn& progress = {});

struct SweepPoint {
    double parameter = 0.0;  // noise ratio or boundary stride
    EvalReport report;
};

std::vector<SweepPoint> eval_noise(const Model& model, const Dataset& ds, std::span<const std::size_t> indices,
                                   std::span<const double> ratios, std::uint64_t noise_seed, int threads = 1);
std::vector<SweepPoint> eval_resolution(const Model& model, const Dataset& ds, std::span<const std::size_t> indices,
                                        std::span<const int> strides, int threads = 1);

struct FinetuneResult {
    TrainResult finetuned;
    TrainResult control;
    EvalReport finetuned_test;
    EvalReport control_test;
};

// Continues training `source` (fresh optimizer state, source feature stats)
// on the first n training samples, and trains a randomly initialized model of
// the same configuration on the same samples with the same budget and seed.
FinetuneResult finetune(const Model& source, const Dataset& ds, std::size_t n_samples, const TrainConfig& cfg,
                        std::uint64_t seed, int threads = 1, const ProgressFn& progress = {});

void reset_optimizer_state(Model& model);

json scaling_report(const std::vector<ScalingPoint>& points);
json sweep_report(const char* kind, const char* parameter, const std::vector<SweepPoint>& points);
json finetune_report(const FinetuneResult& r, std::size_t n_samples);

}  // namespace bcx
