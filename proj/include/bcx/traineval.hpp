#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "bcx/datagen.hpp"
#include "bcx/model.hpp"
#include "bcx/nn/optim.hpp"

namespace bcx {

inline constexpr double loss_exclusion_fraction = 0.002;
inline constexpr double stats_exclusion_fraction = 0.004;
inline constexpr double feature_sigma_floor = 1e-8;

// Number of entries dropped from n by an exclusion fraction.
std::size_t excluded_count(std::size_t n, double fraction);

// 0 for the excluded largest-|truth| entries (ties: lower index kept first
// in the exclusion), 1 elsewhere.
std::vector<std::uint8_t> exclusion_keep_mask(std::span<const double> truth, double fraction);

double relative_l2_excluded(std::span<const double> pred, std::span<const double> truth,
                            double fraction = loss_exclusion_fraction);

// Lower median for even counts.
double lower_median(std::vector<double> v);
double mean_of(std::span<const double> v);

struct ChamferRecall {
    double chamfer = 0.0;
    double recall = 0.0;
};
inline constexpr double metric_box_diameter = 2.8284271247461903;  // 2 sqrt(2)
ChamferRecall chamfer_and_recall(std::span<const Point> truth, std::span<const Point> pred);

// Locations of the largest-|value| entries (same count as the loss exclusion).
std::vector<Point> singularity_points(const Mesh& mesh, std::span<const double> field,
                                      double fraction = loss_exclusion_fraction);

struct FeatureStats {
    double f_mean = 0.0, f_std = 1.0;
    double u_mean = 0.0, u_std = 1.0;
};

// Pooled mean/std of f and u over the given samples after removing each
// sample's top-magnitude entries.
FeatureStats compute_feature_stats(const Dataset& ds, std::span<const std::size_t> indices,
                                   double fraction = stats_exclusion_fraction);
// Same statistic for a list of fields.
std::pair<double, double> excluded_mean_std(const std::vector<const std::vector<double>*>& fields, double fraction);

json to_json(const FeatureStats& s);
FeatureStats feature_stats_from_json(const json& j);

struct TrainConfig {
    int epochs = 200;
    int batch_size = 8;
    nn::AdamWConfig adamw;
    nn::ScheduleConfig schedule;
    std::uint64_t coarse_seed = 0;
};

json to_json(const ModelConfig& c);
json to_json(const TrainConfig& c);
ModelConfig model_config_from_json(const json& j, const std::string& path);
TrainConfig train_config_from_json(const json& j, const std::string& path);

struct Model {
    ModelConfig config;
    FeatureStats stats;
    std::uint64_t coarse_seed = 0;
    nn::ParameterTree<float> params;
    ModelLayout layout;
};

Model init_model(const ModelConfig& config, const FeatureStats& stats, std::uint64_t seed,
                 std::uint64_t coarse_seed = 0);

// Per-sample model input on a dataset's mesh.
struct PreparedData {
    const Dataset* dataset = nullptr;
    std::vector<std::size_t> indices;
    MeshOperators ops;
    ModelContext<float> context;
    std::vector<ModelInput<float>> inputs;
    std::vector<std::vector<float>> targets;
    std::vector<std::vector<std::uint8_t>> keep;
};

// Boundary feature rows (x, y, nx, ny, alpha, beta, gamma), every `stride`-th
// loop node.
nn::Matrix<float> boundary_features(const Mesh& mesh, const UnifiedBoundaryField& field, int stride = 1);
ModelInput<float> make_input(const Mesh& mesh, const Model& model, std::span<const double> f,
                             const UnifiedBoundaryField& field, int stride = 1);

PreparedData prepare(const Dataset& ds, const Model& model, std::span<const std::size_t> indices, int threads = 1);

std::vector<double> predict(const Model& model, const ModelContext<float>& ctx, const ModelInput<float>& in);

struct HistoryRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_error = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    Model best;
    std::vector<HistoryRow> history;
    int best_epoch = 0;  // 0: initialization
    double best_val = 0.0;
    double seconds = 0.0;
};

using ProgressFn = std::function<void(const HistoryRow&)>;

// Training indices / validation indices refer to ds.samples. Throws
// DivergenceError on the first non-finite loss, gradient or parameter.
TrainResult train(const Dataset& ds, Model init, const TrainConfig& cfg, std::span<const std::size_t> train_idx,
                  std::span<const std::size_t> val_idx, std::uint64_t seed, const ProgressFn& progress = {});

std::string history_csv(const std::vector<HistoryRow>& rows);

struct EvalOptions {
    double noise_ratio = 0.0;
    std::uint64_t noise_seed = 0;
    int boundary_stride = 1;
    int threads = 1;
};

struct EvalReport {
    std::vector<double> errors;
    double median = 0.0;
    double mean = 0.0;
    double chamfer = 0.0;
    double recall = 0.0;
    double realized_noise_ratio = 0.0;
};

EvalReport evaluate(const Model& model, const Dataset& ds, std::span<const std::size_t> indices,
                    const EvalOptions& opts = {});
json to_json(const EvalReport& r);

// Adds Gaussian noise to gamma with variance ratio * mean(gamma^2); returns
// the drawn noise.
std::vector<double> add_gamma_noise(UnifiedBoundaryField& field, double ratio, Rng& rng);

// argmin_c of the median relative error of the constant prediction c.
struct ConstantBaseline {
    double value = 0.0;
    double median_error = 0.0;
};
ConstantBaseline best_constant_predictor(const Dataset& ds, std::span<const std::size_t> indices);

std::vector<std::size_t> index_range(std::size_t begin, std::size_t count);
std::vector<std::size_t> train_indices(const Dataset& ds, std::size_t limit = 0);
std::vector<std::size_t> val_indices(const Dataset& ds);
std::vector<std::size_t> test_indices(const Dataset& ds);

void save_checkpoint(const std::filesystem::path& dir, const Model& model, const json& extra = json::object());
Model load_checkpoint(const std::filesystem::path& dir, json* extra = nullptr);

}  // namespace bcx
