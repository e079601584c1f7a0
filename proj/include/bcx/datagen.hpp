#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "bcx/array_io.hpp"
#include "bcx/boundary.hpp"
#include "bcx/geometry.hpp"
#include "bcx/solver.hpp"

namespace bcx {

enum class BcConfig { dirichlet, mixed, mixed_plus };

std::string to_string(Geometry g);
std::string to_string(BcConfig c);
Geometry parse_geometry(const std::string& s);
BcConfig parse_bc_config(const std::string& s);

struct DatasetConfig {
    Geometry geometry = Geometry::disk;
    int resolution = 14;  // n_rings for the disk, n_per_side for the square
    BcConfig bc = BcConfig::dirichlet;
    int n_train = 512;
    int n_val = 64;
    int n_test = 64;
    std::uint64_t seed = 0;
    int n_segments = 4;
    double source_amplitude = 20.0;
    // Dirichlet configuration uses gamma_d only.
    SinusoidConfig gamma_d{{0.0, 0.0}, 1.0, 12, 2.0, 10.0};
    SinusoidConfig gamma_n{{0.0, 0.0}, 1.0, 6, 2.0, 10.0};
    SinusoidConfig gamma_r{{0.0, 0.0}, 1.0, 6, 2.0, 10.0};
    SinusoidConfig alpha_r{{0.0, 0.0}, 1.0, 3, 0.2, 0.6};

    int total() const { return n_train + n_val + n_test; }
};

// Default settings for the Circle/Square geometries: K=12, A~U[2,10] for the
// Dirichlet configuration; the Mixed table otherwise.
DatasetConfig default_dataset_config(Geometry geometry, BcConfig bc);
int default_resolution(Geometry geometry);

json to_json(const DatasetConfig& c);
// Missing keys keep their defaults; unknown keys throw ConfigError naming the path.
DatasetConfig dataset_config_from_json(const json& j, const std::string& path = "dataset");

struct Sample {
    std::vector<double> f;
    std::vector<double> u;
    RawBoundarySpec raw;
    // Float32-representable values (what the dataset format stores).
    UnifiedBoundaryField unified;
};

// f(x) = 20 cos(4 pi |x|), 2-norm on the disk, infinity norm on the square.
double fixed_source(Geometry geometry, Point x, double amplitude = 20.0);

Sample gen_dirichlet_sample(const Mesh& mesh, const DatasetConfig& config, std::uint64_t seed);
Sample gen_mixed_sample(const Mesh& mesh, const DatasetConfig& config, std::uint64_t seed, bool with_random_source);
// Raw spec, source and FEM solution for sample seed per config.bc; unified left empty.
Sample gen_sample(const Mesh& mesh, const DatasetConfig& config, std::uint64_t seed);

struct Dataset {
    DatasetConfig config;
    Mesh mesh;
    NormalizationStats stats;
    std::vector<Sample> samples;  // train, then val, then test

    std::size_t n_train() const { return static_cast<std::size_t>(config.n_train); }
    std::size_t n_val() const { return static_cast<std::size_t>(config.n_val); }
    std::size_t n_test() const { return static_cast<std::size_t>(config.n_test); }
    std::size_t train_begin() const { return 0; }
    std::size_t val_begin() const { return n_train(); }
    std::size_t test_begin() const { return n_train() + n_val(); }
};

// A draw whose solve fails is replaced by one from derive_seed(seed, attempt).
inline constexpr int max_solve_attempts = 8;
Sample gen_sample_retrying(const Mesh& mesh, const DatasetConfig& config, std::uint64_t seed);

// Deterministic in (config, seed); `threads` only changes wall time.
Dataset generate_dataset(const DatasetConfig& config, int threads = 1);

// Rounds merge_normalize output to float32 as stored on disk.
UnifiedBoundaryField stored_unified(const RawBoundarySpec& raw, const NormalizationStats& stats);

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& dir);

json stats_to_json(const NormalizationStats& s);
NormalizationStats stats_from_json(const json& j);

std::vector<ArrayEntry> mesh_to_arrays(const Mesh& mesh);
Mesh mesh_from_arrays(const ArrayDir& dir);

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace bcx
