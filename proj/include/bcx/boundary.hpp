#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bcx/geometry.hpp"
#include "bcx/rng.hpp"

namespace bcx {

enum class BcType : std::uint8_t { dirichlet = 0, neumann = 1, robin = 2 };

// A * sin(theta/R + phi_0) * sum_k b_k sin(k theta/R + phi_k), theta the polar
// angle about `center`.
struct SinusoidalParams {
    Point center;
    double radius = 1.0;
    double amplitude = 1.0;
    std::vector<double> weights;  // b_1..b_K, sum to 1
    std::vector<double> phases;   // phi_0..phi_K in [0, 2pi)

    int modes() const { return static_cast<int>(weights.size()); }
};

struct SinusoidConfig {
    Point center;
    double radius = 1.0;
    int modes = 1;
    double amplitude_min = 1.0;
    double amplitude_max = 1.0;
};

double sample_sinusoid(const SinusoidalParams& params, Point x);
SinusoidalParams draw_sinusoidal_params(Rng& rng, const SinusoidConfig& config);

// K weights uniform on the simplex via gaps of sorted uniforms.
std::vector<double> draw_simplex_weights(Rng& rng, int k);

// Half-open arc-length interval [start, end); end may exceed the perimeter,
// in which case the segment wraps through arc coordinate 0.
struct Segment {
    double start = 0.0;
    double end = 0.0;
    BcType type = BcType::dirichlet;
};

enum class TypePolicy { all_dirichlet, mixed };

std::vector<Segment> partition_boundary(Rng& rng, double perimeter, int n_segments, TypePolicy policy,
                                        std::span<const double> node_arclengths = {});

// Segment type for each loop node given its arc coordinate.
std::vector<BcType> assign_node_types(std::span<const Segment> segments, std::span<const double> arclengths,
                                      double perimeter);

// One solution component. Channel values are meaningful where the node type
// uses them and zero elsewhere.
struct RawBoundarySpec {
    std::vector<Segment> segments;
    std::vector<BcType> types;
    std::vector<double> gamma_d;
    std::vector<double> gamma_n;
    std::vector<double> gamma_r;
    std::vector<double> alpha_r;

    std::size_t size() const { return types.size(); }
    bool has_dirichlet() const;
};

// Raw spec with every channel zero-initialized for `count` nodes of one type.
RawBoundarySpec uniform_spec(std::size_t count, BcType type);

struct NormalizationStats {
    double mu_d = 0.0;
    double sigma_d = 1.0;
    double mu_n = 0.0;
    double sigma_n = 1.0;
};

inline constexpr double sigma_floor = 1e-8;

// Population mean/std of gamma_D over Dirichlet nodes and gamma_N over Neumann
// nodes pooled across the set. Absent types default to (0, 1).
NormalizationStats compute_stats(std::span<const RawBoundarySpec> training_set);

struct UnifiedBoundaryField {
    std::vector<BcType> types;
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> gamma;

    std::size_t size() const { return types.size(); }
};

UnifiedBoundaryField merge_normalize(const RawBoundarySpec& spec, const NormalizationStats& stats);
RawBoundarySpec reconstruct_raw(const UnifiedBoundaryField& field, const NormalizationStats& stats);

// Component-wise merging for d_u > 1; one stats entry per component.
std::vector<UnifiedBoundaryField> merge_normalize(std::span<const RawBoundarySpec> components,
                                                  std::span<const NormalizationStats> stats);

}  // namespace bcx
