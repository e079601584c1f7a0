#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcx/boundary.hpp"
#include "bcx/geometry.hpp"

namespace bcx {

enum class ExtenderKind { zero, harmonic, learned };

std::string to_string(ExtenderKind k);
ExtenderKind parse_extender_kind(const std::string& s);  // throws ConfigError

// Per-node channels, row-major [nodes x channels].
struct PseudoExtension {
    std::size_t nodes = 0;
    std::size_t channels = 0;
    std::vector<double> data;

    double at(std::size_t node, std::size_t channel) const { return data[node * channels + channel]; }
};

inline constexpr std::size_t zero_extension_channels = 4;
inline constexpr std::size_t harmonic_extension_channels = 3;

// (alpha, beta, gamma, mask) on boundary nodes, zeros elsewhere.
PseudoExtension zero_extension(const Mesh& mesh, const UnifiedBoundaryField& field);

// alpha, beta and gamma each extended harmonically.
PseudoExtension harmonic_extension_stack(const Mesh& mesh, const UnifiedBoundaryField& field);

PseudoExtension basic_extension(ExtenderKind kind, const Mesh& mesh, const UnifiedBoundaryField& field);
std::size_t basic_extension_channels(ExtenderKind kind);

}  // namespace bcx
