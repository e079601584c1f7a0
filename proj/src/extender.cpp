#include "bcx/extender.hpp"

#include <stdexcept>

#include "bcx/error.hpp"
#include "bcx/solver.hpp"

namespace bcx {

std::string to_string(ExtenderKind k) {
    switch (k) {
        case ExtenderKind::zero: return "zero";
        case ExtenderKind::harmonic: return "harmonic";
        case ExtenderKind::learned: return "learned";
    }
    return "?";
}

ExtenderKind parse_extender_kind(const std::string& s) {
    if (s == "zero") return ExtenderKind::zero;
    if (s == "harmonic") return ExtenderKind::harmonic;
    if (s == "learned") return ExtenderKind::learned;
    throw ConfigError("unknown extender kind \"" + s + "\" (expected zero, harmonic or learned)");
}

namespace {

void check_field(const Mesh& mesh, const UnifiedBoundaryField& field) {
    if (field.size() != mesh.boundary_loop.size()) {
        throw std::invalid_argument("extension: boundary field length differs from the boundary loop");
    }
}

}  // namespace

PseudoExtension zero_extension(const Mesh& mesh, const UnifiedBoundaryField& field) {
    check_field(mesh, field);
    PseudoExtension e{mesh.nodes.size(), zero_extension_channels, {}};
    e.data.assign(e.nodes * e.channels, 0.0);
    for (std::size_t j = 0; j < field.size(); ++j) {
        double* row = &e.data[static_cast<std::size_t>(mesh.boundary_loop[j]) * e.channels];
        row[0] = field.alpha[j];
        row[1] = field.beta[j];
        row[2] = field.gamma[j];
        row[3] = 1.0;
    }
    return e;
}

PseudoExtension harmonic_extension_stack(const Mesh& mesh, const UnifiedBoundaryField& field) {
    check_field(mesh, field);
    PseudoExtension e{mesh.nodes.size(), harmonic_extension_channels, {}};
    e.data.assign(e.nodes * e.channels, 0.0);
    const std::vector<double>* channels[] = {&field.alpha, &field.beta, &field.gamma};
    for (std::size_t c = 0; c < e.channels; ++c) {
        const auto ext = harmonic_extension(mesh, *channels[c]);
        for (std::size_t i = 0; i < e.nodes; ++i) e.data[i * e.channels + c] = ext[i];
    }
    return e;
}

PseudoExtension basic_extension(ExtenderKind kind, const Mesh& mesh, const UnifiedBoundaryField& field) {
    switch (kind) {
        case ExtenderKind::zero: return zero_extension(mesh, field);
        case ExtenderKind::harmonic: return harmonic_extension_stack(mesh, field);
        case ExtenderKind::learned: break;
    }
    throw std::invalid_argument("basic_extension: the learned extender has no closed form");
}

std::size_t basic_extension_channels(ExtenderKind kind) {
    switch (kind) {
        case ExtenderKind::zero: return zero_extension_channels;
        case ExtenderKind::harmonic: return harmonic_extension_channels;
        case ExtenderKind::learned: break;
    }
    return 0;
}

}  // namespace bcx
