#include "bcx/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bcx {

double sample_sinusoid(const SinusoidalParams& params, Point x) {
    if (x == params.center) throw std::invalid_argument("sample_sinusoid: angle undefined at the center");
    const double theta = std::atan2(x.y - params.center.y, x.x - params.center.x) / params.radius;
    double sum = 0.0;
    for (int k = 1; k <= params.modes(); ++k) {
        sum += params.weights[k - 1] * std::sin(k * theta + params.phases[k]);
    }
    return params.amplitude * std::sin(theta + params.phases[0]) * sum;
}

std::vector<double> draw_simplex_weights(Rng& rng, int k) {
    std::vector<double> cuts(k - 1);
    for (auto& c : cuts) c = rng.uniform();
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> w(k);
    double prev = 0.0;
    for (int i = 0; i < k - 1; ++i) {
        w[i] = cuts[i] - prev;
        prev = cuts[i];
    }
    w[k - 1] = 1.0 - prev;
    return w;
}

SinusoidalParams draw_sinusoidal_params(Rng& rng, const SinusoidConfig& config) {
    if (config.modes < 1 || !(config.radius > 0.0) || config.amplitude_max < config.amplitude_min) {
        throw std::invalid_argument("draw_sinusoidal_params: invalid config");
    }
    SinusoidalParams p;
    p.center = config.center;
    p.radius = config.radius;
    p.amplitude = rng.uniform(config.amplitude_min, config.amplitude_max);
    p.weights = draw_simplex_weights(rng, config.modes);
    p.phases.resize(config.modes + 1);
    for (auto& phi : p.phases) phi = 2.0 * std::numbers::pi * rng.uniform();
    return p;
}

std::vector<Segment> partition_boundary(Rng& rng, double perimeter, int n_segments, TypePolicy policy,
                                        std::span<const double> node_arclengths) {
    if (n_segments < 1) throw std::invalid_argument("partition_boundary: n_segments must be >= 1");
    const double min_gap = 1e-9 * perimeter;
    std::vector<double> cuts(n_segments);
    for (;;) {
        for (auto& c : cuts) c = rng.uniform() * perimeter;
        std::sort(cuts.begin(), cuts.end());
        bool distinct = true;
        for (int i = 0; i < n_segments && n_segments > 1; ++i) {
            const double next = (i + 1 < n_segments) ? cuts[i + 1] : cuts[0] + perimeter;
            if (next - cuts[i] <= min_gap) distinct = false;
        }
        if (distinct) break;
    }
    std::vector<Segment> segments(n_segments);
    for (int i = 0; i < n_segments; ++i) {
        segments[i].start = cuts[i];
        segments[i].end = (i + 1 < n_segments) ? cuts[i + 1] : cuts[0] + perimeter;
    }
    if (policy == TypePolicy::all_dirichlet) return segments;

    // A Dirichlet segment shorter than the node spacing may hold no node; the
    // types are redrawn until some node is actually Dirichlet.
    const bool check_nodes = !node_arclengths.empty();
    for (;;) {
        bool has_d = false;
        for (auto& seg : segments) {
            seg.type = static_cast<BcType>(rng.below(3));
            has_d |= seg.type == BcType::dirichlet;
        }
        if (!has_d) continue;
        if (!check_nodes) break;
        const auto types = assign_node_types(segments, node_arclengths, perimeter);
        if (std::find(types.begin(), types.end(), BcType::dirichlet) != types.end()) break;
    }
    return segments;
}

std::vector<BcType> assign_node_types(std::span<const Segment> segments, std::span<const double> arclengths,
                                      double perimeter) {
    std::vector<BcType> types(arclengths.size(), BcType::dirichlet);
    for (std::size_t j = 0; j < arclengths.size(); ++j) {
        const double s = arclengths[j];
        bool found = false;
        for (const auto& seg : segments) {
            for (double candidate : {s, s + perimeter}) {
                if (candidate >= seg.start && candidate < seg.end) {
                    types[j] = seg.type;
                    found = true;
                    break;
                }
            }
            if (found) break;
        }
        if (!found) throw std::invalid_argument("assign_node_types: segments do not cover arc coordinate " + std::to_string(s));
    }
    return types;
}

bool RawBoundarySpec::has_dirichlet() const {
    return std::find(types.begin(), types.end(), BcType::dirichlet) != types.end();
}

RawBoundarySpec uniform_spec(std::size_t count, BcType type) {
    RawBoundarySpec spec;
    spec.types.assign(count, type);
    spec.gamma_d.assign(count, 0.0);
    spec.gamma_n.assign(count, 0.0);
    spec.gamma_r.assign(count, 0.0);
    spec.alpha_r.assign(count, 0.0);
    return spec;
}

namespace {

struct Moments {
    std::size_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++count;
        const double delta = x - mean;
        mean += delta / static_cast<double>(count);
        m2 += delta * (x - mean);
    }
};

}  // namespace

NormalizationStats compute_stats(std::span<const RawBoundarySpec> training_set) {
    Moments d;
    Moments n;
    for (const auto& spec : training_set) {
        for (std::size_t j = 0; j < spec.size(); ++j) {
            if (spec.types[j] == BcType::dirichlet) d.add(spec.gamma_d[j]);
            else if (spec.types[j] == BcType::neumann) n.add(spec.gamma_n[j]);
        }
    }
    NormalizationStats stats;
    if (d.count > 0) {
        stats.mu_d = d.mean;
        stats.sigma_d = std::max(std::sqrt(d.m2 / static_cast<double>(d.count)), sigma_floor);
    }
    if (n.count > 0) {
        stats.mu_n = n.mean;
        stats.sigma_n = std::max(std::sqrt(n.m2 / static_cast<double>(n.count)), sigma_floor);
    }
    return stats;
}

UnifiedBoundaryField merge_normalize(const RawBoundarySpec& spec, const NormalizationStats& stats) {
    if (!(stats.sigma_d > 0.0) || !(stats.sigma_n > 0.0)) {
        throw std::invalid_argument("merge_normalize: standard deviations must be positive");
    }
    UnifiedBoundaryField out;
    const std::size_t b = spec.size();
    out.types = spec.types;
    out.alpha.resize(b);
    out.beta.resize(b);
    out.gamma.resize(b);
    for (std::size_t j = 0; j < b; ++j) {
        switch (spec.types[j]) {
        case BcType::dirichlet:
            out.alpha[j] = 1.0;
            out.beta[j] = 0.0;
            out.gamma[j] = (spec.gamma_d[j] - stats.mu_d) / stats.sigma_d;
            break;
        case BcType::neumann:
            out.alpha[j] = 0.0;
            out.beta[j] = 1.0;
            out.gamma[j] = (spec.gamma_n[j] - stats.mu_n) / stats.sigma_n;
            break;
        case BcType::robin: {
            const double a = spec.alpha_r[j] * stats.sigma_d;
            const double bt = stats.sigma_n;
            const double g = spec.gamma_r[j] - spec.alpha_r[j] * stats.mu_d - stats.mu_n;
            const double scale = std::hypot(a, bt);
            out.alpha[j] = a / scale;
            out.beta[j] = bt / scale;
            out.gamma[j] = g / scale;
            break;
        }
        }
    }
    return out;
}

RawBoundarySpec reconstruct_raw(const UnifiedBoundaryField& field, const NormalizationStats& stats) {
    RawBoundarySpec spec = uniform_spec(field.size(), BcType::dirichlet);
    spec.types = field.types;
    for (std::size_t j = 0; j < field.size(); ++j) {
        switch (field.types[j]) {
        case BcType::dirichlet:
            spec.gamma_d[j] = field.gamma[j] * stats.sigma_d + stats.mu_d;
            break;
        case BcType::neumann:
            spec.gamma_n[j] = field.gamma[j] * stats.sigma_n + stats.mu_n;
            break;
        case BcType::robin: {
            if (field.beta[j] == 0.0) {
                throw std::invalid_argument("reconstruct_raw: Robin node " + std::to_string(j) + " has beta = 0");
            }
            // beta = sigma_N / scale recovers the scale of the Robin row.
            const double scale = stats.sigma_n / field.beta[j];
            spec.alpha_r[j] = field.alpha[j] * scale / stats.sigma_d;
            spec.gamma_r[j] = field.gamma[j] * scale + spec.alpha_r[j] * stats.mu_d + stats.mu_n;
            break;
        }
        }
    }
    return spec;
}

std::vector<UnifiedBoundaryField> merge_normalize(std::span<const RawBoundarySpec> components,
                                                  std::span<const NormalizationStats> stats) {
    if (components.size() != stats.size()) {
        throw std::invalid_argument("merge_normalize: one stats entry per component required");
    }
    std::vector<UnifiedBoundaryField> out;
    out.reserve(components.size());
    for (std::size_t c = 0; c < components.size(); ++c) out.push_back(merge_normalize(components[c], stats[c]));
    return out;
}

}  // namespace bcx
