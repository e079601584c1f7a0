#include "bcx/model.hpp"

#include <algorithm>
#include <cmath>

#include "bcx/error.hpp"

namespace bcx {

void validate(const ExtenderConfig& c) {
    if (c.kind != ExtenderKind::learned) return;
    if (c.d_psi < 1 || c.latent < 1 || c.blocks < 0 || c.heads < 1 || c.head_dim < 0) {
        throw ConfigError("extender: sizes must be positive");
    }
    if (!(c.mask_ratio >= 0.0 && c.mask_ratio < 1.0)) throw ConfigError("extender.mask_ratio: must lie in [0, 1)");
}

void validate(const CoreConfig& c, std::size_t node_count) {
    if (c.coarse < 1 || c.latent < 1 || c.blocks < 0 || c.heads < 1 || c.head_dim < 0 || c.decoder_k < 1) {
        throw ConfigError("core: sizes must be positive");
    }
    if (static_cast<std::size_t>(c.coarse) > node_count) {
        throw ConfigError("core.coarse: " + std::to_string(c.coarse) + " coarse nodes exceed the mesh's " +
                          std::to_string(node_count) + " nodes");
    }
    if (c.decoder_k > c.coarse) throw ConfigError("core.decoder_k: exceeds the coarse node count");
}

std::size_t lx_param_count(const ExtenderConfig& c) {
    using nn::attention_param_count;
    using nn::feed_forward_param_count;
    using nn::linear_param_count;
    const std::size_t L = c.latent, K = c.blocks, D = c.d_psi;
    std::size_t n = 0;
    if (c.no_initial_ff) {
        n += linear_param_count(coarse_feature_count, L) + linear_param_count(boundary_feature_count, L);
    } else {
        n += feed_forward_param_count(coarse_feature_count, L, L) + feed_forward_param_count(boundary_feature_count, L, L);
    }
    n += 2 * 2 * L;
    n += K * attention_param_count(L, c.effective_heads(), c.effective_head_dim());
    if (!c.no_intermediate_ff) n += K * (2 * L + feed_forward_param_count(L, L, L));
    if (K > 0) n += (K - 1) * 2 * L;
    n += c.no_final_ff ? linear_param_count(L, D) : feed_forward_param_count(L, L, D);
    return n;
}

MeshOperators build_mesh_operators(const Mesh& mesh, int coarse_count, int k_nearest, std::uint64_t seed) {
    MeshOperators ops;
    ops.coarse = farthest_point_subsample(mesh, coarse_count, seed);
    const std::size_t c = ops.coarse.coarse_nodes.size();
    const std::size_t n = mesh.nodes.size();
    if (k_nearest < 1 || static_cast<std::size_t>(k_nearest) > c) {
        throw std::invalid_argument("build_mesh_operators: k_nearest out of range");
    }

    std::vector<int> members(c, 0);
    for (auto a : ops.coarse.assign) ++members[a];
    ops.pool.resize(c);
    for (std::size_t i = 0; i < n; ++i) {
        const auto a = ops.coarse.assign[i];
        ops.pool[a].emplace_back(static_cast<int>(i), 1.0 / members[a]);
    }

    ops.decode.resize(n);
    std::vector<std::pair<double, int>> dist(c);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < c; ++k) {
            dist[k] = {distance(mesh.nodes[i], mesh.nodes[ops.coarse.coarse_nodes[k]]), static_cast<int>(k)};
        }
        std::partial_sort(dist.begin(), dist.begin() + k_nearest, dist.end());
        double total = 0.0;
        for (int k = 0; k < k_nearest; ++k) total += 1.0 / ((dist[k].first + idw_eps) * (dist[k].first + idw_eps));
        for (int k = 0; k < k_nearest; ++k) {
            const double w = 1.0 / ((dist[k].first + idw_eps) * (dist[k].first + idw_eps));
            ops.decode[i].emplace_back(dist[k].second, w / total);
        }
    }
    return ops;
}

BlockMasks draw_block_masks(Rng& rng, int blocks, std::size_t sources, double ratio) {
    BlockMasks masks(blocks);
    if (ratio <= 0.0) return masks;
    for (auto& m : masks) {
        m.assign(sources, 0);
        for (int attempt = 0;; ++attempt) {
            if (attempt == 100) throw std::runtime_error("draw_block_masks: 100 consecutive all-masked draws");
            bool any = false;
            for (auto& v : m) any |= (v = rng.uniform() >= ratio ? 1 : 0) != 0;
            if (any) break;
        }
    }
    return masks;
}

}  // namespace bcx
