#pragma once

// Learned extender (LX) and the encode-process-decode core, templated on the
// scalar type so the same graph runs in float32 for training and float64 for
// gradient checks.

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bcx/extender.hpp"
#include "bcx/geometry.hpp"
#include "bcx/nn/layers.hpp"

namespace bcx {

struct ExtenderConfig {
    ExtenderKind kind = ExtenderKind::learned;
    int d_psi = 16;
    int latent = 32;
    int blocks = 2;
    int heads = 4;
    int head_dim = 0;  // 0: same as latent
    double mask_ratio = 0.0;
    bool single_head = false;
    bool no_initial_ff = false;
    bool no_intermediate_ff = false;
    bool no_final_ff = false;
    bool no_residual = false;

    int effective_heads() const { return single_head ? 1 : heads; }
    int effective_head_dim() const { return head_dim > 0 ? head_dim : latent; }
    // Channels handed to the core.
    int psi_channels() const {
        return kind == ExtenderKind::learned ? d_psi : static_cast<int>(basic_extension_channels(kind));
    }
};

// Extender settings of the reference architecture (latent 128, 6 blocks).
inline ExtenderConfig reference_extender_config() {
    ExtenderConfig c;
    c.latent = 128;
    c.blocks = 6;
    return c;
}

struct CoreConfig {
    int coarse = 64;
    int latent = 32;
    int blocks = 2;
    int heads = 4;
    int head_dim = 0;  // 0: same as latent
    int decoder_k = 3;

    int effective_head_dim() const { return head_dim > 0 ? head_dim : latent; }
};

struct ModelConfig {
    ExtenderConfig extender;
    CoreConfig core;
};

void validate(const ExtenderConfig& c);  // throws ConfigError
void validate(const CoreConfig& c, std::size_t node_count);

inline constexpr int fine_feature_count = 4;      // x, y, sdf, f
inline constexpr int coarse_feature_count = 3;    // x, y, sdf
inline constexpr int boundary_feature_count = 7;  // x, y, nx, ny, alpha, beta, gamma
inline constexpr double idw_eps = 1e-8;

// Closed-form parameter count of the learned extender.
std::size_t lx_param_count(const ExtenderConfig& c);

// Mesh-level operators shared by every sample.
struct MeshOperators {
    CoarseMap coarse;
    // Row c averages the fine nodes assigned to coarse node c.
    std::vector<std::vector<std::pair<int, double>>> pool;
    // Row i blends the k nearest coarse nodes of fine node i.
    std::vector<std::vector<std::pair<int, double>>> decode;
};

MeshOperators build_mesh_operators(const Mesh& mesh, int coarse_count, int k_nearest, std::uint64_t seed);

template <class T>
std::shared_ptr<const nn::SparseMap<T>> to_sparse(const std::vector<std::vector<std::pair<int, double>>>& rows,
                                                  int cols) {
    std::vector<Eigen::Triplet<T>> trips;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (auto [c, w] : rows[r]) trips.emplace_back(static_cast<int>(r), c, static_cast<T>(w));
    }
    auto m = std::make_shared<nn::SparseMap<T>>(static_cast<Eigen::Index>(rows.size()), cols);
    m->setFromTriplets(trips.begin(), trips.end());
    return m;
}

template <class T>
struct ModelContext {
    std::shared_ptr<const nn::SparseMap<T>> pool;    // [coarse x fine]
    std::shared_ptr<const nn::SparseMap<T>> decode;  // [fine x coarse]
    nn::Matrix<T> coarse_features;                   // [coarse x 3]
    T target_mean = 0;
    T target_std = 1;
};

template <class T>
ModelContext<T> make_context(const Mesh& mesh, const MeshOperators& ops, double target_mean, double target_std) {
    ModelContext<T> ctx;
    const int n = static_cast<int>(mesh.nodes.size());
    const int c = static_cast<int>(ops.coarse.coarse_nodes.size());
    ctx.pool = to_sparse<T>(ops.pool, n);
    ctx.decode = to_sparse<T>(ops.decode, c);
    ctx.coarse_features.resize(c, coarse_feature_count);
    for (int k = 0; k < c; ++k) {
        const auto node = ops.coarse.coarse_nodes[k];
        ctx.coarse_features(k, 0) = static_cast<T>(mesh.nodes[node].x);
        ctx.coarse_features(k, 1) = static_cast<T>(mesh.nodes[node].y);
        ctx.coarse_features(k, 2) = static_cast<T>(mesh.sdf[node]);
    }
    ctx.target_mean = static_cast<T>(target_mean);
    ctx.target_std = static_cast<T>(target_std);
    return ctx;
}

template <class T>
struct ModelInput {
    nn::Matrix<T> fine;      // [fine x 4]
    nn::Matrix<T> boundary;  // [boundary x 7], learned extender only
    nn::Matrix<T> psi_fine;  // [fine x channels], basic extenders only
};

struct LxLayout {
    nn::FeedForward domain_ff, boundary_ff;  // hidden layer unused when no_initial_ff
    nn::Linear domain_linear, boundary_linear;
    nn::LayerNorm domain_norm, boundary_norm;
    struct Block {
        nn::MultiHeadAttention attention;
        nn::LayerNorm pre_norm;
        nn::FeedForward ff;
        std::optional<nn::LayerNorm> post_norm;
    };
    std::vector<Block> blocks;
    nn::FeedForward final_ff;
    nn::Linear final_linear;
};

struct CoreLayout {
    nn::FeedForward lift, fusion, position, head;
    struct Block {
        nn::LayerNorm attention_norm, ff_norm;
        nn::MultiHeadAttention attention;
        nn::FeedForward ff;
    };
    std::vector<Block> blocks;
};

struct ModelLayout {
    std::optional<LxLayout> lx;
    CoreLayout core;
};

template <class T>
LxLayout build_lx(nn::ParameterTree<T>& tree, const ExtenderConfig& c, Rng& rng) {
    using namespace nn;
    LxLayout l;
    const int L = c.latent;
    if (c.no_initial_ff) {
        l.domain_linear = make_linear(tree, "lx.domain_in", coarse_feature_count, L, rng);
        l.boundary_linear = make_linear(tree, "lx.boundary_in", boundary_feature_count, L, rng);
    } else {
        l.domain_ff = make_feed_forward(tree, "lx.domain_in", coarse_feature_count, L, L, rng);
        l.boundary_ff = make_feed_forward(tree, "lx.boundary_in", boundary_feature_count, L, L, rng);
    }
    l.domain_norm = make_layer_norm(tree, "lx.domain_norm", L);
    l.boundary_norm = make_layer_norm(tree, "lx.boundary_norm", L);
    for (int k = 0; k < c.blocks; ++k) {
        const std::string p = "lx.block" + std::to_string(k);
        LxLayout::Block b;
        b.attention = make_attention(tree, p + ".attention", L, c.effective_heads(), c.effective_head_dim(), rng);
        if (!c.no_intermediate_ff) {
            b.pre_norm = make_layer_norm(tree, p + ".pre_norm", L);
            b.ff = make_feed_forward(tree, p + ".ff", L, L, L, rng);
        }
        if (k + 1 < c.blocks) b.post_norm = make_layer_norm(tree, p + ".post_norm", L);
        l.blocks.push_back(b);
    }
    if (c.no_final_ff) {
        l.final_linear = make_linear(tree, "lx.out", L, c.d_psi, rng);
    } else {
        l.final_ff = make_feed_forward(tree, "lx.out", L, L, c.d_psi, rng);
    }
    return l;
}

template <class T>
CoreLayout build_core(nn::ParameterTree<T>& tree, const CoreConfig& c, int psi_channels, Rng& rng) {
    using namespace nn;
    CoreLayout l;
    const int L = c.latent;
    l.lift = make_feed_forward(tree, "core.lift", fine_feature_count, L, L, rng);
    l.fusion = make_feed_forward(tree, "core.fusion", L + psi_channels, L, L, rng);
    if (c.blocks > 0) l.position = make_feed_forward(tree, "core.position", 2, L, L, rng);
    for (int k = 0; k < c.blocks; ++k) {
        const std::string p = "core.block" + std::to_string(k);
        CoreLayout::Block b;
        b.attention_norm = make_layer_norm(tree, p + ".attention_norm", L);
        b.attention = make_attention(tree, p + ".attention", L, c.heads, c.effective_head_dim(), rng);
        b.ff_norm = make_layer_norm(tree, p + ".ff_norm", L);
        b.ff = make_feed_forward(tree, p + ".ff", L, L, L, rng);
        l.blocks.push_back(b);
    }
    l.head = make_feed_forward(tree, "core.head", L, L, 1, rng);
    return l;
}

template <class T>
ModelLayout build_model(nn::ParameterTree<T>& tree, const ModelConfig& c, std::uint64_t seed) {
    Rng rng(seed);
    ModelLayout m;
    if (c.extender.kind == ExtenderKind::learned) m.lx = build_lx(tree, c.extender, rng);
    m.core = build_core(tree, c.core, c.extender.psi_channels(), rng);
    return m;
}

// One mask per LX block; empty vectors mean no masking.
using BlockMasks = std::vector<std::vector<std::uint8_t>>;

// Keeps each source with probability 1 - ratio; redraws an all-masked draw.
BlockMasks draw_block_masks(Rng& rng, int blocks, std::size_t sources, double ratio);

template <class T>
nn::Var lx_forward(nn::Tape<T>& t, const LxLayout& l, const ExtenderConfig& c, const nn::Matrix<T>& coarse_features,
                   const nn::Matrix<T>& boundary_features, const BlockMasks& masks = {}) {
    using namespace nn;
    const Var dom = t.constant(coarse_features);
    const Var bnd = t.constant(boundary_features);
    Var a = c.no_initial_ff ? apply(t, l.domain_linear, dom) : apply(t, l.domain_ff, dom);
    Var b = c.no_initial_ff ? apply(t, l.boundary_linear, bnd) : apply(t, l.boundary_ff, bnd);
    a = apply(t, l.domain_norm, a);
    b = apply(t, l.boundary_norm, b);
    for (std::size_t k = 0; k < l.blocks.size(); ++k) {
        const auto& blk = l.blocks[k];
        std::span<const std::uint8_t> mask;
        if (k < masks.size()) mask = masks[k];
        Var h = apply(t, blk.attention, a, b, mask);
        if (!c.no_intermediate_ff) h = apply(t, blk.ff, apply(t, blk.pre_norm, h));
        a = c.no_residual ? h : t.add(a, h);
        if (blk.post_norm) a = apply(t, *blk.post_norm, a);
    }
    return c.no_final_ff ? apply(t, l.final_linear, a) : apply(t, l.final_ff, a);
}

template <class T>
nn::Var encode(nn::Tape<T>& t, const CoreLayout& l, const ModelContext<T>& ctx, const nn::Matrix<T>& fine_features,
               nn::Var psi_coarse) {
    const nn::Var pooled = t.sparse_left(ctx.pool, t.constant(fine_features));
    const nn::Var lifted = apply(t, l.lift, pooled);
    return apply(t, l.fusion, t.concat_cols({lifted, psi_coarse}));
}

template <class T>
nn::Var process(nn::Tape<T>& t, const CoreLayout& l, const ModelContext<T>& ctx, nn::Var h) {
    using namespace nn;
    if (l.blocks.empty()) return h;
    const Var coords = t.constant(ctx.coarse_features.leftCols(2));
    h = t.add(h, apply(t, l.position, coords));
    for (const auto& blk : l.blocks) {
        const Var n1 = apply(t, blk.attention_norm, h);
        h = t.add(h, apply(t, blk.attention, n1, n1));
        h = t.add(h, apply(t, blk.ff, apply(t, blk.ff_norm, h)));
    }
    return h;
}

// Normalized prediction per fine node, [fine x 1].
template <class T>
nn::Var decode(nn::Tape<T>& t, const CoreLayout& l, const ModelContext<T>& ctx, nn::Var h) {
    return apply(t, l.head, t.sparse_left(ctx.decode, h));
}

// Full prediction in physical units, [fine x 1].
template <class T>
nn::Var model_forward(nn::Tape<T>& t, const ModelLayout& m, const ModelConfig& c, const ModelContext<T>& ctx,
                      const ModelInput<T>& in, const BlockMasks& masks = {}) {
    nn::Var psi;
    if (m.lx) {
        psi = lx_forward(t, *m.lx, c.extender, ctx.coarse_features, in.boundary, masks);
    } else {
        psi = t.sparse_left(ctx.pool, t.constant(in.psi_fine));
    }
    nn::Var h = encode(t, m.core, ctx, in.fine, psi);
    h = process(t, m.core, ctx, h);
    return t.affine(decode(t, m.core, ctx, h), ctx.target_std, ctx.target_mean);
}

}  // namespace bcx
