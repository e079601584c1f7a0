#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bcx/nn/tape.hpp"

namespace bcx::nn {

// y = x W + b with W [in x out].
struct Linear {
    int weight = -1;
    int bias = -1;
};

// One hidden layer with Swish.
struct FeedForward {
    Linear hidden;
    Linear out;
};

struct LayerNorm {
    int scale = -1;
    int shift = -1;
};

struct MultiHeadAttention {
    Linear query, key, value, output;
    int heads = 1;
    int head_dim = 1;
};

template <class T>
Linear make_linear(ParameterTree<T>& tree, const std::string& name, int in, int out, Rng& rng) {
    Linear l;
    l.weight = tree.add_glorot(name + ".weight", in, out, rng);
    l.bias = tree.add_constant(name + ".bias", 1, out, T(0));
    return l;
}

template <class T>
FeedForward make_feed_forward(ParameterTree<T>& tree, const std::string& name, int in, int hidden, int out, Rng& rng) {
    return {make_linear(tree, name + ".hidden", in, hidden, rng), make_linear(tree, name + ".out", hidden, out, rng)};
}

template <class T>
LayerNorm make_layer_norm(ParameterTree<T>& tree, const std::string& name, int width) {
    return {tree.add_constant(name + ".scale", 1, width, T(1)), tree.add_constant(name + ".shift", 1, width, T(0))};
}

template <class T>
MultiHeadAttention make_attention(ParameterTree<T>& tree, const std::string& name, int width, int heads, int head_dim,
                                  Rng& rng) {
    MultiHeadAttention a;
    a.heads = heads;
    a.head_dim = head_dim;
    a.query = make_linear(tree, name + ".query", width, heads * head_dim, rng);
    a.key = make_linear(tree, name + ".key", width, heads * head_dim, rng);
    a.value = make_linear(tree, name + ".value", width, heads * head_dim, rng);
    a.output = make_linear(tree, name + ".output", heads * head_dim, width, rng);
    return a;
}

inline std::size_t linear_param_count(std::size_t in, std::size_t out) { return in * out + out; }
inline std::size_t feed_forward_param_count(std::size_t in, std::size_t hidden, std::size_t out) {
    return linear_param_count(in, hidden) + linear_param_count(hidden, out);
}
inline std::size_t attention_param_count(std::size_t width, std::size_t heads, std::size_t head_dim) {
    return 3 * linear_param_count(width, heads * head_dim) + linear_param_count(heads * head_dim, width);
}

template <class T>
Var apply(Tape<T>& t, const Linear& l, Var x) {
    return t.add_row(t.matmul(x, t.param(l.weight)), t.param(l.bias));
}

template <class T>
Var apply(Tape<T>& t, const FeedForward& ff, Var x) {
    return apply(t, ff.out, t.swish(apply(t, ff.hidden, x)));
}

template <class T>
Var apply(Tape<T>& t, const LayerNorm& ln, Var x) {
    return t.layer_norm(x, t.param(ln.scale), t.param(ln.shift));
}

// Attention of target rows over source rows. Sources with mask 0 are left
// out of every softmax; an empty mask keeps all of them.
template <class T>
Var apply(Tape<T>& t, const MultiHeadAttention& a, Var targets, Var sources, std::span<const std::uint8_t> mask = {}) {
    const Var q = apply(t, a.query, targets);
    const Var k = apply(t, a.key, sources);
    const Var v = apply(t, a.value, sources);
    const T scale = T(1) / std::sqrt(static_cast<T>(a.head_dim));
    std::vector<Var> heads;
    heads.reserve(a.heads);
    for (int h = 0; h < a.heads; ++h) {
        const auto at = static_cast<Eigen::Index>(h) * a.head_dim;
        const Var qh = t.slice_cols(q, at, a.head_dim);
        const Var kh = t.slice_cols(k, at, a.head_dim);
        const Var vh = t.slice_cols(v, at, a.head_dim);
        const Var w = t.masked_softmax_rows(t.affine(t.matmul_nt(qh, kh), scale), mask);
        heads.push_back(t.matmul(w, vh));
    }
    const Var joined = a.heads == 1 ? heads[0] : t.concat_cols(std::span<const Var>(heads));
    return apply(t, a.output, joined);
}

}  // namespace bcx::nn
