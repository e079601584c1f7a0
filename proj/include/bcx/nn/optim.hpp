#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bcx/nn/parameters.hpp"

namespace bcx::nn {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    double clip_ratio = 0.5;  // <= 0 disables clipping
};

struct ScheduleConfig {
    double lr_start = 1e-5;
    double lr_peak = 2e-4;
    double lr_end = 1e-5;
    double warmup_fraction = 0.05;
};

inline constexpr double agc_eps = 1e-3;

// Linear warmup to the peak over the first warmup_fraction of the steps, then
// cosine decay to lr_end at total_steps.
inline double lr_schedule(std::int64_t step, std::int64_t total_steps, const ScheduleConfig& c = {}) {
    if (total_steps <= 0) return c.lr_start;
    const double s = static_cast<double>(std::min(step, total_steps));
    const double total = static_cast<double>(total_steps);
    const double warm = c.warmup_fraction * total;
    if (s < warm) return c.lr_start + (c.lr_peak - c.lr_start) * s / warm;
    const double span = total - warm;
    const double progress = span > 0 ? (s - warm) / span : 1.0;
    return c.lr_end + 0.5 * (c.lr_peak - c.lr_end) * (1.0 + std::cos(std::numbers::pi * progress));
}

// Per-tensor adaptive gradient clipping: ||g|| <= ratio * (||theta|| + 1e-3).
template <class T>
void clip_gradients(const ParameterTree<T>& tree, Gradients<T>& grads, double ratio) {
    if (ratio <= 0) return;
    for (std::size_t i = 0; i < tree.size(); ++i) {
        const double gn = static_cast<double>(grads[i].norm());
        const double limit = ratio * (static_cast<double>(tree.value(i).norm()) + agc_eps);
        if (gn > limit) grads[i] *= static_cast<T>(limit / gn);
    }
}

template <class T>
void adamw_step(ParameterTree<T>& tree, Gradients<T>& grads, double lr, const AdamWConfig& c = {}) {
    clip_gradients(tree, grads, c.clip_ratio);
    const std::int64_t t = tree.step() + 1;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < tree.size(); ++i) {
        auto& w = tree.value(i);
        auto& m = tree.first_moment(i);
        auto& v = tree.second_moment(i);
        const auto& g = grads[i];
        m = static_cast<T>(c.beta1) * m + static_cast<T>(1.0 - c.beta1) * g;
        v = static_cast<T>(c.beta2) * v + static_cast<T>(1.0 - c.beta2) * g.cwiseProduct(g);
        w *= static_cast<T>(1.0 - lr * c.weight_decay);
        for (Eigen::Index k = 0; k < w.size(); ++k) {
            const double mh = m.data()[k] / bc1;
            const double vh = v.data()[k] / bc2;
            w.data()[k] -= static_cast<T>(lr * mh / (std::sqrt(vh) + c.eps));
        }
    }
    tree.set_step(t);
}

}  // namespace bcx::nn
