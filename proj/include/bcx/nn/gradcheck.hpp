#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "bcx/nn/tape.hpp"

namespace bcx::nn {

struct GradCheckReport {
    double max_rel_error = 0.0;
    int probes = 0;
    std::string worst;  // parameter name of the worst probe
};

inline double grad_rel_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Central differences (h = 1e-4 * max(1, |theta|)) on up to `probes` randomly
// chosen scalars versus the tape gradient. `build` records the scalar loss
// on the tape it is handed and returns it.
template <class Build>
GradCheckReport grad_check(ParameterTree<double>& tree, Build&& build, int probes, std::uint64_t seed) {
    Gradients<double> grads(tree);
    {
        Tape<double> tape(tree);
        const Var loss = build(tape);
        tape.backward(loss, grads);
    }
    auto eval = [&] {
        Tape<double> tape(tree, false);
        return tape.value(build(tape))(0, 0);
    };

    std::vector<std::pair<int, Eigen::Index>> all;
    for (std::size_t i = 0; i < tree.size(); ++i) {
        for (Eigen::Index k = 0; k < tree.value(static_cast<int>(i)).size(); ++k) all.emplace_back(static_cast<int>(i), k);
    }
    Rng rng(seed);
    for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[rng.below(i)]);
    if (static_cast<int>(all.size()) > probes) all.resize(probes);

    GradCheckReport report;
    for (auto [p, k] : all) {
        double& theta = tree.value(p).data()[k];
        const double saved = theta;
        const double h = 1e-4 * std::max(1.0, std::abs(saved));
        theta = saved + h;
        const double up = eval();
        theta = saved - h;
        const double down = eval();
        theta = saved;
        const double err = grad_rel_error(grads[p].data()[k], (up - down) / (2.0 * h));
        if (err > report.max_rel_error) {
            report.max_rel_error = err;
            report.worst = tree.name(p);
        }
        ++report.probes;
    }
    return report;
}

}  // namespace bcx::nn
