#include <gtest/gtest.h>

#include <cmath>

#include "bcx/datagen.hpp"
#include "bcx/extender.hpp"
#include "bcx/solver.hpp"

using namespace bcx;

namespace {

UnifiedBoundaryField random_field(const Mesh& m, std::uint64_t seed) {
    Rng rng(seed);
    RawBoundarySpec raw = uniform_spec(m.boundary_loop.size(), BcType::dirichlet);
    for (std::size_t j = 0; j < raw.size(); ++j) {
        raw.types[j] = static_cast<BcType>(j * 3 / raw.size());
        raw.gamma_d[j] = rng.uniform(-2.0, 2.0);
        raw.gamma_n[j] = rng.uniform(-2.0, 2.0);
        raw.gamma_r[j] = rng.uniform(-2.0, 2.0);
        raw.alpha_r[j] = rng.uniform(0.2, 0.6);
    }
    return merge_normalize(raw, NormalizationStats{});
}

}  // namespace

TEST(ZeroExtension, InteriorZeroBoundaryExact) {
    const Mesh m = make_disk_mesh(4);
    const auto field = random_field(m, 1);
    const auto e = zero_extension(m, field);
    ASSERT_EQ(e.channels, 4u);
    std::vector<char> on_boundary(m.nodes.size(), 0);
    for (std::size_t j = 0; j < field.size(); ++j) {
        const auto i = static_cast<std::size_t>(m.boundary_loop[j]);
        on_boundary[i] = 1;
        EXPECT_EQ(e.at(i, 0), field.alpha[j]);
        EXPECT_EQ(e.at(i, 1), field.beta[j]);
        EXPECT_EQ(e.at(i, 2), field.gamma[j]);
        EXPECT_EQ(e.at(i, 3), 1.0);
    }
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        if (on_boundary[i]) continue;
        for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(e.at(i, c), 0.0);
    }
}

TEST(ZeroExtension, DirichletZeroIsDistinguishableFromPadding) {
    const Mesh m = make_square_mesh(4);
    UnifiedBoundaryField field = merge_normalize(uniform_spec(m.boundary_loop.size(), BcType::dirichlet), {});
    const auto e = zero_extension(m, field);
    const auto b = static_cast<std::size_t>(m.boundary_loop[0]);
    EXPECT_EQ(e.at(b, 0), 1.0);
    EXPECT_EQ(e.at(b, 1), 0.0);
    EXPECT_EQ(e.at(b, 2), 0.0);
    EXPECT_EQ(e.at(b, 3), 1.0);
}

TEST(HarmonicStack, ConstantChannels) {
    const Mesh m = make_disk_mesh(5);
    UnifiedBoundaryField field = merge_normalize(uniform_spec(m.boundary_loop.size(), BcType::dirichlet), {});
    for (auto& g : field.gamma) g = 2.5;
    const auto e = harmonic_extension_stack(m, field);
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        EXPECT_NEAR(e.at(i, 0), 1.0, 1e-9);
        EXPECT_NEAR(e.at(i, 1), 0.0, 1e-9);
        EXPECT_NEAR(e.at(i, 2), 2.5, 1e-9);
    }
}

TEST(HarmonicStack, BoundaryRestrictionAndRefinedOracle) {
    // Field given by a smooth function of position, so the same data can be
    // placed on a coarse and a fine mesh.
    auto g = [](Point p) { return std::sin(2.0 * p.x) * std::exp(p.y); };
    double prev = 0.0;
    const Mesh fine = make_square_mesh(65);
    std::vector<double> gf;
    for (auto i : fine.boundary_loop) gf.push_back(g(fine.nodes[i]));
    const auto ref = harmonic_extension(fine, gf);
    for (int n : {9, 17, 33}) {
        const Mesh m = make_square_mesh(n);
        UnifiedBoundaryField field = merge_normalize(uniform_spec(m.boundary_loop.size(), BcType::dirichlet), {});
        for (std::size_t j = 0; j < field.size(); ++j) field.gamma[j] = g(m.nodes[m.boundary_loop[j]]);
        const auto e = harmonic_extension_stack(m, field);
        for (std::size_t j = 0; j < field.size(); ++j) {
            EXPECT_NEAR(e.at(m.boundary_loop[j], 2), field.gamma[j], 1e-12);
        }
        // coarse nodes coincide with fine nodes: compare nodewise
        const int step = 64 / (n - 1);
        double err = 0.0;
        for (int jy = 0; jy < n; ++jy) {
            for (int ix = 0; ix < n; ++ix) {
                const double d = e.at(ix + jy * n, 2) - ref[ix * step + jy * step * 65];
                err = std::max(err, std::abs(d));
            }
        }
        const double h = 2.0 / (n - 1);
        EXPECT_LE(err, 2.0 * h * h);
        if (prev > 0.0) {
            EXPECT_LT(err, prev);
        }
        prev = err;
    }
}
