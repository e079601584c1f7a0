#include <gtest/gtest.h>

#include <cmath>

#include "bcx/nn/gradcheck.hpp"
#include "bcx/nn/layers.hpp"
#include "bcx/nn/optim.hpp"

using namespace bcx;
using namespace bcx::nn;

namespace {

using MatD = Matrix<double>;

MatD random_matrix(Rng& rng, int r, int c, double scale = 1.0) {
    MatD m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
    return m;
}

// Reduces any output to a scalar through fixed random weights.
Var project(Tape<double>& t, Var y, std::uint64_t seed) {
    Rng rng(seed);
    return t.sum(t.matmul(y, t.constant(random_matrix(rng, static_cast<int>(t.cols(y)), 1))));
}

double swish_ref(double x) { return x / (1.0 + std::exp(-x)); }

std::vector<double> ff_ref(const ParameterTree<double>& tree, const FeedForward& ff, const std::vector<double>& x) {
    const auto& w1 = tree.value(ff.hidden.weight);
    const auto& b1 = tree.value(ff.hidden.bias);
    const auto& w2 = tree.value(ff.out.weight);
    const auto& b2 = tree.value(ff.out.bias);
    std::vector<double> h(w1.cols()), y(w2.cols());
    for (int j = 0; j < w1.cols(); ++j) {
        double s = b1(0, j);
        for (int i = 0; i < w1.rows(); ++i) s += x[i] * w1(i, j);
        h[j] = swish_ref(s);
    }
    for (int j = 0; j < w2.cols(); ++j) {
        double s = b2(0, j);
        for (int i = 0; i < w2.rows(); ++i) s += h[i] * w2(i, j);
        y[j] = s;
    }
    return y;
}

}  // namespace

TEST(FeedForward, ZeroWeightsGiveZero) {
    ParameterTree<float> tree;
    Rng rng(1);
    const auto ff = make_feed_forward(tree, "ff", 3, 5, 2, rng);
    tree.set_zero();
    Tape<float> t(tree, false);
    Rng r2(2);
    const Var y = apply(t, ff, t.constant(random_matrix(r2, 4, 3).cast<float>()));
    EXPECT_EQ(t.value(y).cwiseAbs().maxCoeff(), 0.0f);
}

TEST(FeedForward, UnitScalarCaseAtZero) {
    ParameterTree<double> tree;
    Rng rng(1);
    const auto ff = make_feed_forward(tree, "ff", 1, 1, 1, rng);
    tree.value(ff.hidden.weight)(0, 0) = 1.0;
    tree.value(ff.out.weight)(0, 0) = 1.0;
    Tape<double> t(tree, false);
    EXPECT_EQ(t.value(apply(t, ff, t.constant(MatD::Zero(1, 1))))(0, 0), 0.0);
}

TEST(FeedForward, MatchesScalarReference) {
    ParameterTree<double> tree;
    Rng rng(3);
    const auto ff = make_feed_forward(tree, "ff", 4, 6, 3, rng);
    for (int i = 0; i < 2; ++i) tree.value(ff.hidden.bias)(0, i) = 0.3 * (i + 1);
    const MatD x = random_matrix(rng, 5, 4, 2.0);
    const auto tree_f = tree.cast<float>();
    Tape<double> t(tree, false);
    Tape<float> tf(tree_f, false);
    const auto& y = t.value(apply(t, ff, t.constant(x)));
    const auto& yf = tf.value(apply(tf, ff, tf.constant(x.cast<float>())));
    for (int r = 0; r < 5; ++r) {
        const auto ref = ff_ref(tree, ff, {x(r, 0), x(r, 1), x(r, 2), x(r, 3)});
        for (int c = 0; c < 3; ++c) {
            EXPECT_NEAR(y(r, c), ref[c], 1e-12);
            EXPECT_NEAR(yf(r, c), ref[c], 1e-6);
        }
    }
}

TEST(LayerNorm, ConstantRowMapsToZero) {
    ParameterTree<double> tree;
    const auto ln = make_layer_norm(tree, "ln", 6);
    Tape<double> t(tree, false);
    const auto& y = t.value(apply(t, ln, t.constant(MatD::Constant(2, 6, 3.7))));
    EXPECT_LE(y.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LayerNorm, StandardizesAndMatchesReference) {
    ParameterTree<double> tree;
    const auto ln = make_layer_norm(tree, "ln", 8);
    Rng rng(4);
    const MatD x = random_matrix(rng, 3, 8, 5.0);
    Tape<double> t(tree, false);
    const auto& y = t.value(apply(t, ln, t.constant(x)));
    for (int r = 0; r < 3; ++r) {
        EXPECT_NEAR(y.row(r).mean(), 0.0, 1e-5);
        EXPECT_NEAR((y.row(r).array() - y.row(r).mean()).square().mean(), 1.0, 1e-5);
    }
    // scalar reference with learnable scale and shift
    for (int c = 0; c < 8; ++c) {
        tree.value(ln.scale)(0, c) = 0.5 + 0.1 * c;
        tree.value(ln.shift)(0, c) = -0.2 * c;
    }
    Tape<double> t2(tree, false);
    const auto& y2 = t2.value(apply(t2, ln, t2.constant(x)));
    for (int r = 0; r < 3; ++r) {
        double mean = 0.0, var = 0.0;
        for (int c = 0; c < 8; ++c) mean += x(r, c) / 8.0;
        for (int c = 0; c < 8; ++c) var += (x(r, c) - mean) * (x(r, c) - mean) / 8.0;
        for (int c = 0; c < 8; ++c) {
            const double ref = (x(r, c) - mean) / std::sqrt(var + 1e-5) * (0.5 + 0.1 * c) - 0.2 * c;
            EXPECT_NEAR(y2(r, c), ref, 1e-12);
        }
    }
}

TEST(MaskedSoftmax, WeightsSumToOneAndMaskedAreZero) {
    ParameterTree<double> tree;
    Tape<double> t(tree, false);
    Rng rng(5);
    const std::vector<std::uint8_t> mask{1, 0, 1, 1, 0, 1};
    const auto& w = t.value(t.masked_softmax_rows(t.constant(random_matrix(rng, 4, 6, 10.0)), mask));
    for (int r = 0; r < 4; ++r) {
        EXPECT_NEAR(w.row(r).sum(), 1.0, 1e-12);
        EXPECT_EQ(w(r, 1), 0.0);
        EXPECT_EQ(w(r, 4), 0.0);
    }
    const std::vector<std::uint8_t> none(6, 0);
    EXPECT_THROW(t.masked_softmax_rows(t.constant(MatD::Zero(1, 6)), none), std::invalid_argument);
    const std::vector<std::uint8_t> short_mask(5, 1);
    EXPECT_THROW(t.masked_softmax_rows(t.constant(MatD::Zero(1, 6)), short_mask), std::invalid_argument);
}

TEST(Attention, AllOnesMaskEqualsUnmasked) {
    ParameterTree<float> tree;
    Rng rng(6);
    const auto att = make_attention(tree, "att", 8, 2, 4, rng);
    const MatD tg = random_matrix(rng, 5, 8), src = random_matrix(rng, 7, 8);
    const std::vector<std::uint8_t> ones(7, 1);
    Tape<float> t(tree, false);
    const auto a = t.value(apply(t, att, t.constant(tg.cast<float>()), t.constant(src.cast<float>())));
    const auto b = t.value(apply(t, att, t.constant(tg.cast<float>()), t.constant(src.cast<float>()), ones));
    EXPECT_EQ(a, b);
}

TEST(Attention, SingleUnmaskedSourceReturnsItsValue) {
    ParameterTree<double> tree;
    Rng rng(7);
    const auto att = make_attention(tree, "att", 6, 3, 2, rng);
    const MatD tg = random_matrix(rng, 4, 6), src = random_matrix(rng, 5, 6);
    std::vector<std::uint8_t> mask(5, 0);
    mask[3] = 1;
    Tape<double> t(tree, false);
    const auto& out = t.value(apply(t, att, t.constant(tg), t.constant(src), mask));
    const MatD v = src.row(3) * tree.value(att.value.weight) + tree.value(att.value.bias);
    const MatD expect = v * tree.value(att.output.weight) + tree.value(att.output.bias);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 6; ++c) EXPECT_NEAR(out(r, c), expect(0, c), 1e-12);
    }
}

TEST(Attention, MaskedSourceHasExactlyZeroInfluence) {
    ParameterTree<double> tree;
    Rng rng(8);
    const auto att = make_attention(tree, "att", 6, 2, 3, rng);
    const MatD tg = random_matrix(rng, 4, 6);
    MatD src = random_matrix(rng, 5, 6);
    const std::vector<std::uint8_t> mask{1, 1, 0, 1, 1};
    const int src_id = tree.add("sources", src);
    auto loss = [&](Tape<double>& t) { return project(t, apply(t, att, t.constant(tg), t.param(src_id), mask), 9); };

    Gradients<double> g(tree);
    Tape<double> t(tree);
    t.backward(loss(t), g);
    EXPECT_EQ(g[src_id].row(2).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GT(g[src_id].row(1).cwiseAbs().maxCoeff(), 0.0);

    double worst = 0.0;
    for (int c = 0; c < 6; ++c) {
        const double saved = tree.value(src_id)(2, c);
        tree.value(src_id)(2, c) = saved + 1e-3;
        Tape<double> up(tree, false);
        const double a = up.value(loss(up))(0, 0);
        tree.value(src_id)(2, c) = saved - 1e-3;
        Tape<double> down(tree, false);
        const double b = down.value(loss(down))(0, 0);
        tree.value(src_id)(2, c) = saved;
        worst = std::max(worst, std::abs(a - b) / 2e-3);
    }
    EXPECT_LE(worst, 1e-12);
}

TEST(Tape, SharedParameterAccumulatesBothPaths) {
    ParameterTree<double> tree;
    const int w = tree.add("w", MatD::Constant(1, 1, 3.0));
    Gradients<double> g(tree);
    Tape<double> t(tree);
    const Var p = t.param(w);
    t.backward(t.sum(t.matmul(p, p)), g);  // d(w^2)/dw = 2w
    EXPECT_EQ(g[w](0, 0), 6.0);
}

TEST(Tape, ShapeErrorsAreReported) {
    ParameterTree<double> tree;
    Tape<double> t(tree);
    EXPECT_THROW(t.matmul(t.constant(MatD::Zero(2, 3)), t.constant(MatD::Zero(2, 3))), std::invalid_argument);
    EXPECT_THROW(t.add(t.constant(MatD::Zero(2, 3)), t.constant(MatD::Zero(3, 2))), std::invalid_argument);
    EXPECT_THROW(t.slice_cols(t.constant(MatD::Zero(2, 3)), 2, 2), std::invalid_argument);
}

TEST(GradCheck, LinearModelIsExact) {
    ParameterTree<double> tree;
    Rng rng(10);
    const auto lin = make_linear(tree, "lin", 5, 3, rng);
    const MatD x = random_matrix(rng, 7, 5);
    const auto r = grad_check(tree, [&](Tape<double>& t) { return project(t, apply(t, lin, t.constant(x)), 11); }, 64, 1);
    EXPECT_EQ(r.probes, 18);
    EXPECT_LE(r.max_rel_error, 1e-10);
}

TEST(GradCheck, Primitives) {
    Rng rng(12);
    const MatD x = random_matrix(rng, 6, 5, 2.0);
    {
        ParameterTree<double> tree;
        const auto ff = make_feed_forward(tree, "ff", 5, 7, 4, rng);
        const auto r = grad_check(tree, [&](Tape<double>& t) { return project(t, apply(t, ff, t.constant(x)), 13); }, 64, 2);
        EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
    }
    {
        ParameterTree<double> tree;
        const auto ln = make_layer_norm(tree, "ln", 5);
        const int xi = tree.add("x", x);
        tree.value(ln.scale) = random_matrix(rng, 1, 5);
        const auto r = grad_check(tree, [&](Tape<double>& t) { return project(t, apply(t, ln, t.param(xi)), 14); }, 64, 3);
        EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
    }
    {
        ParameterTree<double> tree;
        const auto att = make_attention(tree, "att", 5, 2, 3, rng);
        const int tg = tree.add("targets", random_matrix(rng, 3, 5));
        const int src = tree.add("sources", x);
        const std::vector<std::uint8_t> mask{1, 0, 1, 1, 0, 1};
        const auto r = grad_check(
            tree, [&](Tape<double>& t) { return project(t, apply(t, att, t.param(tg), t.param(src), mask), 15); }, 128, 4);
        EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
    }
    {
        ParameterTree<double> tree;
        const int xi = tree.add("x", x);
        auto map = std::make_shared<SparseMap<double>>(3, 6);
        map->insert(0, 1) = 0.5;
        map->insert(0, 4) = 0.5;
        map->insert(2, 5) = 2.0;
        map->makeCompressed();
        const std::vector<double> truth{1.0, -2.0, 0.5, 3.0, 0.1, -0.7};
        const std::vector<std::uint8_t> keep{1, 1, 0, 1, 1, 1};
        Rng wr(16);
        const MatD col = random_matrix(wr, 5, 1);
        const auto r = grad_check(
            tree,
            [&](Tape<double>& t) {
                const Var xv = t.param(xi);
                const Var p = t.matmul(t.swish(xv), t.constant(col));
                Var loss = t.relative_l2(p, truth, keep);
                loss = t.add(loss, project(t, t.sparse_left(map, xv), 17));
                loss = t.add(loss, project(t, t.concat_cols({t.slice_cols(xv, 1, 2), t.affine(xv, 0.5, 1.0)}), 18));
                return loss;
            },
            64, 5);
        EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
    }
}

TEST(RelativeL2, KeepMaskExcludesEntries) {
    ParameterTree<double> tree;
    Tape<double> t(tree, false);
    const std::vector<double> truth{3.0, 4.0, 100.0};
    const std::vector<std::uint8_t> keep{1, 1, 0};
    MatD p(3, 1);
    p << 6.0, 8.0, -5.0;
    EXPECT_DOUBLE_EQ(t.value(t.relative_l2(t.constant(p), truth, keep))(0, 0), 1.0);
}

TEST(AdamW, ZeroGradientAndDecayLeaveParametersUnchanged) {
    ParameterTree<float> tree;
    Rng rng(20);
    make_linear(tree, "lin", 4, 3, rng);
    const auto before = tree.value(0);
    Gradients<float> g(tree);
    AdamWConfig c;
    c.weight_decay = 0.0;
    adamw_step(tree, g, 1e-3, c);
    EXPECT_EQ(tree.value(0), before);
    EXPECT_EQ(tree.step(), 1);
}

TEST(AdamW, FirstStepOnScalar) {
    ParameterTree<double> tree;
    const int w = tree.add("w", MatD::Constant(1, 1, 0.7));
    Gradients<double> g(tree);
    g[w](0, 0) = 1.0;
    AdamWConfig c;
    c.weight_decay = 0.0;
    c.clip_ratio = 0.0;
    adamw_step(tree, g, 1e-3, c);
    EXPECT_NEAR(tree.value(w)(0, 0), 0.7 - 1e-3 / (1.0 + 1e-8), 1e-15);
}

TEST(AdamW, DecoupledDecay) {
    ParameterTree<double> tree;
    const int w = tree.add("w", MatD::Constant(1, 1, 2.0));
    Gradients<double> g(tree);
    AdamWConfig c;
    c.weight_decay = 0.1;
    adamw_step(tree, g, 0.5, c);
    EXPECT_DOUBLE_EQ(tree.value(w)(0, 0), 2.0 * (1.0 - 0.05));
}

TEST(Clipping, HugeGradientIsScaledToLimit) {
    ParameterTree<double> tree;
    Rng rng(21);
    const int w = tree.add("w", random_matrix(rng, 3, 4));
    Gradients<double> g(tree);
    g[w] = random_matrix(rng, 3, 4, 1e6);
    clip_gradients(tree, g, 0.5);
    EXPECT_NEAR(g[w].norm(), 0.5 * (tree.value(w).norm() + 1e-3), 1e-6);
    // small gradients pass untouched
    Gradients<double> small(tree);
    small[w](0, 0) = 1e-3;
    clip_gradients(tree, small, 0.5);
    EXPECT_EQ(small[w](0, 0), 1e-3);
}

TEST(Schedule, WarmupPeakAndEnd) {
    EXPECT_DOUBLE_EQ(lr_schedule(0, 1000), 1e-5);
    EXPECT_NEAR(lr_schedule(50, 1000), 2e-4, 1e-15);
    EXPECT_NEAR(lr_schedule(1000, 1000), 1e-5, 1e-12);
    EXPECT_NEAR(lr_schedule(25, 1000), 0.5 * (1e-5 + 2e-4), 1e-15);
    double prev = lr_schedule(50, 1000);
    for (int s = 51; s <= 1000; ++s) {
        const double lr = lr_schedule(s, 1000);
        EXPECT_LE(lr, prev + 1e-18);
        prev = lr;
    }
}

