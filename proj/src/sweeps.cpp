#include "bcx/sweeps.hpp"

#include "bcx/error.hpp"

namespace bcx {

std::vector<ScalingPoint> data_scaling(const Dataset& ds, const ModelConfig& model, const TrainConfig& cfg,
                                       std::span<const int> sizes, std::uint64_t seed, int threads,
                                       const ProgressFn& progress) {
    std::vector<ScalingPoint> out;
    for (int n : sizes) {
        if (n < 1 || static_cast<std::size_t>(n) > ds.n_train()) {
            throw ConfigError("data_scaling: train size " + std::to_string(n) + " outside [1, " +
                              std::to_string(ds.n_train()) + "]");
        }
        const auto tr = train_indices(ds, static_cast<std::size_t>(n));
        ScalingPoint p;
        p.train_samples = n;
        Model init = init_model(model, compute_feature_stats(ds, tr), seed, cfg.coarse_seed);
        p.run = train(ds, std::move(init), cfg, tr, val_indices(ds), seed, progress);
        EvalOptions opts;
        opts.threads = threads;
        p.test = evaluate(p.run.best, ds, test_indices(ds), opts);
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<SweepPoint> eval_noise(const Model& model, const Dataset& ds, std::span<const std::size_t> indices,
                                   std::span<const double> ratios, std::uint64_t noise_seed, int threads) {
    std::vector<SweepPoint> out;
    for (double ratio : ratios) {
        EvalOptions opts;
        opts.noise_ratio = ratio;
        opts.noise_seed = noise_seed;
        opts.threads = threads;
        out.push_back({ratio, evaluate(model, ds, indices, opts)});
    }
    return out;
}

std::vector<SweepPoint> eval_resolution(const Model& model, const Dataset& ds, std::span<const std::size_t> indices,
                                        std::span<const int> strides, int threads) {
    std::vector<SweepPoint> out;
    for (int k : strides) {
        EvalOptions opts;
        opts.boundary_stride = k;
        opts.threads = threads;
        out.push_back({static_cast<double>(k), evaluate(model, ds, indices, opts)});
    }
    return out;
}

void reset_optimizer_state(Model& model) {
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        model.params.first_moment(static_cast<int>(i)).setZero();
        model.params.second_moment(static_cast<int>(i)).setZero();
    }
    model.params.set_step(0);
}

FinetuneResult finetune(const Model& source, const Dataset& ds, std::size_t n_samples, const TrainConfig& cfg,
                        std::uint64_t seed, int threads, const ProgressFn& progress) {
    if (n_samples < 1 || n_samples > ds.n_train()) {
        throw ConfigError("finetune: samples must lie in [1, " + std::to_string(ds.n_train()) + "]");
    }
    validate(source.config.core, ds.mesh.nodes.size());
    const auto tr = train_indices(ds, n_samples);
    const auto va = val_indices(ds);
    const auto te = test_indices(ds);
    EvalOptions opts;
    opts.threads = threads;

    FinetuneResult r;
    Model start = source;
    reset_optimizer_state(start);
    r.finetuned = train(ds, std::move(start), cfg, tr, va, seed, progress);
    r.finetuned_test = evaluate(r.finetuned.best, ds, te, opts);

    Model fresh = init_model(source.config, compute_feature_stats(ds, tr), seed, source.coarse_seed);
    r.control = train(ds, std::move(fresh), cfg, tr, va, seed, progress);
    r.control_test = evaluate(r.control.best, ds, te, opts);
    return r;
}

json scaling_report(const std::vector<ScalingPoint>& points) {
    json pts = json::array();
    for (const auto& p : points) {
        pts.push_back({{"train_samples", p.train_samples},
                       {"best_epoch", p.run.best_epoch},
                       {"best_val_median", p.run.best_val},
                       {"test", to_json(p.test)}});
    }
    return {{"sweep", "data-scaling"}, {"points", pts}};
}

json sweep_report(const char* kind, const char* parameter, const std::vector<SweepPoint>& points) {
    json pts = json::array();
    const double base = points.empty() ? 0.0 : points.front().report.median;
    for (const auto& p : points) {
        json e = {{parameter, p.parameter}, {"test", to_json(p.report)}};
        if (base > 0.0) e["median_ratio_to_first"] = p.report.median / base;
        pts.push_back(e);
    }
    return {{"sweep", kind}, {"points", pts}};
}

json finetune_report(const FinetuneResult& r, std::size_t n_samples) {
    return {{"train_samples", n_samples},
            {"finetuned", {{"best_epoch", r.finetuned.best_epoch}, {"test", to_json(r.finetuned_test)}}},
            {"control", {{"best_epoch", r.control.best_epoch}, {"test", to_json(r.control_test)}}},
            {"finetuned_not_worse", r.finetuned_test.median <= r.control_test.median}};
}

}  // namespace bcx
