#include "bcx/traineval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "bcx/error.hpp"
#include "bcx/json_util.hpp"

namespace bcx {

std::size_t excluded_count(std::size_t n, double fraction) {
    const double m = std::ceil(fraction * static_cast<double>(n) - 1e-9);
    return std::min(n, static_cast<std::size_t>(std::max(0.0, m)));
}

std::vector<std::uint8_t> exclusion_keep_mask(std::span<const double> truth, double fraction) {
    std::vector<std::size_t> order(truth.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t m = excluded_count(truth.size(), fraction);
    std::partial_sort(order.begin(), order.begin() + m, order.end(), [&](std::size_t a, std::size_t b) {
        const double x = std::abs(truth[a]), y = std::abs(truth[b]);
        return x != y ? x > y : a < b;
    });
    std::vector<std::uint8_t> keep(truth.size(), 1);
    for (std::size_t k = 0; k < m; ++k) keep[order[k]] = 0;
    return keep;
}

double relative_l2_excluded(std::span<const double> pred, std::span<const double> truth, double fraction) {
    if (pred.size() != truth.size()) throw std::invalid_argument("relative_l2_excluded: length mismatch");
    const auto keep = exclusion_keep_mask(truth, fraction);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!keep[i]) continue;
        num += (pred[i] - truth[i]) * (pred[i] - truth[i]);
        den += truth[i] * truth[i];
    }
    if (!(den > 0.0)) throw std::invalid_argument("relative_l2_excluded: zero norm on retained entries");
    return std::sqrt(num / den);
}

double lower_median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("lower_median: empty input");
    const std::size_t k = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

double mean_of(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean_of: empty input");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

ChamferRecall chamfer_and_recall(std::span<const Point> truth, std::span<const Point> pred) {
    if (truth.empty() || pred.empty()) throw std::invalid_argument("chamfer_and_recall: empty point set");
    const double radius = 0.02 * metric_box_diameter;
    double total = 0.0;
    std::size_t hits = 0;
    for (const Point& t : truth) {
        double best = std::numeric_limits<double>::infinity();
        for (const Point& p : pred) best = std::min(best, distance(t, p));
        total += best;
        if (best <= radius) ++hits;
    }
    const auto n = static_cast<double>(truth.size());
    return {total / n / metric_box_diameter, static_cast<double>(hits) / n};
}

std::vector<Point> singularity_points(const Mesh& mesh, std::span<const double> field, double fraction) {
    const auto keep = exclusion_keep_mask(field, fraction);
    std::vector<Point> pts;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) pts.push_back(mesh.nodes[i]);
    }
    return pts;
}

std::pair<double, double> excluded_mean_std(const std::vector<const std::vector<double>*>& fields, double fraction) {
    double sum = 0.0;
    std::size_t n = 0;
    std::vector<std::vector<std::uint8_t>> keeps;
    keeps.reserve(fields.size());
    for (const auto* f : fields) {
        keeps.push_back(exclusion_keep_mask(*f, fraction));
        for (std::size_t i = 0; i < f->size(); ++i) {
            if (keeps.back()[i]) {
                sum += (*f)[i];
                ++n;
            }
        }
    }
    if (n == 0) return {0.0, 1.0};
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t k = 0; k < fields.size(); ++k) {
        const auto& f = *fields[k];
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (keeps[k][i]) ss += (f[i] - mean) * (f[i] - mean);
        }
    }
    return {mean, std::max(std::sqrt(ss / static_cast<double>(n)), feature_sigma_floor)};
}

FeatureStats compute_feature_stats(const Dataset& ds, std::span<const std::size_t> indices, double fraction) {
    std::vector<const std::vector<double>*> fs, us;
    for (auto i : indices) {
        fs.push_back(&ds.samples.at(i).f);
        us.push_back(&ds.samples.at(i).u);
    }
    FeatureStats s;
    std::tie(s.f_mean, s.f_std) = excluded_mean_std(fs, fraction);
    std::tie(s.u_mean, s.u_std) = excluded_mean_std(us, fraction);
    return s;
}

json to_json(const FeatureStats& s) {
    return {{"f_mean", s.f_mean}, {"f_std", s.f_std}, {"u_mean", s.u_mean}, {"u_std", s.u_std}};
}

FeatureStats feature_stats_from_json(const json& j) {
    try {
        return {j.at("f_mean").get<double>(), j.at("f_std").get<double>(), j.at("u_mean").get<double>(),
                j.at("u_std").get<double>()};
    } catch (const json::exception& e) {
        throw DataError(DataError::Kind::manifest, std::string("malformed feature stats: ") + e.what());
    }
}

// --- configs ---------------------------------------------------------------

json to_json(const ModelConfig& c) {
    const auto& e = c.extender;
    const auto& k = c.core;
    return {{"extender",
             {{"kind", to_string(e.kind)},
              {"d_psi", e.d_psi},
              {"latent", e.latent},
              {"blocks", e.blocks},
              {"heads", e.heads},
              {"head_dim", e.head_dim},
              {"mask_ratio", e.mask_ratio},
              {"single_head", e.single_head},
              {"no_initial_ff", e.no_initial_ff},
              {"no_intermediate_ff", e.no_intermediate_ff},
              {"no_final_ff", e.no_final_ff},
              {"no_residual", e.no_residual}}},
            {"core",
             {{"coarse", k.coarse},
              {"latent", k.latent},
              {"blocks", k.blocks},
              {"heads", k.heads},
              {"head_dim", k.head_dim},
              {"decoder_k", k.decoder_k}}}};
}

json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"weight_decay", c.adamw.weight_decay},
            {"clip_ratio", c.adamw.clip_ratio},
            {"beta1", c.adamw.beta1},
            {"beta2", c.adamw.beta2},
            {"adam_eps", c.adamw.eps},
            {"lr_start", c.schedule.lr_start},
            {"lr_peak", c.schedule.lr_peak},
            {"lr_end", c.schedule.lr_end},
            {"warmup_fraction", c.schedule.warmup_fraction},
            {"coarse_seed", c.coarse_seed}};
}

ModelConfig model_config_from_json(const json& j, const std::string& path) {
    ModelConfig c;
    ObjectReader r(j, path);
    {
        auto e = r.child("extender");
        std::string kind = to_string(c.extender.kind);
        e.read("kind", kind);
        try {
            c.extender.kind = parse_extender_kind(kind);
        } catch (const ConfigError& err) {
            throw ConfigError(e.path() + ".kind: " + err.what());
        }
        e.read("d_psi", c.extender.d_psi);
        e.read("latent", c.extender.latent);
        e.read("blocks", c.extender.blocks);
        e.read("heads", c.extender.heads);
        e.read("head_dim", c.extender.head_dim);
        e.read("mask_ratio", c.extender.mask_ratio);
        e.read("single_head", c.extender.single_head);
        e.read("no_initial_ff", c.extender.no_initial_ff);
        e.read("no_intermediate_ff", c.extender.no_intermediate_ff);
        e.read("no_final_ff", c.extender.no_final_ff);
        e.read("no_residual", c.extender.no_residual);
        e.finish();
    }
    {
        auto k = r.child("core");
        k.read("coarse", c.core.coarse);
        k.read("latent", c.core.latent);
        k.read("blocks", c.core.blocks);
        k.read("heads", c.core.heads);
        k.read("head_dim", c.core.head_dim);
        k.read("decoder_k", c.core.decoder_k);
        k.finish();
    }
    r.finish();
    validate(c.extender);
    return c;
}

TrainConfig train_config_from_json(const json& j, const std::string& path) {
    TrainConfig c;
    ObjectReader r(j, path);
    r.read("epochs", c.epochs);
    r.read("batch_size", c.batch_size);
    r.read("weight_decay", c.adamw.weight_decay);
    r.read("clip_ratio", c.adamw.clip_ratio);
    r.read("beta1", c.adamw.beta1);
    r.read("beta2", c.adamw.beta2);
    r.read("adam_eps", c.adamw.eps);
    r.read("lr_start", c.schedule.lr_start);
    r.read("lr_peak", c.schedule.lr_peak);
    r.read("lr_end", c.schedule.lr_end);
    r.read("warmup_fraction", c.schedule.warmup_fraction);
    r.read("coarse_seed", c.coarse_seed);
    r.finish();
    if (c.epochs < 0) throw ConfigError(path + ".epochs: must be >= 0");
    if (c.batch_size < 1) throw ConfigError(path + ".batch_size: must be >= 1");
    if (!(c.schedule.warmup_fraction >= 0.0 && c.schedule.warmup_fraction <= 1.0)) {
        throw ConfigError(path + ".warmup_fraction: must lie in [0, 1]");
    }
    if (!(c.schedule.lr_start >= 0.0 && c.schedule.lr_peak >= 0.0 && c.schedule.lr_end >= 0.0)) {
        throw ConfigError(path + ": learning rates must be non-negative");
    }
    return c;
}

// --- model and data --------------------------------------------------------

Model init_model(const ModelConfig& config, const FeatureStats& stats, std::uint64_t seed, std::uint64_t coarse_seed) {
    validate(config.extender);
    Model m;
    m.config = config;
    m.stats = stats;
    m.coarse_seed = coarse_seed;
    m.layout = build_model(m.params, config, seed);
    return m;
}

nn::Matrix<float> boundary_features(const Mesh& mesh, const UnifiedBoundaryField& field, int stride) {
    if (stride < 1) throw std::invalid_argument("boundary_features: stride must be >= 1");
    const std::size_t b = mesh.boundary_loop.size();
    const auto rows = static_cast<Eigen::Index>((b + stride - 1) / stride);
    nn::Matrix<float> m(rows, boundary_feature_count);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t j = static_cast<std::size_t>(r) * stride;
        const Point p = mesh.nodes[mesh.boundary_loop[j]];
        const Point n = mesh.boundary_normals[j];
        const double row[] = {p.x, p.y, n.x, n.y, field.alpha[j], field.beta[j], field.gamma[j]};
        for (int c = 0; c < boundary_feature_count; ++c) m(r, c) = static_cast<float>(row[c]);
    }
    return m;
}

ModelInput<float> make_input(const Mesh& mesh, const Model& model, std::span<const double> f,
                             const UnifiedBoundaryField& field, int stride) {
    const std::size_t n = mesh.nodes.size();
    ModelInput<float> in;
    in.fine.resize(static_cast<Eigen::Index>(n), fine_feature_count);
    for (std::size_t i = 0; i < n; ++i) {
        in.fine(i, 0) = static_cast<float>(mesh.nodes[i].x);
        in.fine(i, 1) = static_cast<float>(mesh.nodes[i].y);
        in.fine(i, 2) = static_cast<float>(mesh.sdf[i]);
        in.fine(i, 3) = static_cast<float>((f[i] - model.stats.f_mean) / model.stats.f_std);
    }
    const auto kind = model.config.extender.kind;
    if (kind == ExtenderKind::learned) {
        in.boundary = boundary_features(mesh, field, stride);
    } else {
        if (stride != 1) {
            throw ConfigError("boundary subsampling applies to the learned extender only (kind " + to_string(kind) + ")");
        }
        const auto ext = basic_extension(kind, mesh, field);
        in.psi_fine.resize(static_cast<Eigen::Index>(ext.nodes), static_cast<Eigen::Index>(ext.channels));
        for (std::size_t i = 0; i < ext.data.size(); ++i) in.psi_fine.data()[i] = static_cast<float>(ext.data[i]);
    }
    return in;
}

namespace {

ModelContext<float> context_for(const Mesh& mesh, const Model& model, MeshOperators& ops) {
    validate(model.config.core, mesh.nodes.size());
    ops = build_mesh_operators(mesh, model.config.core.coarse, model.config.core.decoder_k, model.coarse_seed);
    return make_context<float>(mesh, ops, model.stats.u_mean, model.stats.u_std);
}

}  // namespace

PreparedData prepare(const Dataset& ds, const Model& model, std::span<const std::size_t> indices, int threads) {
    PreparedData p;
    p.dataset = &ds;
    p.indices.assign(indices.begin(), indices.end());
    p.context = context_for(ds.mesh, model, p.ops);
    p.inputs.resize(indices.size());
    p.targets.resize(indices.size());
    p.keep.resize(indices.size());
    parallel_for(indices.size(), threads, [&](std::size_t k) {
        const auto& s = ds.samples.at(indices[k]);
        p.inputs[k] = make_input(ds.mesh, model, s.f, s.unified);
        p.targets[k].assign(s.u.begin(), s.u.end());
        p.keep[k] = exclusion_keep_mask(s.u, loss_exclusion_fraction);
    });
    return p;
}

std::vector<double> predict(const Model& model, const ModelContext<float>& ctx, const ModelInput<float>& in) {
    nn::Tape<float> t(model.params, false);
    const auto& v = t.value(model_forward(t, model.layout, model.config, ctx, in));
    return std::vector<double>(v.data(), v.data() + v.size());
}

// --- training --------------------------------------------------------------

namespace {

double validation_error(const Model& model, const PreparedData& val) {
    std::vector<double> errs;
    errs.reserve(val.inputs.size());
    for (std::size_t k = 0; k < val.inputs.size(); ++k) {
        const auto pred = predict(model, val.context, val.inputs[k]);
        errs.push_back(relative_l2_excluded(pred, val.dataset->samples.at(val.indices[k]).u));
    }
    return lower_median(std::move(errs));
}

}  // namespace

TrainResult train(const Dataset& ds, Model init, const TrainConfig& cfg, std::span<const std::size_t> train_idx,
                  std::span<const std::size_t> val_idx, std::uint64_t seed, const ProgressFn& progress) {
    if (train_idx.empty()) throw ConfigError("train: no training samples");
    if (val_idx.empty()) throw ConfigError("train: no validation samples");
    const auto start = std::chrono::steady_clock::now();

    Model model = std::move(init);
    const PreparedData tr = prepare(ds, model, train_idx);
    const PreparedData va = prepare(ds, model, val_idx);

    TrainResult res;
    res.best = model;
    res.best_val = validation_error(model, va);
    res.best_epoch = 0;

    Rng shuffle_rng(derive_seed(seed, 1));
    Rng mask_rng(derive_seed(seed, 2));
    const std::size_t n = train_idx.size();
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    const std::int64_t steps_per_epoch = static_cast<std::int64_t>((n + bs - 1) / bs);
    const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
    const auto& ext = model.config.extender;
    const bool masked = ext.kind == ExtenderKind::learned && ext.mask_ratio > 0.0;
    const std::size_t sources = ds.mesh.boundary_loop.size();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    nn::Gradients<float> grads(model.params);
    std::int64_t step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        double loss_sum = 0.0;
        double lr = 0.0;
        for (std::size_t b0 = 0; b0 < n; b0 += bs) {
            const std::size_t b1 = std::min(n, b0 + bs);
            const float weight = 1.0f / static_cast<float>(b1 - b0);
            grads.set_zero();
            for (std::size_t q = b0; q < b1; ++q) {
                const std::size_t k = order[q];
                nn::Tape<float> t(model.params);
                BlockMasks masks;
                if (masked) masks = draw_block_masks(mask_rng, ext.blocks, sources, ext.mask_ratio);
                const auto pred = model_forward(t, model.layout, model.config, tr.context, tr.inputs[k], masks);
                const auto loss = t.relative_l2(pred, tr.targets[k], tr.keep[k]);
                const double value = t.value(loss)(0, 0);
                if (!std::isfinite(value)) {
                    throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                                          std::to_string(step) + ", sample " + std::to_string(train_idx[k]));
                }
                loss_sum += value;
                t.backward(loss, grads, weight);
            }
            if (!grads.all_finite()) {
                throw DivergenceError("non-finite gradient at epoch " + std::to_string(epoch) + ", step " +
                                      std::to_string(step));
            }
            lr = nn::lr_schedule(step, total_steps, cfg.schedule);
            nn::adamw_step(model.params, grads, lr, cfg.adamw);
            ++step;
            if (!model.params.all_finite()) {
                throw DivergenceError("non-finite parameter after step " + std::to_string(step) + " (epoch " +
                                      std::to_string(epoch) + ", lr " + std::to_string(lr) + ")");
            }
        }
        HistoryRow row{epoch, loss_sum / static_cast<double>(n), validation_error(model, va), lr};
        res.history.push_back(row);
        if (row.val_error < res.best_val) {
            res.best_val = row.val_error;
            res.best_epoch = epoch;
            res.best = model;
        }
        if (progress) progress(row);
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

std::string history_csv(const std::vector<HistoryRow>& rows) {
    std::ostringstream out;
    out.precision(9);
    out << "epoch,train_loss,val_error,lr\n";
    for (const auto& r : rows) out << r.epoch << ',' << r.train_loss << ',' << r.val_error << ',' << r.lr << '\n';
    return out.str();
}

// --- evaluation ------------------------------------------------------------

std::vector<double> add_gamma_noise(UnifiedBoundaryField& field, double ratio, Rng& rng) {
    std::vector<double> noise(field.size(), 0.0);
    if (ratio <= 0.0 || field.size() == 0) return noise;
    double power = 0.0;
    for (double g : field.gamma) power += g * g;
    power /= static_cast<double>(field.size());
    const double sigma = std::sqrt(ratio * power);
    for (std::size_t j = 0; j < field.size(); ++j) {
        noise[j] = sigma * rng.normal();
        field.gamma[j] += noise[j];
    }
    return noise;
}

EvalReport evaluate(const Model& model, const Dataset& ds, std::span<const std::size_t> indices,
                    const EvalOptions& opts) {
    if (indices.empty()) throw ConfigError("evaluate: no samples");
    if (opts.noise_ratio < 0.0) throw ConfigError("evaluate: noise ratio must be non-negative");
    MeshOperators ops;
    const auto ctx = context_for(ds.mesh, model, ops);
    const std::size_t m = indices.size();
    std::vector<double> errors(m), chamfer(m), recall(m), noise_power(m), signal_power(m);
    parallel_for(m, opts.threads, [&](std::size_t k) {
        const auto& s = ds.samples.at(indices[k]);
        UnifiedBoundaryField field = s.unified;
        if (opts.noise_ratio > 0.0) {
            Rng rng(derive_seed(opts.noise_seed, indices[k]));
            for (double g : field.gamma) signal_power[k] += g * g;
            const auto noise = add_gamma_noise(field, opts.noise_ratio, rng);
            for (double z : noise) noise_power[k] += z * z;
        }
        const auto in = make_input(ds.mesh, model, s.f, field, opts.boundary_stride);
        const auto pred = predict(model, ctx, in);
        errors[k] = relative_l2_excluded(pred, s.u);
        const auto cr = chamfer_and_recall(singularity_points(ds.mesh, s.u), singularity_points(ds.mesh, pred));
        chamfer[k] = cr.chamfer;
        recall[k] = cr.recall;
    });
    EvalReport r;
    r.errors = errors;
    r.median = lower_median(errors);
    r.mean = mean_of(errors);
    r.chamfer = mean_of(chamfer);
    r.recall = mean_of(recall);
    double np = 0.0, sp = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        np += noise_power[k];
        sp += signal_power[k];
    }
    r.realized_noise_ratio = sp > 0.0 ? np / sp : 0.0;
    return r;
}

json to_json(const EvalReport& r) {
    return {{"samples", r.errors.size()},
            {"median_rel_l2", r.median},
            {"mean_rel_l2", r.mean},
            {"chamfer", r.chamfer},
            {"recall", r.recall},
            {"realized_noise_ratio", r.realized_noise_ratio},
            {"rel_l2", r.errors}};
}

ConstantBaseline best_constant_predictor(const Dataset& ds, std::span<const std::size_t> indices) {
    if (indices.empty()) throw std::invalid_argument("best_constant_predictor: no samples");
    struct Kept {
        std::vector<double> u;
        double norm2 = 0.0;
    };
    std::vector<Kept> kept;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto i : indices) {
        const auto& u = ds.samples.at(i).u;
        const auto keep = exclusion_keep_mask(u, loss_exclusion_fraction);
        Kept k;
        for (std::size_t j = 0; j < u.size(); ++j) {
            if (!keep[j]) continue;
            k.u.push_back(u[j]);
            k.norm2 += u[j] * u[j];
            lo = std::min(lo, u[j]);
            hi = std::max(hi, u[j]);
        }
        kept.push_back(std::move(k));
    }
    auto median_error = [&](double c) {
        std::vector<double> e;
        e.reserve(kept.size());
        for (const auto& k : kept) {
            double s = 0.0;
            for (double v : k.u) s += (c - v) * (c - v);
            e.push_back(std::sqrt(s / k.norm2));
        }
        return lower_median(std::move(e));
    };
    ConstantBaseline best{0.0, median_error(0.0)};
    double a = lo, b = hi;
    for (int round = 0; round < 4; ++round) {
        const int steps = 400;
        const double h = (b - a) / steps;
        for (int k = 0; k <= steps; ++k) {
            const double c = a + h * k;
            const double e = median_error(c);
            if (e < best.median_error) best = {c, e};
        }
        a = best.value - 2.0 * h;
        b = best.value + 2.0 * h;
    }
    return best;
}

std::vector<std::size_t> index_range(std::size_t begin, std::size_t count) {
    std::vector<std::size_t> v(count);
    std::iota(v.begin(), v.end(), begin);
    return v;
}

std::vector<std::size_t> train_indices(const Dataset& ds, std::size_t limit) {
    const std::size_t n = limit == 0 ? ds.n_train() : std::min(limit, ds.n_train());
    return index_range(ds.train_begin(), n);
}
std::vector<std::size_t> val_indices(const Dataset& ds) { return index_range(ds.val_begin(), ds.n_val()); }
std::vector<std::size_t> test_indices(const Dataset& ds) { return index_range(ds.test_begin(), ds.n_test()); }

// --- checkpoints -----------------------------------------------------------

void save_checkpoint(const std::filesystem::path& dir, const Model& model, const json& extra) {
    std::vector<ArrayEntry> arrays;
    const auto& p = model.params;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const int k = static_cast<int>(i);
        const std::vector<std::int64_t> shape{p.value(k).rows(), p.value(k).cols()};
        auto add = [&](const std::string& prefix, const nn::Matrix<float>& m) {
            arrays.push_back(make_array<float>(prefix + p.name(k), std::span<const float>(m.data(), m.size()), shape));
        };
        add("param/", p.value(k));
        add("adam_m/", p.first_moment(k));
        add("adam_v/", p.second_moment(k));
    }
    json meta = {{"kind", "checkpoint"},
                 {"model", to_json(model.config)},
                 {"feature_stats", to_json(model.stats)},
                 {"coarse_seed", model.coarse_seed},
                 {"step", p.step()},
                 {"parameter_count", p.scalar_count()},
                 {"extra", extra}};
    write_array_dir(dir, meta, arrays);
}

Model load_checkpoint(const std::filesystem::path& dir, json* extra) {
    const ArrayDir ad = read_array_dir(dir);
    const json& m = ad.manifest;
    Model model;
    try {
        if (m.at("kind").get<std::string>() != "checkpoint") {
            throw DataError(DataError::Kind::manifest, dir.string() + " is not a checkpoint");
        }
        const ModelConfig config = model_config_from_json(m.at("model"), "model");
        model = init_model(config, feature_stats_from_json(m.at("feature_stats")), 0,
                           m.at("coarse_seed").get<std::uint64_t>());
        model.params.set_step(m.at("step").get<std::int64_t>());
        if (extra) *extra = m.value("extra", json::object());
    } catch (const json::exception& e) {
        throw DataError(DataError::Kind::manifest, std::string("malformed checkpoint manifest: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(DataError::Kind::manifest, std::string("malformed checkpoint manifest: ") + e.what());
    }
    auto& p = model.params;
    std::size_t expected = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const int k = static_cast<int>(i);
        const std::vector<std::int64_t> shape{p.value(k).rows(), p.value(k).cols()};
        auto load = [&](const std::string& prefix, nn::Matrix<float>& dst) {
            const auto& e = ad.expect(prefix + p.name(k), DType::f32, shape);
            const auto v = e.as<float>();
            std::copy(v.begin(), v.end(), dst.data());
            ++expected;
        };
        load("param/", p.value(k));
        load("adam_m/", p.first_moment(k));
        load("adam_v/", p.second_moment(k));
    }
    if (ad.arrays.size() != expected) {
        throw DataError(DataError::Kind::shape, "checkpoint holds " + std::to_string(ad.arrays.size()) +
                                                    " arrays, the configured model needs " + std::to_string(expected));
    }
    return model;
}

}  // namespace bcx
