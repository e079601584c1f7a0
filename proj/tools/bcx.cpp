#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "bcx/config.hpp"
#include "bcx/error.hpp"
#include "bcx/extender.hpp"
#include "bcx/oracles.hpp"
#include "bcx/sweeps.hpp"

namespace fs = std::filesystem;
using namespace bcx;

namespace {

constexpr const char* version_string = "bcx 0.1.0 (dataset/checkpoint format_version 1)";

enum Exit { ok = 0, failure = 1, config_error = 2, solver_failure = 3, divergence = 4 };

void write_text(const fs::path& file, const std::string& text) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw ConfigError(file.string() + ": cannot open for writing");
    out << text;
    if (!out) throw ConfigError(file.string() + ": write failed");
}

void write_json(const fs::path& file, const json& j) { write_text(file, j.dump(2) + "\n"); }

ProgressFn progress_printer(bool quiet, const std::string& label = {}) {
    if (quiet) return {};
    return [label](const HistoryRow& r) {
        std::cerr << label << "epoch " << r.epoch << " train_loss " << r.train_loss << " val " << r.val_error << " lr "
                  << r.lr << "\n";
    };
}

// Training settings come from a run config; the mesh it is applied to is the
// dataset's, so the coarse count is rechecked there.
RunConfig training_config(const fs::path& file, const Dataset& ds) {
    RunConfig rc = load_run_config(file);
    try {
        validate(rc.model.core, ds.mesh.nodes.size());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config.model.") + e.what());
    }
    return rc;
}

std::vector<std::size_t> split_indices(const Dataset& ds, const std::string& split) {
    if (split == "train") return train_indices(ds);
    if (split == "val") return val_indices(ds);
    return test_indices(ds);
}

struct GenArgs {
    std::string config, out;
    std::uint64_t seed = 0;
    int samples = 0;
    int threads = 1;
};

int run_gen(const GenArgs& a) {
    RunConfig rc = load_run_config(a.config);
    DatasetConfig c = rc.dataset;
    c.seed = a.seed;
    c.n_train = a.samples - c.n_val - c.n_test;
    if (c.n_train < 1) {
        throw ConfigError("--samples: " + std::to_string(a.samples) + " leaves no training samples after " +
                          std::to_string(c.n_val) + " validation and " + std::to_string(c.n_test) + " test samples");
    }
    const Dataset ds = generate_dataset(c, a.threads);
    write_dataset(a.out, ds);
    std::cerr << "wrote " << ds.samples.size() << " samples (" << c.n_train << "/" << c.n_val << "/" << c.n_test
              << ") on " << ds.mesh.nodes.size() << " nodes to " << a.out << "\n";
    return ok;
}

struct ExtendArgs {
    std::string kind, data, out;
    int threads = 1;
};

int run_extend(const ExtendArgs& a) {
    const ExtenderKind kind = parse_extender_kind(a.kind);
    if (kind == ExtenderKind::learned) throw ConfigError("--kind: only zero and harmonic extensions are precomputed");
    const Dataset ds = read_dataset(a.data);
    const std::size_t s = ds.samples.size(), n = ds.mesh.nodes.size(), c = basic_extension_channels(kind);
    std::vector<float> psi(s * n * c);
    parallel_for(s, a.threads, [&](std::size_t i) {
        const auto ext = basic_extension(kind, ds.mesh, ds.samples[i].unified);
        for (std::size_t k = 0; k < n * c; ++k) psi[i * n * c + k] = static_cast<float>(ext.data[k]);
    });
    std::vector<ArrayEntry> arrays;
    arrays.push_back(make_array<float>("psi", psi,
                                       {static_cast<std::int64_t>(s), static_cast<std::int64_t>(n),
                                        static_cast<std::int64_t>(c)}));
    const json meta = {{"kind", "extension"}, {"extender", to_string(kind)}, {"channels", c}, {"samples", s},
                       {"nodes", n}};
    write_array_dir(a.out, meta, arrays);
    std::cerr << "wrote " << to_string(kind) << " extension (" << c << " channels) for " << s << " samples to "
              << a.out << "\n";
    return ok;
}

struct TrainArgs {
    std::string data, config, out, history;
    std::uint64_t seed = 0;
    int train_samples = 0;
    bool quiet = false;
};

int run_train(const TrainArgs& a) {
    const Dataset ds = read_dataset(a.data);
    const RunConfig rc = training_config(a.config, ds);
    if (a.train_samples < 0 || static_cast<std::size_t>(a.train_samples) > ds.n_train()) {
        throw ConfigError("--train-samples: must lie in [0, " + std::to_string(ds.n_train()) + "]");
    }
    const auto tr = train_indices(ds, static_cast<std::size_t>(a.train_samples));
    Model init = init_model(rc.model, compute_feature_stats(ds, tr), a.seed, rc.train.coarse_seed);
    const TrainResult res = train(ds, std::move(init), rc.train, tr, val_indices(ds), a.seed, progress_printer(a.quiet));
    const json extra = {{"seed", a.seed},
                        {"train_samples", tr.size()},
                        {"best_epoch", res.best_epoch},
                        {"best_val_median", res.best_val},
                        {"train", to_json(rc.train)}};
    save_checkpoint(a.out, res.best, extra);
    const fs::path history = a.history.empty() ? fs::path(a.out) / "history.csv" : fs::path(a.history);
    write_text(history, history_csv(res.history));
    std::cerr << "best epoch " << res.best_epoch << " val median " << res.best_val << " (" << res.seconds << " s)\n";
    return ok;
}

struct EvalArgs {
    std::string data, ckpt, report, split = "test";
    double noise = 0.0;
    std::uint64_t noise_seed = 1;
    int stride = 1;
    int threads = 1;
};

int run_eval(const EvalArgs& a) {
    const Dataset ds = read_dataset(a.data);
    const Model model = load_checkpoint(a.ckpt);
    EvalOptions opts;
    opts.noise_ratio = a.noise;
    opts.noise_seed = a.noise_seed;
    opts.boundary_stride = a.stride;
    opts.threads = a.threads;
    const auto idx = split_indices(ds, a.split);
    json report = to_json(evaluate(model, ds, idx, opts));
    report["split"] = a.split;
    report["noise_ratio"] = a.noise;
    report["boundary_stride"] = a.stride;
    report["extender"] = to_string(model.config.extender.kind);
    write_json(a.report, report);
    std::cerr << a.split << " median rel L2 " << report["median_rel_l2"].get<double>() << "\n";
    return ok;
}

struct SweepArgs {
    std::string data, config, ckpt, report, out;
    std::uint64_t seed = 0;
    std::vector<int> sizes, strides;
    std::vector<double> ratios;
    std::uint64_t noise_seed = 1;
    int threads = 1;
    bool quiet = false;
};

int run_data_scaling(const SweepArgs& a) {
    const Dataset ds = read_dataset(a.data);
    const RunConfig rc = training_config(a.config, ds);
    const std::vector<int> sizes = a.sizes.empty() ? rc.sweep.train_sizes : a.sizes;
    const auto points = data_scaling(ds, rc.model, rc.train, sizes, a.seed, a.threads, progress_printer(a.quiet));
    for (const auto& p : points) {
        const fs::path dir = fs::path(a.out) / ("n" + std::to_string(p.train_samples));
        save_checkpoint(dir, p.run.best, {{"seed", a.seed}, {"train_samples", p.train_samples}});
        write_text(dir / "history.csv", history_csv(p.run.history));
    }
    write_json(fs::path(a.out) / "report.json", scaling_report(points));
    for (const auto& p : points) std::cerr << "n " << p.train_samples << " median " << p.test.median << "\n";
    return ok;
}

SweepConfig sweep_defaults(const std::string& config) {
    return config.empty() ? SweepConfig{} : load_run_config(config).sweep;
}

int run_noise(const SweepArgs& a) {
    const SweepConfig sc = sweep_defaults(a.config);
    const Dataset ds = read_dataset(a.data);
    const Model model = load_checkpoint(a.ckpt);
    const std::vector<double> ratios = a.ratios.empty() ? sc.noise_ratios : a.ratios;
    for (double r : ratios) {
        if (!(r >= 0.0)) throw ConfigError("--ratios: entries must be >= 0");
    }
    const auto points = eval_noise(model, ds, test_indices(ds), ratios, a.noise_seed, a.threads);
    json report = sweep_report("noise", "noise_ratio", points);
    report["noise_seed"] = a.noise_seed;
    write_json(a.report, report);
    return ok;
}

int run_resolution(const SweepArgs& a) {
    const SweepConfig sc = sweep_defaults(a.config);
    const Dataset ds = read_dataset(a.data);
    const Model model = load_checkpoint(a.ckpt);
    const std::vector<int> strides = a.strides.empty() ? sc.boundary_strides : a.strides;
    for (int k : strides) {
        if (k < 1) throw ConfigError("--strides: entries must be >= 1");
    }
    write_json(a.report, sweep_report("resolution", "boundary_stride",
                                      eval_resolution(model, ds, test_indices(ds), strides, a.threads)));
    return ok;
}

struct FinetuneArgs {
    std::string ckpt, data, config, out;
    int samples = 0;
    std::uint64_t seed = 0;
    int threads = 1;
    bool quiet = false;
};

int run_finetune(const FinetuneArgs& a) {
    const Dataset ds = read_dataset(a.data);
    const RunConfig rc = load_run_config(a.config);
    const Model source = load_checkpoint(a.ckpt);
    const auto r = finetune(source, ds, static_cast<std::size_t>(a.samples), rc.train, a.seed, a.threads,
                            progress_printer(a.quiet));
    const fs::path out(a.out);
    save_checkpoint(out / "finetuned", r.finetuned.best, {{"seed", a.seed}, {"train_samples", a.samples}});
    save_checkpoint(out / "control", r.control.best, {{"seed", a.seed}, {"train_samples", a.samples}});
    write_text(out / "finetuned" / "history.csv", history_csv(r.finetuned.history));
    write_text(out / "control" / "history.csv", history_csv(r.control.history));
    write_json(out / "report.json", finetune_report(r, static_cast<std::size_t>(a.samples)));
    std::cerr << "finetuned median " << r.finetuned_test.median << ", control median " << r.control_test.median
              << "\n";
    return ok;
}

struct OracleArgs {
    std::string name, report;
    std::uint64_t seed = 0;
};

int run_oracle(const OracleArgs& a) {
    OracleResult r;
    if (a.name == "superposition") {
        r = superposition_oracle(a.seed);
    } else if (a.name == "affinity") {
        r = affinity_oracle(a.seed);
    } else if (a.name == "convergence") {
        r = convergence_oracle();
    } else {
        r = gradcheck_oracle(a.seed);
    }
    const json j = to_json(r);
    if (!a.report.empty()) write_json(a.report, j);
    std::cout << j.dump(2) << "\n";
    return r.passed ? ok : failure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Boundary-conditioned neural operator workbench"};
    app.set_version_flag("--version", version_string);
    app.require_subcommand(1);
    int code = ok;

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a FEM dataset");
    gen_cmd->add_option("--config", gen.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    gen_cmd->add_option("--out", gen.out, "Dataset directory")->required();
    gen_cmd->add_option("--seed", gen.seed, "Global dataset seed")->required();
    gen_cmd->add_option("--samples", gen.samples, "Total samples (train + val + test)")->required();
    gen_cmd->add_option("--threads", gen.threads, "Worker threads")->check(CLI::PositiveNumber);
    gen_cmd->callback([&] { code = run_gen(gen); });

    ExtendArgs ext;
    auto* ext_cmd = app.add_subcommand("extend", "Precompute a zero or harmonic extension");
    ext_cmd->add_option("--kind", ext.kind, "Extension kind")->required()->check(CLI::IsMember({"zero", "harmonic"}));
    ext_cmd->add_option("--data", ext.data, "Dataset directory")->required();
    ext_cmd->add_option("--out", ext.out, "Output directory")->required();
    ext_cmd->add_option("--threads", ext.threads, "Worker threads")->check(CLI::PositiveNumber);
    ext_cmd->callback([&] { code = run_extend(ext); });

    TrainArgs tr;
    auto* tr_cmd = app.add_subcommand("train", "Train a model");
    tr_cmd->add_option("--data", tr.data, "Dataset directory")->required();
    tr_cmd->add_option("--config", tr.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    tr_cmd->add_option("--out", tr.out, "Checkpoint directory")->required();
    tr_cmd->add_option("--seed", tr.seed, "Training seed")->required();
    tr_cmd->add_option("--train-samples", tr.train_samples, "Use the first n training samples (0: all)");
    tr_cmd->add_option("--history", tr.history, "History CSV (default <out>/history.csv)");
    tr_cmd->add_flag("--quiet", tr.quiet, "No per-epoch progress");
    tr_cmd->callback([&] { code = run_train(tr); });

    EvalArgs ev;
    auto* ev_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    ev_cmd->add_option("--data", ev.data, "Dataset directory")->required();
    ev_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint directory")->required();
    ev_cmd->add_option("--report", ev.report, "Report file (JSON)")->required();
    ev_cmd->add_option("--split", ev.split, "Split")->check(CLI::IsMember({"train", "val", "test"}));
    ev_cmd->add_option("--noise", ev.noise, "Noise power ratio on gamma")->check(CLI::NonNegativeNumber);
    ev_cmd->add_option("--noise-seed", ev.noise_seed, "Noise seed");
    ev_cmd->add_option("--stride", ev.stride, "Boundary subsample factor")->check(CLI::PositiveNumber);
    ev_cmd->add_option("--threads", ev.threads, "Worker threads")->check(CLI::PositiveNumber);
    ev_cmd->callback([&] { code = run_eval(ev); });

    SweepArgs sw;
    auto* sw_cmd = app.add_subcommand("sweep", "Evaluation sweeps");
    sw_cmd->require_subcommand(1);
    auto* ds_cmd = sw_cmd->add_subcommand("data-scaling", "Train and test at several training-set sizes");
    ds_cmd->add_option("--data", sw.data, "Dataset directory")->required();
    ds_cmd->add_option("--config", sw.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    ds_cmd->add_option("--out", sw.out, "Output directory")->required();
    ds_cmd->add_option("--seed", sw.seed, "Training seed")->required();
    ds_cmd->add_option("--sizes", sw.sizes, "Training-set sizes (default from config)")->delimiter(',');
    ds_cmd->add_option("--threads", sw.threads, "Evaluation threads")->check(CLI::PositiveNumber);
    ds_cmd->add_flag("--quiet", sw.quiet, "No per-epoch progress");
    ds_cmd->callback([&] { code = run_data_scaling(sw); });
    auto* nz_cmd = sw_cmd->add_subcommand("noise", "Test error under boundary noise");
    nz_cmd->add_option("--data", sw.data, "Dataset directory")->required();
    nz_cmd->add_option("--ckpt", sw.ckpt, "Checkpoint directory")->required();
    nz_cmd->add_option("--report", sw.report, "Report file (JSON)")->required();
    nz_cmd->add_option("--config", sw.config, "Run config for sweep defaults")->check(CLI::ExistingFile);
    nz_cmd->add_option("--ratios", sw.ratios, "Noise power ratios")->delimiter(',');
    nz_cmd->add_option("--noise-seed", sw.noise_seed, "Noise seed");
    nz_cmd->add_option("--threads", sw.threads, "Evaluation threads")->check(CLI::PositiveNumber);
    nz_cmd->callback([&] { code = run_noise(sw); });
    auto* rs_cmd = sw_cmd->add_subcommand("resolution", "Test error at boundary subsample factors");
    rs_cmd->add_option("--data", sw.data, "Dataset directory")->required();
    rs_cmd->add_option("--ckpt", sw.ckpt, "Checkpoint directory")->required();
    rs_cmd->add_option("--report", sw.report, "Report file (JSON)")->required();
    rs_cmd->add_option("--config", sw.config, "Run config for sweep defaults")->check(CLI::ExistingFile);
    rs_cmd->add_option("--strides", sw.strides, "Boundary subsample factors")->delimiter(',');
    rs_cmd->add_option("--threads", sw.threads, "Evaluation threads")->check(CLI::PositiveNumber);
    rs_cmd->callback([&] { code = run_resolution(sw); });

    FinetuneArgs ft;
    auto* ft_cmd = app.add_subcommand("finetune", "Fine-tune a checkpoint against a random-init control");
    ft_cmd->add_option("--ckpt", ft.ckpt, "Source checkpoint directory")->required();
    ft_cmd->add_option("--data", ft.data, "Target dataset directory")->required();
    ft_cmd->add_option("--samples", ft.samples, "Training samples used")->required()->check(CLI::PositiveNumber);
    ft_cmd->add_option("--config", ft.config, "Run config (train section)")->required()->check(CLI::ExistingFile);
    ft_cmd->add_option("--out", ft.out, "Output directory")->required();
    ft_cmd->add_option("--seed", ft.seed, "Training seed")->required();
    ft_cmd->add_option("--threads", ft.threads, "Evaluation threads")->check(CLI::PositiveNumber);
    ft_cmd->add_flag("--quiet", ft.quiet, "No per-epoch progress");
    ft_cmd->callback([&] { code = run_finetune(ft); });

    std::string shown;
    auto* cf_cmd = app.add_subcommand("config", "Print the validated run config with defaults filled in");
    cf_cmd->add_option("--config", shown, "Run config (JSON); omitted: all defaults")->check(CLI::ExistingFile);
    cf_cmd->callback([&] {
        const RunConfig rc = shown.empty() ? run_config_from_json(json::object()) : load_run_config(shown);
        std::cout << to_json(rc).dump(2) << "\n";
    });

    OracleArgs orc;
    auto* or_cmd = app.add_subcommand("oracle", "Run a numerical oracle");
    or_cmd->add_option("name", orc.name, "Oracle")
        ->required()
        ->check(CLI::IsMember({"superposition", "affinity", "convergence", "gradcheck"}));
    or_cmd->add_option("--seed", orc.seed, "Seed");
    or_cmd->add_option("--report", orc.report, "Also write the result to this file");
    or_cmd->callback([&] { code = run_oracle(orc); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config_error;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << " (residual " << e.residual() << ", iterations "
                  << e.iterations() << ")\n";
        return solver_failure;
    } catch (const DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return divergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return failure;
    }
    return code;
}
