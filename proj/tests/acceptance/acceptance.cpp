// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Usage: acceptance [criterion ...]   (no arguments: all of 1-13)

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bcx/boundary.hpp"
#include "bcx/nn/layers.hpp"
#include "bcx/oracles.hpp"
#include "bcx/sweeps.hpp"

namespace fs = std::filesystem;
using namespace bcx;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

struct Outcome {
    bool passed = false;
    std::string detail;
    json record = json::object();
};

// --- shared training runs ---------------------------------------------------

constexpr std::uint64_t dataset_seed = 0;
constexpr std::uint64_t train_seed = 0;
constexpr std::uint64_t noise_seed = 1;
constexpr std::uint64_t square_seed = 1;

void log(const std::string& s) { std::cerr << "[acceptance] " << s << std::endl; }

ProgressFn every(int n, const std::string& label) {
    return [n, label](const HistoryRow& r) {
        if (r.epoch % n == 0) {
            log(label + " epoch " + std::to_string(r.epoch) + " loss " + fmt(r.train_loss) + " val " + fmt(r.val_error));
        }
    };
}

DatasetConfig toy_config(Geometry g) {
    DatasetConfig c = default_dataset_config(g, BcConfig::dirichlet);
    c.n_train = 512;
    c.n_val = 64;
    c.n_test = 64;
    c.seed = g == Geometry::disk ? dataset_seed : square_seed;
    return c;
}

const Dataset& disk_data() {
    static const Dataset ds = [] {
        log("generating disk Dirichlet dataset (n_rings 14, 512/64/64)");
        return generate_dataset(toy_config(Geometry::disk), 1);
    }();
    return ds;
}

ModelConfig desk_model(ExtenderKind kind, double mask_ratio = 0.0) {
    ModelConfig m;
    m.extender.kind = kind;
    m.extender.mask_ratio = mask_ratio;
    return m;
}

TrainConfig desk_train() { return TrainConfig{}; }

TrainResult train_on(const Dataset& ds, const ModelConfig& mc, std::size_t n_train, std::uint64_t seed,
                     const std::string& label) {
    const auto tr = train_indices(ds, n_train);
    const TrainConfig tc = desk_train();
    Model init = init_model(mc, compute_feature_stats(ds, tr), seed, tc.coarse_seed);
    log("training " + label + " (" + std::to_string(init.params.scalar_count()) + " parameters, " +
        std::to_string(tr.size()) + " samples, " + std::to_string(tc.epochs) + " epochs)");
    auto r = train(ds, std::move(init), tc, tr, val_indices(ds), seed, every(25, label));
    log(label + " done in " + fmt(r.seconds) + " s, best epoch " + std::to_string(r.best_epoch));
    return r;
}

const TrainResult& lx_run() {
    static const TrainResult r = train_on(disk_data(), desk_model(ExtenderKind::learned), 0, train_seed, "LX");
    return r;
}

const TrainResult& zero_run() {
    static const TrainResult r = train_on(disk_data(), desk_model(ExtenderKind::zero), 0, train_seed, "0X");
    return r;
}

double test_median(const Model& m, const Dataset& ds) { return evaluate(m, ds, test_indices(ds)).median; }

// --- criteria ---------------------------------------------------------------

Outcome oracle_outcome(const OracleResult& r, const std::string& detail) {
    return {r.passed, detail, to_json(r)};
}

Outcome c1() {
    const auto start = Clock::now();
    const auto r = convergence_oracle();
    const double s = seconds_since(start);
    Outcome o = oracle_outcome(r, "min observed L2 order " + fmt(r.value) + " (>= 1.9), " + fmt(s) + " s (< 60 s)");
    o.passed = o.passed && s < 60.0;
    return o;
}

Outcome c2() {
    const auto r = harmonic_oracle();
    return oracle_outcome(r, "worst finest-mesh relative L2 " + fmt(r.value) + " (<= 5e-3), decreasing: " +
                                 (r.details.at("decreasing").get<bool>() ? "yes" : "no"));
}

Outcome c3() {
    const auto r = superposition_oracle(0, 16);
    return oracle_outcome(r, "max residual over 16 disk Dirichlet specs " + fmt(r.value) + " (<= 1e-8)");
}

Outcome c4() {
    const auto r = affinity_oracle(0, 16);
    return oracle_outcome(r, "max residual over 16 triples " + fmt(r.value) + " (<= 1e-8)");
}

// Spec with independent random node types and channel values.
RawBoundarySpec random_spec(Rng& rng, std::size_t n) {
    RawBoundarySpec s = uniform_spec(n, BcType::dirichlet);
    for (std::size_t j = 0; j < n; ++j) {
        s.types[j] = static_cast<BcType>(rng.next_u64() % 3);
        switch (s.types[j]) {
            case BcType::dirichlet:
                s.gamma_d[j] = rng.uniform(-10.0, 10.0);
                break;
            case BcType::neumann:
                s.gamma_n[j] = rng.uniform(-10.0, 10.0);
                break;
            case BcType::robin:
                s.gamma_r[j] = rng.uniform(-10.0, 10.0);
                s.alpha_r[j] = rng.uniform(0.05, 3.0) * (rng.uniform() < 0.2 ? -1.0 : 1.0);
                break;
        }
    }
    return s;
}

NormalizationStats random_stats(Rng& rng) {
    return {rng.uniform(-5.0, 5.0), rng.uniform(0.1, 10.0), rng.uniform(-5.0, 5.0), rng.uniform(0.1, 10.0)};
}

double rel_dev(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

double spec_deviation(const RawBoundarySpec& a, const RawBoundarySpec& b) {
    double worst = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
        if (a.types[j] != b.types[j]) return INFINITY;
        worst = std::max({worst, rel_dev(a.gamma_d[j], b.gamma_d[j]), rel_dev(a.gamma_n[j], b.gamma_n[j]),
                          rel_dev(a.gamma_r[j], b.gamma_r[j]), rel_dev(a.alpha_r[j], b.alpha_r[j])});
    }
    return worst;
}

double field_deviation(const UnifiedBoundaryField& a, const UnifiedBoundaryField& b) {
    double worst = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
        if (a.types[j] != b.types[j]) return INFINITY;
        worst = std::max({worst, rel_dev(a.alpha[j], b.alpha[j]), rel_dev(a.beta[j], b.beta[j]),
                          rel_dev(a.gamma[j], b.gamma[j])});
    }
    return worst;
}

Outcome c5() {
    Rng rng(55);
    double worst = 0.0;
    int counts[3] = {0, 0, 0};
    constexpr int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        const std::size_t n = 8 + rng.next_u64() % 40;
        if (t % 2 == 0) {
            const RawBoundarySpec s = random_spec(rng, n);
            const NormalizationStats st = random_stats(rng);
            for (auto ty : s.types) ++counts[static_cast<int>(ty)];
            const UnifiedBoundaryField u = merge_normalize(s, st);
            worst = std::max(worst, spec_deviation(reconstruct_raw(u, st), s));
            worst = std::max(worst, field_deviation(merge_normalize(reconstruct_raw(u, st), st), u));
        } else {
            // Two solution components, each with its own statistics.
            const std::vector<RawBoundarySpec> comps{random_spec(rng, n), random_spec(rng, n)};
            const std::vector<NormalizationStats> stats{random_stats(rng), random_stats(rng)};
            const auto fields = merge_normalize(comps, stats);
            for (std::size_t k = 0; k < 2; ++k) {
                for (auto ty : comps[k].types) ++counts[static_cast<int>(ty)];
                worst = std::max(worst, spec_deviation(reconstruct_raw(fields[k], stats[k]), comps[k]));
            }
        }
    }
    const bool all_types = counts[0] > 0 && counts[1] > 0 && counts[2] > 0;
    return {worst <= 1e-10 && all_types,
            std::to_string(trials) + " specs (half 2-component), worst relative deviation " + fmt(worst) +
                " (<= 1e-10); D/N/R nodes " + std::to_string(counts[0]) + "/" + std::to_string(counts[1]) + "/" +
                std::to_string(counts[2]),
            {{"worst", worst}}};
}

Outcome c6() {
    using MatD = nn::Matrix<double>;
    Rng rng(66);
    auto random = [&](int r, int c) {
        MatD m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
        return m;
    };
    nn::ParameterTree<double> tree;
    const auto att = nn::make_attention(tree, "att", 8, 2, 4, rng);
    const MatD tg = random(5, 8);
    const int src = tree.add("sources", random(9, 8));
    const MatD proj = random(8, 1);

    // All-ones mask versus no mask.
    double ones_dev;
    {
        nn::Tape<double> t(tree, false);
        const std::vector<std::uint8_t> ones(9, 1);
        const MatD a = t.value(nn::apply(t, att, t.constant(tg), t.param(src)));
        const MatD b = t.value(nn::apply(t, att, t.constant(tg), t.param(src), ones));
        ones_dev = (a - b).cwiseAbs().maxCoeff();
    }

    // Masked sources: analytic gradient and a finite-difference probe.
    const std::vector<std::uint8_t> mask{1, 0, 1, 1, 0, 0, 1, 1, 0};
    auto loss = [&](nn::Tape<double>& t) {
        return t.sum(t.matmul(nn::apply(t, att, t.constant(tg), t.param(src), mask), t.constant(proj)));
    };
    nn::Gradients<double> g(tree);
    {
        nn::Tape<double> t(tree);
        t.backward(loss(t), g);
    }
    double analytic = 0.0, probe = 0.0;
    for (int r = 0; r < 9; ++r) {
        if (mask[r]) continue;
        analytic = std::max(analytic, g[src].row(r).cwiseAbs().maxCoeff());
        for (int c = 0; c < 8; ++c) {
            const double saved = tree.value(src)(r, c);
            tree.value(src)(r, c) = saved + 1e-3;
            nn::Tape<double> up(tree, false);
            const double lp = up.value(loss(up))(0, 0);
            tree.value(src)(r, c) = saved - 1e-3;
            nn::Tape<double> down(tree, false);
            const double lm = down.value(loss(down))(0, 0);
            tree.value(src)(r, c) = saved;
            probe = std::max(probe, std::abs(lp - lm) / 2e-3);
        }
    }

    // Softmax weights over unmasked sources.
    double sum_dev = 0.0, masked_weight = 0.0;
    {
        nn::Tape<double> t(tree, false);
        const MatD w = t.value(t.masked_softmax_rows(t.constant(random(5, 9) * 10.0), mask));
        for (int r = 0; r < w.rows(); ++r) {
            sum_dev = std::max(sum_dev, std::abs(w.row(r).sum() - 1.0));
            for (int c = 0; c < 9; ++c) {
                if (!mask[c]) masked_weight = std::max(masked_weight, std::abs(w(r, c)));
            }
        }
    }
    const bool ok = ones_dev <= 1e-6 && analytic == 0.0 && probe <= 1e-12 && sum_dev <= 1e-6 && masked_weight == 0.0;
    return {ok,
            "all-ones vs unmasked " + fmt(ones_dev) + " (<= 1e-6); masked-source gradient " + fmt(analytic) +
                ", FD probe " + fmt(probe) + " (<= 1e-12); weight-sum deviation " + fmt(sum_dev) + " (<= 1e-6)",
            {{"ones_dev", ones_dev}, {"masked_grad", analytic}, {"fd_probe", probe}, {"sum_dev", sum_dev}}};
}

Outcome c7() {
    const auto r = gradcheck_oracle(0);
    double worst_primitive = 0.0;
    for (const auto& [k, v] : r.details.at("primitives").items()) worst_primitive = std::max(worst_primitive, v.get<double>());
    return oracle_outcome(r, "end-to-end max rel error " + fmt(r.value) + " (<= 1e-3) on " +
                                 std::to_string(r.details.at("mesh_nodes").get<int>()) +
                                 " nodes; worst primitive " + fmt(worst_primitive) + " (<= 1e-4)");
}

Outcome c8() {
    const Dataset& ds = disk_data();
    const auto te = test_indices(ds);
    const auto constant = best_constant_predictor(ds, te);
    const double lx = test_median(lx_run().best, ds);
    const double zx = test_median(zero_run().best, ds);
    const double secs = lx_run().seconds;
    const bool ok = lx <= 0.5 * constant.median_error && lx <= zx && secs <= 1800.0;
    return {ok,
            "LX median " + fmt(lx) + " <= 0.5 x constant " + fmt(constant.median_error) + " and <= 0X " + fmt(zx) +
                "; LX training " + fmt(secs) + " s (<= 1800 s)",
            {{"lx_median", lx},
             {"zero_median", zx},
             {"constant_median", constant.median_error},
             {"constant_value", constant.value},
             {"lx_seconds", secs},
             {"zero_seconds", zero_run().seconds}}};
}

Outcome c9() {
    const Dataset& ds = disk_data();
    std::vector<std::pair<int, double>> pts;
    for (int n : {64, 256}) {
        const auto r = train_on(ds, desk_model(ExtenderKind::learned), n, train_seed, "LX n=" + std::to_string(n));
        pts.emplace_back(n, test_median(r.best, ds));
    }
    pts.emplace_back(512, test_median(lx_run().best, ds));
    bool ok = true;
    std::string detail = "medians";
    json rec = json::array();
    for (std::size_t k = 0; k < pts.size(); ++k) {
        detail += " n=" + std::to_string(pts[k].first) + ": " + fmt(pts[k].second);
        rec.push_back({{"train_samples", pts[k].first}, {"median", pts[k].second}});
        if (k > 0 && pts[k].second > 1.1 * pts[k - 1].second) ok = false;
    }
    return {ok, detail + " (each <= 1.1 x previous)", {{"points", rec}}};
}

Outcome c10() {
    const Dataset& ds = disk_data();
    const std::vector<double> ratios{0.0, 0.1};
    const auto pts = eval_noise(lx_run().best, ds, test_indices(ds), ratios, noise_seed);
    const double clean = pts[0].report.median, noisy = pts[1].report.median;
    const double realized = pts[1].report.realized_noise_ratio;
    const bool ok = std::isfinite(noisy) && noisy >= clean && std::abs(realized - 0.1) <= 0.05 * 0.1;
    return {ok,
            "median at 10% noise " + fmt(noisy) + " >= clean " + fmt(clean) + "; realized ratio " + fmt(realized) +
                " (within 5% of 0.1)",
            {{"clean", clean}, {"noisy", noisy}, {"realized", realized}}};
}

Outcome c11() {
    const Dataset& ds = disk_data();
    const auto masked =
        train_on(ds, desk_model(ExtenderKind::learned, 0.3), 0, train_seed, "LX mask 0.3");
    const std::vector<int> strides{1, 2};
    const auto te = test_indices(ds);
    const auto plain_pts = eval_resolution(lx_run().best, ds, te, strides);
    const auto mask_pts = eval_resolution(masked.best, ds, te, strides);
    const double plain_inf = plain_pts[1].report.median / plain_pts[0].report.median;
    const double mask_inf = mask_pts[1].report.median / mask_pts[0].report.median;
    const bool finite = std::isfinite(mask_pts[1].report.median) && std::isfinite(plain_pts[1].report.median);
    return {finite && mask_inf < plain_inf,
            "inflation at stride 2: masked " + fmt(mask_inf) + " (" + fmt(mask_pts[0].report.median) + " -> " +
                fmt(mask_pts[1].report.median) + ") < unmasked " + fmt(plain_inf) + " (" +
                fmt(plain_pts[0].report.median) + " -> " + fmt(plain_pts[1].report.median) + ")",
            {{"masked_inflation", mask_inf}, {"unmasked_inflation", plain_inf}}};
}

Outcome c12() {
    log("generating square Dirichlet dataset (n 25, 512/64/64)");
    const Dataset square = generate_dataset(toy_config(Geometry::square), 1);
    const auto pre = train_on(square, desk_model(ExtenderKind::learned), 0, train_seed, "square pretrain");
    const Dataset& disk = disk_data();
    int wins = 0;
    json rec = json::array();
    std::string detail;
    for (std::uint64_t seed : {1, 2, 3}) {
        log("finetune seed " + std::to_string(seed));
        const auto r = finetune(pre.best, disk, 128, desk_train(), seed, 1, every(50, "finetune/control"));
        const double ft = r.finetuned_test.median, ctl = r.control_test.median;
        if (ft <= ctl) ++wins;
        rec.push_back({{"seed", seed}, {"finetuned", ft}, {"control", ctl}});
        detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + ": " + fmt(ft) +
                  " vs " + fmt(ctl);
    }
    return {wins >= 2, "finetuned vs random-init median, " + detail + "; " + std::to_string(wins) + "/3 not worse",
            {{"runs", rec}, {"wins", wins}}};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(BCX_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        files[fs::relative(e.path(), root).string()] = ss.str();
    }
    return files;
}

Outcome c13() {
    const fs::path work = fs::temp_directory_path() / ("bcx_accept_det_" + std::to_string(::getpid()));
    fs::remove_all(work);
    fs::create_directories(work);
    const fs::path cfg = work / "config.json";
    std::ofstream(cfg) << R"({
  "dataset": {"geometry": "disk", "bc_config": "mixed", "resolution": 8, "val": 8, "test": 8},
  "model": {"core": {"coarse": 32}},
  "train": {"epochs": 3}
})";
    int failures = 0;
    for (const char* run : {"a", "b"}) {
        const fs::path d = work / run;
        failures += run_cli("gen --config " + cfg.string() + " --out " + (d / "data").string() +
                            " --seed 13 --samples 64 --threads 2") != 0;
        failures += run_cli("train --quiet --data " + (d / "data").string() + " --config " + cfg.string() + " --out " +
                            (d / "ckpt").string() + " --seed 13") != 0;
    }
    const auto a = read_tree(work / "a"), b = read_tree(work / "b");
    const bool same = failures == 0 && !a.empty() && a == b;
    fs::remove_all(work);
    return {same,
            std::to_string(a.size()) + " output files from gen + single-thread train, " +
                (same ? "byte-identical across two runs" : "differ or a command failed"),
            {{"files", a.size()}}};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"FEM convergence", c1},
        {"harmonic-extension exactness", c2},
        {"superposition", c3},
        {"affinity", c4},
        {"merge/normalize round trip", c5},
        {"masked attention", c6},
        {"gradient correctness", c7},
        {"toy training", c8},
        {"data-scaling trend", c9},
        {"noise-robustness trend", c10},
        {"resolution-generalization trend", c11},
        {"transfer trend", c12},
        {"determinism", c13}};

    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    json report = json::object();
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto start = Clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = seconds_since(start);
        if (!o.passed) ++failed;
        std::cout << (o.passed ? "PASS" : "FAIL") << "  " << id << ". " << criteria[k].first << ": " << o.detail
                  << "  [" << fmt(secs) << " s]" << std::endl;
        o.record["passed"] = o.passed;
        o.record["seconds"] = secs;
        report[std::to_string(id)] = o.record;
    }
    std::ofstream("acceptance_report.json") << report.dump(2) << "\n";
    return failed == 0 ? 0 : 1;
}
