#include "bcx/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include "bcx/error.hpp"
#include "bcx/json_util.hpp"

namespace bcx {

std::string to_string(Geometry g) { return g == Geometry::square ? "square" : "disk"; }

std::string to_string(BcConfig c) {
    switch (c) {
    case BcConfig::dirichlet: return "dirichlet";
    case BcConfig::mixed: return "mixed";
    case BcConfig::mixed_plus: return "mixed_plus";
    }
    return "?";
}

Geometry parse_geometry(const std::string& s) {
    if (s == "square") return Geometry::square;
    if (s == "disk" || s == "circle") return Geometry::disk;
    throw ConfigError("unknown geometry \"" + s + "\" (expected square or disk)");
}

BcConfig parse_bc_config(const std::string& s) {
    if (s == "dirichlet") return BcConfig::dirichlet;
    if (s == "mixed") return BcConfig::mixed;
    if (s == "mixed_plus" || s == "mixed+") return BcConfig::mixed_plus;
    throw ConfigError("unknown bc_config \"" + s + "\" (expected dirichlet, mixed or mixed_plus)");
}

int default_resolution(Geometry geometry) { return geometry == Geometry::square ? 25 : 14; }

DatasetConfig default_dataset_config(Geometry geometry, BcConfig bc) {
    DatasetConfig c;
    c.geometry = geometry;
    c.resolution = default_resolution(geometry);
    c.bc = bc;
    if (bc == BcConfig::dirichlet) {
        c.n_segments = 1;
        c.gamma_d = {{0.0, 0.0}, 1.0, 12, 2.0, 10.0};
    } else {
        c.n_segments = 4;
        c.gamma_d = {{0.0, 0.0}, 1.0, 8, 1.0, 4.0};
    }
    return c;
}

namespace {

json sinusoid_json(const SinusoidConfig& s) {
    return {{"center", {s.center.x, s.center.y}},
            {"radius", s.radius},
            {"modes", s.modes},
            {"amplitude", {s.amplitude_min, s.amplitude_max}}};
}

void read_sinusoid(ObjectReader r, SinusoidConfig& s) {
    std::vector<double> center{s.center.x, s.center.y};
    std::vector<double> amplitude{s.amplitude_min, s.amplitude_max};
    r.read("center", center);
    r.read("radius", s.radius);
    r.read("modes", s.modes);
    r.read("amplitude", amplitude);
    r.finish();
    if (center.size() != 2) throw ConfigError(r.path() + ".center: expected 2 numbers");
    if (amplitude.size() != 2 || amplitude[0] > amplitude[1]) {
        throw ConfigError(r.path() + ".amplitude: expected [min, max] with min <= max");
    }
    if (s.modes < 1) throw ConfigError(r.path() + ".modes: must be >= 1");
    if (!(s.radius > 0.0)) throw ConfigError(r.path() + ".radius: must be > 0");
    s.center = {center[0], center[1]};
    s.amplitude_min = amplitude[0];
    s.amplitude_max = amplitude[1];
}

}  // namespace

json to_json(const DatasetConfig& c) {
    return {{"geometry", to_string(c.geometry)},
            {"resolution", c.resolution},
            {"bc_config", to_string(c.bc)},
            {"train", c.n_train},
            {"val", c.n_val},
            {"test", c.n_test},
            {"seed", c.seed},
            {"segments", c.n_segments},
            {"source_amplitude", c.source_amplitude},
            {"gamma_d", sinusoid_json(c.gamma_d)},
            {"gamma_n", sinusoid_json(c.gamma_n)},
            {"gamma_r", sinusoid_json(c.gamma_r)},
            {"alpha_r", sinusoid_json(c.alpha_r)}};
}

DatasetConfig dataset_config_from_json(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    std::string geometry = "disk";
    std::string bc = "dirichlet";
    r.read("geometry", geometry);
    r.read("bc_config", bc);
    DatasetConfig c = default_dataset_config(parse_geometry(geometry), parse_bc_config(bc));
    r.read("resolution", c.resolution);
    r.read("train", c.n_train);
    r.read("val", c.n_val);
    r.read("test", c.n_test);
    r.read("seed", c.seed);
    r.read("segments", c.n_segments);
    r.read("source_amplitude", c.source_amplitude);
    read_sinusoid(r.child("gamma_d"), c.gamma_d);
    read_sinusoid(r.child("gamma_n"), c.gamma_n);
    read_sinusoid(r.child("gamma_r"), c.gamma_r);
    read_sinusoid(r.child("alpha_r"), c.alpha_r);
    r.finish();
    const int min_res = c.geometry == Geometry::square ? 3 : 2;
    if (c.resolution < min_res) throw ConfigError(path + ".resolution: must be >= " + std::to_string(min_res));
    if (c.n_train < 1) throw ConfigError(path + ".train: must be >= 1");
    if (c.n_val < 0 || c.n_test < 0) throw ConfigError(path + ".val/test: must be >= 0");
    if (c.n_segments < 1) throw ConfigError(path + ".segments: must be >= 1");
    return c;
}

double fixed_source(Geometry geometry, Point x, double amplitude) {
    const double r = geometry == Geometry::square ? std::max(std::abs(x.x), std::abs(x.y)) : norm(x);
    return amplitude * std::cos(4.0 * std::numbers::pi * r);
}

namespace {

std::vector<double> eval_on_boundary(const Mesh& mesh, const SinusoidalParams& p) {
    std::vector<double> v(mesh.boundary_loop.size());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = sample_sinusoid(p, mesh.nodes[mesh.boundary_loop[j]]);
    return v;
}

std::vector<double> fixed_source_field(const Mesh& mesh, const DatasetConfig& config) {
    std::vector<double> f(mesh.nodes.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = fixed_source(config.geometry, mesh.nodes[i], config.source_amplitude);
    return f;
}

}  // namespace

Sample gen_dirichlet_sample(const Mesh& mesh, const DatasetConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    Sample s;
    const double perimeter = mesh.perimeter();
    s.raw = uniform_spec(mesh.boundary_loop.size(), BcType::dirichlet);
    s.raw.segments = {{0.0, perimeter, BcType::dirichlet}};
    s.raw.gamma_d = eval_on_boundary(mesh, draw_sinusoidal_params(rng, config.gamma_d));
    s.f = fixed_source_field(mesh, config);
    s.u = solve_poisson(mesh, s.f, s.raw);
    return s;
}

Sample gen_mixed_sample(const Mesh& mesh, const DatasetConfig& config, std::uint64_t seed, bool with_random_source) {
    Rng rng(seed);
    Sample s;
    const double perimeter = mesh.perimeter();
    const auto arclengths = mesh.loop_arclengths();
    s.raw.segments = partition_boundary(rng, perimeter, config.n_segments, TypePolicy::mixed, arclengths);
    s.raw.types = assign_node_types(s.raw.segments, arclengths, perimeter);
    // Channels are global sinusoids restricted to the nodes whose type uses them.
    auto gd = eval_on_boundary(mesh, draw_sinusoidal_params(rng, config.gamma_d));
    auto gn = eval_on_boundary(mesh, draw_sinusoidal_params(rng, config.gamma_n));
    auto gr = eval_on_boundary(mesh, draw_sinusoidal_params(rng, config.gamma_r));
    auto ar = eval_on_boundary(mesh, draw_sinusoidal_params(rng, config.alpha_r));
    const std::size_t b = s.raw.types.size();
    s.raw.gamma_d.assign(b, 0.0);
    s.raw.gamma_n.assign(b, 0.0);
    s.raw.gamma_r.assign(b, 0.0);
    s.raw.alpha_r.assign(b, 0.0);
    for (std::size_t j = 0; j < b; ++j) {
        switch (s.raw.types[j]) {
        case BcType::dirichlet: s.raw.gamma_d[j] = gd[j]; break;
        case BcType::neumann: s.raw.gamma_n[j] = gn[j]; break;
        case BcType::robin:
            s.raw.gamma_r[j] = gr[j];
            s.raw.alpha_r[j] = ar[j];
            break;
        }
    }
    if (with_random_source) {
        const Point center{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const auto weights = draw_simplex_weights(rng, 2);
        const double phi1 = 2.0 * std::numbers::pi * rng.uniform();
        const double phi2 = 2.0 * std::numbers::pi * rng.uniform();
        s.f.resize(mesh.nodes.size());
        for (std::size_t i = 0; i < s.f.size(); ++i) {
            const Point d = mesh.nodes[i] - center;
            const double r = config.geometry == Geometry::square ? std::max(std::abs(d.x), std::abs(d.y)) : norm(d);
            s.f[i] = config.source_amplitude * (weights[0] * std::sin(2.0 * std::numbers::pi * r + phi1) +
                                                weights[1] * std::sin(4.0 * std::numbers::pi * r + phi2));
        }
    } else {
        s.f = fixed_source_field(mesh, config);
    }
    s.u = solve_poisson(mesh, s.f, s.raw);
    return s;
}

Sample gen_sample(const Mesh& mesh, const DatasetConfig& config, std::uint64_t seed) {
    switch (config.bc) {
    case BcConfig::dirichlet: return gen_dirichlet_sample(mesh, config, seed);
    case BcConfig::mixed: return gen_mixed_sample(mesh, config, seed, false);
    case BcConfig::mixed_plus: return gen_mixed_sample(mesh, config, seed, true);
    }
    return {};
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max(1, threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

UnifiedBoundaryField stored_unified(const RawBoundarySpec& raw, const NormalizationStats& stats) {
    UnifiedBoundaryField u = merge_normalize(raw, stats);
    for (auto* ch : {&u.alpha, &u.beta, &u.gamma}) {
        for (auto& v : *ch) v = static_cast<double>(static_cast<float>(v));
    }
    return u;
}

Sample gen_sample_retrying(const Mesh& mesh, const DatasetConfig& config, std::uint64_t seed) {
    // Robin coefficients may go negative, which occasionally leaves the
    // system indefinite. Such draws are replaced by a reseeded one.
    for (int attempt = 0;; ++attempt) {
        try {
            return gen_sample(mesh, config, attempt == 0 ? seed : derive_seed(seed, attempt));
        } catch (const SolverError&) {
            if (attempt + 1 >= max_solve_attempts) throw;
        }
    }
}

Dataset generate_dataset(const DatasetConfig& config, int threads) {
    Dataset ds;
    ds.config = config;
    ds.mesh = make_mesh(config.geometry, config.resolution);
    const auto total = static_cast<std::size_t>(config.total());
    ds.samples.resize(total);
    parallel_for(total, threads, [&](std::size_t i) { ds.samples[i] = gen_sample_retrying(ds.mesh, config, derive_seed(config.seed, i)); });
    std::vector<RawBoundarySpec> train;
    train.reserve(config.n_train);
    for (std::size_t i = 0; i < ds.n_train(); ++i) train.push_back(ds.samples[i].raw);
    ds.stats = compute_stats(train);
    for (auto& s : ds.samples) s.unified = stored_unified(s.raw, ds.stats);
    return ds;
}

json stats_to_json(const NormalizationStats& s) {
    return {{"mu_d", s.mu_d}, {"sigma_d", s.sigma_d}, {"mu_n", s.mu_n}, {"sigma_n", s.sigma_n}};
}

NormalizationStats stats_from_json(const json& j) {
    try {
        return {j.at("mu_d").get<double>(), j.at("sigma_d").get<double>(), j.at("mu_n").get<double>(),
                j.at("sigma_n").get<double>()};
    } catch (const json::exception& e) {
        throw DataError(DataError::Kind::manifest, std::string("malformed stats: ") + e.what());
    }
}

std::vector<ArrayEntry> mesh_to_arrays(const Mesh& mesh) {
    const auto n = static_cast<std::int64_t>(mesh.nodes.size());
    const auto t = static_cast<std::int64_t>(mesh.triangles.size());
    const auto b = static_cast<std::int64_t>(mesh.boundary_loop.size());
    std::vector<double> nodes;
    for (auto p : mesh.nodes) nodes.insert(nodes.end(), {p.x, p.y});
    std::vector<std::int32_t> tris;
    for (const auto& tr : mesh.triangles) tris.insert(tris.end(), tr.begin(), tr.end());
    std::vector<double> normals;
    for (auto p : mesh.boundary_normals) normals.insert(normals.end(), {p.x, p.y});
    std::vector<ArrayEntry> out;
    out.push_back(make_array<double>("mesh/nodes", nodes, {n, 2}));
    out.push_back(make_array<std::int32_t>("mesh/triangles", tris, {t, 3}));
    out.push_back(make_array<std::int32_t>("mesh/boundary_loop", mesh.boundary_loop, {b}));
    out.push_back(make_array<double>("mesh/boundary_normals", normals, {b, 2}));
    out.push_back(make_array<double>("mesh/sdf", mesh.sdf, {n}));
    return out;
}

Mesh mesh_from_arrays(const ArrayDir& dir) {
    Mesh mesh;
    const auto& nodes = dir.get("mesh/nodes");
    if (nodes.shape.size() != 2 || nodes.shape[1] != 2) {
        throw DataError(DataError::Kind::shape, "shape mismatch for array 'mesh/nodes'");
    }
    const std::int64_t n = nodes.shape[0];
    const auto& tris = dir.get("mesh/triangles");
    if (tris.shape.size() != 2 || tris.shape[1] != 3) {
        throw DataError(DataError::Kind::shape, "shape mismatch for array 'mesh/triangles'");
    }
    const auto& loop = dir.get("mesh/boundary_loop");
    if (loop.shape.size() != 1) throw DataError(DataError::Kind::shape, "shape mismatch for array 'mesh/boundary_loop'");
    const std::int64_t b = loop.shape[0];
    auto xy = dir.expect("mesh/nodes", DType::f64, {n, 2}).as<double>();
    for (std::int64_t i = 0; i < n; ++i) mesh.nodes.push_back({xy[2 * i], xy[2 * i + 1]});
    auto tv = dir.expect("mesh/triangles", DType::i32, {tris.shape[0], 3}).as<std::int32_t>();
    for (std::size_t k = 0; k + 2 < tv.size(); k += 3) mesh.triangles.push_back({tv[k], tv[k + 1], tv[k + 2]});
    mesh.boundary_loop = dir.expect("mesh/boundary_loop", DType::i32, {b}).as<std::int32_t>();
    auto nv = dir.expect("mesh/boundary_normals", DType::f64, {b, 2}).as<double>();
    for (std::int64_t j = 0; j < b; ++j) mesh.boundary_normals.push_back({nv[2 * j], nv[2 * j + 1]});
    mesh.sdf = dir.expect("mesh/sdf", DType::f64, {n}).as<double>();
    validate_mesh(mesh);
    return mesh;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    const auto s = static_cast<std::int64_t>(ds.samples.size());
    const auto n = static_cast<std::int64_t>(ds.mesh.nodes.size());
    const auto b = static_cast<std::int64_t>(ds.mesh.boundary_loop.size());
    const auto nseg = static_cast<std::int64_t>(ds.samples.empty() ? 0 : ds.samples.front().raw.segments.size());
    std::vector<double> f, u, gd, gn, gr, ar, seg;
    std::vector<std::uint8_t> types;
    std::vector<float> alpha, beta, gamma;
    for (const auto& smp : ds.samples) {
        if (static_cast<std::int64_t>(smp.raw.segments.size()) != nseg) {
            throw DataError(DataError::Kind::shape, "write_dataset: samples have differing segment counts");
        }
        f.insert(f.end(), smp.f.begin(), smp.f.end());
        u.insert(u.end(), smp.u.begin(), smp.u.end());
        gd.insert(gd.end(), smp.raw.gamma_d.begin(), smp.raw.gamma_d.end());
        gn.insert(gn.end(), smp.raw.gamma_n.begin(), smp.raw.gamma_n.end());
        gr.insert(gr.end(), smp.raw.gamma_r.begin(), smp.raw.gamma_r.end());
        ar.insert(ar.end(), smp.raw.alpha_r.begin(), smp.raw.alpha_r.end());
        for (auto t : smp.raw.types) types.push_back(static_cast<std::uint8_t>(t));
        for (const auto& sg : smp.raw.segments) seg.insert(seg.end(), {sg.start, sg.end, static_cast<double>(sg.type)});
        for (std::size_t j = 0; j < smp.unified.size(); ++j) {
            alpha.push_back(static_cast<float>(smp.unified.alpha[j]));
            beta.push_back(static_cast<float>(smp.unified.beta[j]));
            gamma.push_back(static_cast<float>(smp.unified.gamma[j]));
        }
    }
    std::vector<ArrayEntry> arrays = mesh_to_arrays(ds.mesh);
    arrays.push_back(make_array<double>("f", f, {s, n}));
    arrays.push_back(make_array<double>("u", u, {s, n}));
    arrays.push_back(make_array<std::uint8_t>("bc_type", types, {s, b}));
    arrays.push_back(make_array<double>("raw/gamma_d", gd, {s, b}));
    arrays.push_back(make_array<double>("raw/gamma_n", gn, {s, b}));
    arrays.push_back(make_array<double>("raw/gamma_r", gr, {s, b}));
    arrays.push_back(make_array<double>("raw/alpha_r", ar, {s, b}));
    arrays.push_back(make_array<double>("raw/segments", seg, {s, nseg, 3}));
    arrays.push_back(make_array<float>("unified/alpha", alpha, {s, b}));
    arrays.push_back(make_array<float>("unified/beta", beta, {s, b}));
    arrays.push_back(make_array<float>("unified/gamma", gamma, {s, b}));
    json meta = {{"kind", "dataset"},
                 {"geometry", to_string(ds.config.geometry)},
                 {"counts",
                  {{"nodes", n},
                   {"boundary_nodes", b},
                   {"triangles", ds.mesh.triangles.size()},
                   {"segments", nseg},
                   {"samples", s},
                   {"train", ds.config.n_train},
                   {"val", ds.config.n_val},
                   {"test", ds.config.n_test}}},
                 {"stats", stats_to_json(ds.stats)},
                 {"config", to_json(ds.config)}};
    write_array_dir(dir, meta, arrays);
}

Dataset read_dataset(const std::filesystem::path& dir) {
    const ArrayDir ad = read_array_dir(dir);
    const json& m = ad.manifest;
    Dataset ds;
    std::int64_t s = 0, n = 0, b = 0, nseg = 0;
    try {
        if (m.at("kind") != "dataset") throw DataError(DataError::Kind::manifest, "manifest kind is not 'dataset'");
        ds.config = dataset_config_from_json(m.at("config"), "config");
        const auto& c = m.at("counts");
        s = c.at("samples").get<std::int64_t>();
        n = c.at("nodes").get<std::int64_t>();
        b = c.at("boundary_nodes").get<std::int64_t>();
        nseg = c.at("segments").get<std::int64_t>();
    } catch (const json::exception& e) {
        throw DataError(DataError::Kind::manifest, std::string("malformed dataset manifest: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(DataError::Kind::manifest, std::string("malformed dataset manifest: ") + e.what());
    }
    if (s != ds.config.total()) throw DataError(DataError::Kind::manifest, "sample count differs from split sizes");
    ds.stats = stats_from_json(m.at("stats"));
    ds.mesh = mesh_from_arrays(ad);
    if (static_cast<std::int64_t>(ds.mesh.nodes.size()) != n ||
        static_cast<std::int64_t>(ds.mesh.boundary_loop.size()) != b) {
        throw DataError(DataError::Kind::shape, "mesh arrays disagree with manifest counts");
    }
    const auto f = ad.expect("f", DType::f64, {s, n}).as<double>();
    const auto u = ad.expect("u", DType::f64, {s, n}).as<double>();
    const auto types = ad.expect("bc_type", DType::u8, {s, b}).as<std::uint8_t>();
    const auto gd = ad.expect("raw/gamma_d", DType::f64, {s, b}).as<double>();
    const auto gn = ad.expect("raw/gamma_n", DType::f64, {s, b}).as<double>();
    const auto gr = ad.expect("raw/gamma_r", DType::f64, {s, b}).as<double>();
    const auto ar = ad.expect("raw/alpha_r", DType::f64, {s, b}).as<double>();
    const auto seg = ad.expect("raw/segments", DType::f64, {s, nseg, 3}).as<double>();
    const auto alpha = ad.expect("unified/alpha", DType::f32, {s, b}).as<float>();
    const auto beta = ad.expect("unified/beta", DType::f32, {s, b}).as<float>();
    const auto gamma = ad.expect("unified/gamma", DType::f32, {s, b}).as<float>();
    ds.samples.resize(s);
    for (std::int64_t i = 0; i < s; ++i) {
        auto& smp = ds.samples[i];
        const auto nb = static_cast<std::size_t>(i * n), ne = nb + static_cast<std::size_t>(n);
        const auto bb = static_cast<std::size_t>(i * b), be = bb + static_cast<std::size_t>(b);
        smp.f.assign(f.begin() + nb, f.begin() + ne);
        smp.u.assign(u.begin() + nb, u.begin() + ne);
        for (std::size_t k = bb; k < be; ++k) {
            if (types[k] > 2) throw DataError(DataError::Kind::manifest, "bc_type tag out of range");
            smp.raw.types.push_back(static_cast<BcType>(types[k]));
        }
        smp.raw.gamma_d.assign(gd.begin() + bb, gd.begin() + be);
        smp.raw.gamma_n.assign(gn.begin() + bb, gn.begin() + be);
        smp.raw.gamma_r.assign(gr.begin() + bb, gr.begin() + be);
        smp.raw.alpha_r.assign(ar.begin() + bb, ar.begin() + be);
        for (std::int64_t k = 0; k < nseg; ++k) {
            const std::size_t o = static_cast<std::size_t>((i * nseg + k) * 3);
            smp.raw.segments.push_back({seg[o], seg[o + 1], static_cast<BcType>(static_cast<int>(seg[o + 2]))});
        }
        smp.unified.types = smp.raw.types;
        smp.unified.alpha.assign(alpha.begin() + bb, alpha.begin() + be);
        smp.unified.beta.assign(beta.begin() + bb, beta.begin() + be);
        smp.unified.gamma.assign(gamma.begin() + bb, gamma.begin() + be);
    }
    return ds;
}

}  // namespace bcx
