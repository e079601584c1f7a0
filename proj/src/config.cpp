#include "bcx/config.hpp"

#include <fstream>

#include "bcx/json_util.hpp"

namespace bcx {

json to_json(const SweepConfig& c) {
    return {{"train_sizes", c.train_sizes},
            {"noise_ratios", c.noise_ratios},
            {"boundary_strides", c.boundary_strides},
            {"noise_seed", c.noise_seed}};
}

json to_json(const RunConfig& c) {
    return {{"dataset", to_json(c.dataset)},
            {"model", to_json(c.model)},
            {"train", to_json(c.train)},
            {"sweep", to_json(c.sweep)}};
}

namespace {

SweepConfig sweep_config_from_json(ObjectReader r) {
    SweepConfig c;
    r.read("train_sizes", c.train_sizes);
    r.read("noise_ratios", c.noise_ratios);
    r.read("boundary_strides", c.boundary_strides);
    r.read("noise_seed", c.noise_seed);
    r.finish();
    for (int n : c.train_sizes) {
        if (n < 1) throw ConfigError(r.path() + ".train_sizes: entries must be >= 1");
    }
    for (double v : c.noise_ratios) {
        if (!(v >= 0.0)) throw ConfigError(r.path() + ".noise_ratios: entries must be >= 0");
    }
    for (int k : c.boundary_strides) {
        if (k < 1) throw ConfigError(r.path() + ".boundary_strides: entries must be >= 1");
    }
    return c;
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
    ObjectReader r(j, "config");
    RunConfig c;
    c.dataset = dataset_config_from_json(r.sub("dataset"), "config.dataset");
    c.model = model_config_from_json(r.sub("model"), "config.model");
    c.train = train_config_from_json(r.sub("train"), "config.train");
    c.sweep = sweep_config_from_json(r.child("sweep"));
    r.finish();

    const Mesh mesh = make_mesh(c.dataset.geometry, c.dataset.resolution);
    try {
        validate(c.model.core, mesh.nodes.size());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config.model.") + e.what());
    }
    for (int n : c.sweep.train_sizes) {
        if (n > c.dataset.n_train) {
            throw ConfigError("config.sweep.train_sizes: " + std::to_string(n) + " exceeds config.dataset.train");
        }
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError(file.string() + ": cannot open config file");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(file.string() + ": invalid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace bcx
