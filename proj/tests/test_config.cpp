#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "bcx/config.hpp"
#include "bcx/error.hpp"

using namespace bcx;
namespace fs = std::filesystem;

namespace {

std::string config_error(const json& j) {
    try {
        run_config_from_json(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(RunConfig, EmptyObjectGivesDefaults) {
    const RunConfig c = run_config_from_json(json::object());
    EXPECT_EQ(c.dataset.geometry, Geometry::disk);
    EXPECT_EQ(c.dataset.resolution, 14);
    EXPECT_EQ(c.dataset.n_train, 512);
    EXPECT_EQ(c.dataset.n_test, 64);
    EXPECT_EQ(c.model.extender.kind, ExtenderKind::learned);
    EXPECT_EQ(c.model.extender.latent, 32);
    EXPECT_EQ(c.model.extender.blocks, 2);
    EXPECT_EQ(c.model.core.coarse, 64);
    EXPECT_EQ(c.train.epochs, 200);
    EXPECT_EQ(c.train.batch_size, 8);
    EXPECT_EQ(c.train.schedule.lr_peak, 2e-4);
    EXPECT_EQ(c.sweep.train_sizes, (std::vector<int>{64, 256, 512}));
}

TEST(RunConfig, SerializedDefaultsRoundTrip) {
    const json d = to_json(run_config_from_json(json::object()));
    EXPECT_EQ(to_json(run_config_from_json(d)), d);
}

TEST(RunConfig, CommittedDefaultsFileMatches) {
    std::ifstream in(fs::path(BCX_SOURCE_DIR) / "configs" / "defaults.json");
    ASSERT_TRUE(in);
    EXPECT_EQ(json::parse(in), to_json(run_config_from_json(json::object())));
}

TEST(RunConfig, UnknownKeyIsNamed) {
    EXPECT_NE(config_error({{"latnet", 3}}).find("latnet"), std::string::npos);
    const std::string nested = config_error({{"model", {{"core", {{"latnet", 3}}}}}});
    EXPECT_NE(nested.find("config.model.core.latnet"), std::string::npos) << nested;
}

TEST(RunConfig, TypeMismatchNamesPath) {
    const std::string e = config_error({{"train", {{"epochs", "ten"}}}});
    EXPECT_NE(e.find("config.train.epochs"), std::string::npos) << e;
}

TEST(RunConfig, CoarseCountAboveNodeCountIsRejected) {
    // 3 rings: 37 nodes.
    const std::string e = config_error({{"dataset", {{"resolution", 3}}}, {"model", {{"core", {{"coarse", 38}}}}}});
    EXPECT_NE(e.find("coarse"), std::string::npos) << e;
    EXPECT_EQ(config_error({{"dataset", {{"resolution", 3}}}, {"model", {{"core", {{"coarse", 37}}}}}}), "");
}

TEST(RunConfig, SweepSizesBoundedByTrainingSet) {
    EXPECT_FALSE(config_error({{"dataset", {{"train", 100}}}}).empty());
    EXPECT_EQ(config_error({{"dataset", {{"train", 100}}}, {"sweep", {{"train_sizes", {10, 100}}}}}), "");
}

TEST(RunConfig, MissingFileIsConfigError) {
    EXPECT_THROW(load_run_config("/nonexistent/bcx.json"), ConfigError);
}
