#include "fregan/config.hpp"
#include "fregan/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace fregan;
using nlohmann::json;

TEST_CASE("experiment config survives a JSON round trip")
{
    ExperimentConfig c = ExperimentConfig::micro();
    c.train.learning_rate = 1e-3;
    c.discriminator.mode = DownsampleMode::avg_pool;
    c.generator.use_rcg = false;
    c.data.root = "clips";
    const ExperimentConfig back = experiment_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(config_hash(back) == config_hash(c));
}

TEST_CASE("unknown keys are named with their path")
{
    json j = to_json(ExperimentConfig::micro());
    j["train"]["lerning_rate"] = 0.1;
    CHECK_THROWS_WITH_AS(experiment_config_from_json(j), doctest::Contains("train.lerning_rate"), ConfigError);
    j = to_json(ExperimentConfig::micro());
    j["generator"]["base_channels"] = "wide";
    CHECK_THROWS_WITH_AS(experiment_config_from_json(j), doctest::Contains("generator.base_channels"), ConfigError);
}

TEST_CASE("dotted overrides parse JSON values with a string fallback")
{
    json j = json::object();
    apply_override(j, "train.steps=25");
    apply_override(j, "discriminator.mode=avg_pool");
    apply_override(j, "train.split=[0.5,0.25,0.25]");
    CHECK(j["train"]["steps"] == 25);
    CHECK(j["discriminator"]["mode"] == "avg_pool");
    CHECK(j["train"]["split"].size() == 3);
    CHECK_THROWS_AS(apply_override(j, "no_equals_sign"), ConfigError);
}

TEST_CASE("presets expand before the explicit keys")
{
    json j = json::object();
    j["generator"] = {{"preset", "micro_v1"}, {"top_k", 2}};
    const ExperimentConfig c = experiment_config_from_json(j);
    CHECK(c.generator.base_channels == GeneratorConfig::micro_v1().base_channels);
    CHECK(c.generator.top_k == 2);
    j["generator"]["preset"] = "huge";
    CHECK_THROWS_AS(experiment_config_from_json(j), ConfigError);
}

TEST_CASE("config files and overrides load together")
{
    const auto dir = std::filesystem::temp_directory_path() / "fregan_config_test";
    std::filesystem::create_directories(dir);
    const auto file = dir / "exp.json";
    write_json_file(json{{"preset", "micro"}, {"train", {{"steps", 7}}}}, file);
    const ExperimentConfig c = load_experiment_config(file, {"train.seed=9"});
    CHECK(c.train.steps == 7);
    CHECK(c.train.seed == 9);
    CHECK(c.train.batch_size == 1);
    CHECK_THROWS_AS(load_experiment_config(dir / "missing.json"), NotFoundError);
    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK_THROWS_AS(load_experiment_config(dir / "bad.json"), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("the hash follows the model and optimizer but not the run length")
{
    const ExperimentConfig base = ExperimentConfig::micro();
    ExperimentConfig c = base;
    c.train.steps = 5000;
    c.train.checkpoint_every = 10;
    c.data.root = "elsewhere";
    CHECK(config_hash(c) == config_hash(base));
    c = base;
    c.train.learning_rate *= 2.0;
    CHECK(config_hash(c) != config_hash(base));
    c = base;
    c.generator.base_channels = 8;
    CHECK(config_hash(c) != config_hash(base));
    c = base;
    c.loss.lambda_mel = 10.0;
    CHECK(config_hash(c) != config_hash(base));
    CHECK(hash_hex(0x1234).size() == 16);
}

TEST_CASE("training settings are validated")
{
    ExperimentConfig c = ExperimentConfig::micro();
    CHECK_NOTHROW(c.validate());
    c.train.split = {0.8, 0.1, 0.2};
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("split"), ConfigError);
    c = ExperimentConfig::micro();
    c.train.segment_length = 1000;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ExperimentConfig::micro();
    c.train.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}
