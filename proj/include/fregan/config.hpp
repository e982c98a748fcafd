#pragma once

#include "fregan/discriminators.hpp"
#include "fregan/generator.hpp"
#include "fregan/objectives.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fregan {

struct TrainConfig {
    int batch_size = 16;
    double learning_rate = 2e-4;
    // Multiplied into the learning rate once per epoch.
    double lr_decay = 0.999;
    double adam_beta1 = 0.8;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    int segment_length = 8192;
    int steps = 1000;
    std::uint64_t seed = 1234;
    std::array<double, 3> split{0.8, 0.1, 0.1};
    // 0 writes a checkpoint only when the run finishes.
    int checkpoint_every = 0;
    // Contribution entries are recorded every this many epochs.
    int contribution_every = 1;

    void validate() const;
};

struct DataConfig {
    // Directory the manifest paths are relative to.
    std::string root;
    // Newline-delimited relative paths; empty means every .wav under root.
    std::string manifest;
    // Fixed probe clip for contribution tracking; empty means the first training clip.
    std::string probe;
};

struct ExperimentConfig {
    GeneratorConfig generator = GeneratorConfig::v1();
    DiscriminatorConfig discriminator = DiscriminatorConfig::standard();
    TrainConfig train;
    LossWeights loss;
    DataConfig data;

    void validate() const;
    // Desk-scale preset: micro V2 generator, micro discriminators, batch 1.
    static ExperimentConfig micro();
};

nlohmann::json to_json(const GeneratorConfig& c);
nlohmann::json to_json(const DiscriminatorConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const ExperimentConfig& c);

// Strict readers: unknown keys and wrong types raise ConfigError naming the
// dotted key. A "preset" key, when present, is applied before the other keys.
GeneratorConfig generator_config_from_json(const nlohmann::json& j, const std::string& where = "generator");
DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j,
                                                   const std::string& where = "discriminator");
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

// "a.b.c=value"; value is parsed as JSON and falls back to a plain string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// File (may be empty for defaults) plus overrides, validated.
ExperimentConfig load_experiment_config(const std::filesystem::path& file,
                                        const std::vector<std::string>& overrides = {});
nlohmann::json read_json_file(const std::filesystem::path& file);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& file);

// FNV-1a of the canonical JSON of everything that shapes parameters and
// optimizer state. Run length, cadence and data paths are left out so a run
// can be resumed for more steps or on a different manifest.
std::uint64_t config_hash(const ExperimentConfig& c);
std::string hash_hex(std::uint64_t h);
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t seed = 1469598103934665603ULL);

} // namespace fregan
