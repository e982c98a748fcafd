#pragma once

#include "fregan/config.hpp"
#include "fregan/discriminators.hpp"
#include "fregan/generator.hpp"
#include "fregan/objectives.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fregan {

struct SplitManifests {
    std::vector<std::string> train, val, test; // paths relative to the wav directory
    std::vector<std::pair<std::string, std::string>> rejects; // (path, reason)
};

// Validates every .wav in `wav_dir`, shuffles the valid ones with `seed` and
// splits them: floor(ratio * n) for validation and test, the rest to train.
// Throws ConfigError when fewer than 10 files are valid.
SplitManifests ingest_dataset(const std::filesystem::path& wav_dir, std::uint64_t seed,
                              const std::array<double, 3>& ratios = {0.8, 0.1, 0.1});
// train.txt, val.txt, test.txt and rejects.txt (tab-separated path and reason).
void write_manifests(const SplitManifests& m, const std::filesystem::path& out_dir);
std::vector<std::string> read_manifest(const std::filesystem::path& file);

struct AdamWSettings {
    double beta1 = 0.8;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Adam with decoupled weight decay; moments are kept per parameter, in the
// order of the ParamSet it was built for.
class AdamW {
public:
    AdamW() = default;
    explicit AdamW(const ParamSet& params);

    void step(ParamSet& params, const AdamWSettings& s, double lr);
    std::uint64_t steps() const { return t_; }

    std::vector<Tensor>& first_moments() { return m_; }
    std::vector<Tensor>& second_moments() { return v_; }
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }
    void set_steps(std::uint64_t t) { t_ = t; }

private:
    std::vector<Tensor> m_, v_;
    std::uint64_t t_ = 0;
};

struct ModelBundle {
    GeneratorConfig gcfg;
    DiscriminatorConfig dcfg;
    ParamSet generator, rpd, rsd;
};

struct OptimizerBundle {
    AdamWSettings settings;
    AdamW generator, rpd, rsd;
};

ModelBundle init_models(const GeneratorConfig& g, const DiscriminatorConfig& d, std::uint64_t seed);
OptimizerBundle init_optimizers(const ModelBundle& m, const TrainConfig& t);

// Segments [B,1,L,1] with their log-mel [B,80,L/256,1].
struct Batch {
    Tensor audio;
    Tensor mel;
};

Batch make_batch(const std::vector<AudioBuffer>& clips, const std::vector<std::size_t>& picks, int segment_length,
                 std::mt19937_64& rng);

// One discriminator update on the detached generator output, then one
// generator update against the freshly updated discriminators. Throws
// NumericalError naming the first non-finite term; parameters are left
// untouched by the phase that failed.
LossReport train_step(const Batch& batch, ModelBundle& models, OptimizerBundle& opt, const LossWeights& w,
                      double lr);
// The two halves of train_step on their own; each fills only its own fields.
LossReport discriminator_update(const Batch& batch, ModelBundle& models, OptimizerBundle& opt, double lr);
LossReport generator_update(const Batch& batch, ModelBundle& models, OptimizerBundle& opt, const LossWeights& w,
                            double lr);

struct ContributionEntry {
    std::uint64_t epoch = 0;
    std::uint64_t step = 0;
    std::vector<double> shares; // percent per branch, S0 (lowest rate) first
};

struct ContributionSeries {
    std::vector<ContributionEntry> entries;

    // epoch,step,S0,...
    std::string to_csv() const;
    static ContributionSeries from_csv(const std::string& text);
};

// Standard deviations normalised to percent; all zero gives equal shares.
std::vector<double> contribution_shares(const std::vector<double>& stds);
// Shares of the projected branches on `probe`, padded with leading zeros to
// top_k entries when the generator has a single output branch.
std::vector<double> track_contributions(const ParamSet& generator, const GeneratorConfig& cfg,
                                        const MelSpectrogram& probe);

struct Checkpoint {
    nlohmann::json config;
    std::uint64_t config_hash = 0;
    ModelBundle models;
    OptimizerBundle optimizers;
    std::uint64_t step = 0;
    std::uint64_t epoch = 0;
    std::string rng_state;
    std::vector<std::uint64_t> order;
    std::uint64_t cursor = 0;
    ContributionSeries contributions;
};

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
// NotFoundError for a missing file, FormatError for damaged bytes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

inline constexpr const char* kLogFile = "train_log.csv";
inline constexpr const char* kContributionFile = "contributions.csv";
inline constexpr const char* kCheckpointFile = "checkpoint.fgck";

std::string log_header(int sub_discriminators);
std::string log_row(std::uint64_t step, std::uint64_t epoch, double lr, const LossReport& r);

class Trainer {
public:
    // probe defaults to the first training clip.
    Trainer(ExperimentConfig cfg, std::vector<AudioBuffer> clips, std::optional<AudioBuffer> probe = std::nullopt);

    LossReport step();
    // Runs until `steps` steps have completed in total; appends to the CSV
    // log and contribution file in `out_dir` when it is non-empty.
    void run(std::uint64_t steps, const std::filesystem::path& out_dir = {},
             const std::function<void(std::uint64_t, const LossReport&)>& on_step = {});

    Checkpoint checkpoint() const;
    void save(const std::filesystem::path& path) const;
    // Strong guarantee: on any error the trainer is unchanged. A config-hash
    // mismatch raises ConfigError quoting both hashes.
    void load(const std::filesystem::path& path);

    const ExperimentConfig& config() const { return cfg_; }
    std::uint64_t hash() const { return hash_; }
    const ModelBundle& models() const { return models_; }
    ModelBundle& models() { return models_; }
    const ContributionSeries& contributions() const { return contributions_; }
    const MelSpectrogram& probe_mel() const { return probe_mel_; }
    std::uint64_t steps_done() const { return step_; }
    std::uint64_t epoch() const { return epoch_; }
    double learning_rate() const;

private:
    std::vector<std::size_t> next_picks();
    void reshuffle();
    void record_contribution();

    ExperimentConfig cfg_;
    std::uint64_t hash_;
    std::vector<AudioBuffer> clips_;
    MelSpectrogram probe_mel_;
    ModelBundle models_;
    OptimizerBundle opt_;
    std::mt19937_64 rng_;
    std::vector<std::uint64_t> order_;
    std::uint64_t cursor_ = 0;
    std::uint64_t step_ = 0;
    std::uint64_t epoch_ = 0;
    ContributionSeries contributions_;
};

// Clips named by the config's data section.
std::vector<AudioBuffer> load_training_clips(const DataConfig& data);

struct AblationRow {
    std::string name;
    std::string slug; // directory name for the row's outputs
    ExperimentConfig config;
};

// Baseline followed by: w/o RCG, w/o NN upsampler, w/o mel condition,
// w/o RPD & RSD, w/o DWT.
std::vector<AblationRow> ablation_matrix(const ExperimentConfig& base);

struct AblationResult {
    std::string name;
    double final_mel_loss = 0.0;
    double mcd13 = 0.0;
    std::optional<double> rmse_f0;
    double mel_l1 = 0.0;
    double s3_share = 0.0; // highest-rate share at the last recorded epoch
};

std::vector<AblationResult> run_ablation(const std::vector<AblationRow>& rows, const std::vector<AudioBuffer>& clips,
                                         const AudioBuffer& eval_clip, const std::filesystem::path& out_dir,
                                         const std::function<void(const std::string&)>& progress = {});
std::string ablation_csv(const std::vector<AblationResult>& results);

} // namespace fregan
