#pragma once

#include "fregan/generator.hpp"
#include "fregan/objectives.hpp"
#include "fregan/spectral.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fregan {

inline constexpr int kCepstralOrder = 13;

// Orthonormal DCT-II of every log-mel frame; row t holds c_0..c_{bands-1}.
std::vector<std::vector<double>> mel_cepstra(const MelSpectrogram& mel);

// (10 / ln 10) * sqrt(2) * mean over frames of the Euclidean distance between
// cepstral coefficients 1..13. The longer signal is truncated to the shorter.
// Throws std::invalid_argument on mismatched rates or durations more than 10% apart.
double mcd13(const AudioBuffer& reference, const AudioBuffer& candidate);

struct PitchSettings {
    double window_seconds = 0.025;
    double hop_seconds = 0.010;
    double f_min = 60.0;
    double f_max = 500.0;
    double voicing_threshold = 0.3;
};

// Normalised-autocorrelation pitch per frame; nullopt marks an unvoiced frame.
std::vector<std::optional<double>> track_pitch(const AudioBuffer& x, const PitchSettings& s = {});

struct PitchErrorAccumulator {
    double sum_sq = 0.0;
    std::size_t frames = 0;
    void add(const std::vector<std::optional<double>>& a, const std::vector<std::optional<double>>& b);
    std::optional<double> rmse() const;
};

// RMS Hz error over frames voiced in both signals; nullopt when there are none.
std::optional<double> rmse_f0(const AudioBuffer& reference, const AudioBuffer& candidate,
                              const PitchSettings& s = {});

// Rows are embeddings.
using EmbeddingSet = std::vector<std::vector<double>>;

struct FrechetResult {
    double distance = 0.0;
    bool regularized = false;
};

// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)) with unbiased covariances.
FrechetResult frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b);

using Embedder = std::function<std::vector<double>(const AudioBuffer&)>;
// Per-band mean and standard deviation of the log-mel frames (160 values).
std::vector<double> logmel_stats_embedding(const AudioBuffer& x);

struct UtteranceMetrics {
    std::string id;
    double mcd13 = 0.0;
    std::optional<double> rmse_f0;
    double mel_l1 = 0.0;
};

struct MetricReport {
    double mcd13 = 0.0;             // mean over utterances
    std::optional<double> rmse_f0;  // pooled over all co-voiced frames, Hz
    std::optional<double> frechet;  // needs >= 2 utterances
    bool frechet_regularized = false;
    std::vector<UtteranceMetrics> per_utterance;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

struct NamedAudio {
    std::string id;
    AudioBuffer audio;
};

MetricReport evaluate_pairs(const std::vector<NamedAudio>& references, const std::vector<NamedAudio>& candidates,
                            const Embedder& embed = logmel_stats_embedding);

// |psi(ref) - psi(cand)|; its mean is mel_loss(ref, cand) exactly.
MelDifference mel_difference_map(const AudioBuffer& reference, const AudioBuffer& candidate);

// wav -> log-mel -> generator, trimmed to the input length.
AudioBuffer copy_synthesis(const AudioBuffer& x, const GeneratorConfig& cfg, const ParamSet& params);

struct SpeedReport {
    double samples_per_second = 0.0;
    double real_time_factor = 0.0; // samples_per_second / 22050
    std::string device;
    int repetitions = 0;
    double audio_seconds = 0.0;
    std::vector<double> rep_samples_per_second;

    nlohmann::json to_json() const;
};

struct BenchSettings {
    int repetitions = 5;
    int warmup = 1;
};

// Median throughput over the repetitions, each synthesising the whole mel set.
SpeedReport bench_synthesis(const GeneratorConfig& cfg, const ParamSet& params, const std::vector<MelSpectrogram>& mels,
                            const std::string& device, const BenchSettings& s = {});

// Mel frames adding up to at least `seconds` of audio, cut from a
// deterministic speech-like signal.
std::vector<MelSpectrogram> benchmark_mel_set(double seconds, std::uint64_t seed = 7);

} // namespace fregan
