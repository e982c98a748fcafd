#pragma once

#include "fregan/autograd.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace fregan {

inline constexpr int kSampleRate = 22050;
inline constexpr int kFftSize = 1024;
inline constexpr int kWindowSize = 1024;
inline constexpr int kHopSize = 256;
inline constexpr int kMelBands = 80;
inline constexpr int kFftBins = kFftSize / 2 + 1;
inline constexpr double kMelFMin = 0.0;
inline constexpr double kMelFMax = 11025.0;
// log(max(mel, floor)); silence maps to log(kLogFloor) everywhere.
inline constexpr double kLogFloor = 1e-5;
// Added to |X|^2 before the square root so the magnitude stays differentiable.
inline constexpr double kMagnitudeEpsilon = 1e-9;

struct AudioBuffer {
    std::vector<double> samples;
    int sample_rate = kSampleRate;

    std::size_t size() const { return samples.size(); }
    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Row-major bands x frames.
struct MelSpectrogram {
    int rows = kMelBands;
    int cols = 0;
    int frame_hop = kHopSize;
    std::vector<double> values;

    double at(int band, int frame) const { return values[static_cast<std::size_t>(band) * cols + frame]; }
    double& at(int band, int frame) { return values[static_cast<std::size_t>(band) * cols + frame]; }
    // [1, rows, cols, 1]
    Tensor to_tensor() const;
    static MelSpectrogram from_tensor(const Tensor& t, int batch_index = 0);
};

// ceil(samples / hop): frame t is centred on sample t * hop.
int mel_frame_count(std::size_t samples);

// Slaney-style triangular filters over [kMelFMin, kMelFMax], area-normalised.
struct MelFilterbank {
    struct Band {
        int first_bin = 0;
        std::vector<double> weights;
    };
    std::vector<Band> bands;
    std::vector<double> edges_hz; // kMelBands + 2 edges

    double weight(int band, int bin) const;
    // Weight of `band` at an arbitrary frequency from the continuous triangle.
    double weight_at_hz(int band, double hz) const;
};

const MelFilterbank& mel_filterbank();
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// The log-mel transform applied to a whole buffer (len >= kWindowSize).
MelSpectrogram mel_transform(const AudioBuffer& x);

namespace ops {
// Differentiable log-mel of audio laid out [N, 1, L, 1] -> [N, 80, ceil(L/256), 1].
Var log_mel(Var audio);
} // namespace ops

// Magnitude STFT with reflect centre padding; rows = n_fft/2+1 bins, cols = frames.
struct Spectrogram {
    int bins = 0;
    int frames = 0;
    double bin_hz = 0.0;
    double frame_seconds = 0.0;
    std::vector<double> magnitude; // row-major bins x frames
};
Spectrogram stft_magnitude(const std::vector<double>& x, int sample_rate, int n_fft, int hop);

// 16-bit PCM mono RIFF/WAVE.
AudioBuffer load_wav(const std::filesystem::path& path, int expected_rate = kSampleRate);
void save_wav(const AudioBuffer& x, const std::filesystem::path& path);

// Binary mel container: "FGML" magic, u32 rows, u32 cols, u32 dtype tag (1 = float32),
// then a row-major float32 payload, all little-endian.
inline constexpr std::uint32_t kMelDtypeFloat32 = 1;
void save_mel(const MelSpectrogram& mel, const std::filesystem::path& path);
MelSpectrogram load_mel(const std::filesystem::path& path);

enum class SignalKind { sine, chirp, noise, silence };

struct SignalParams {
    double duration = 1.0;       // seconds
    int sample_rate = kSampleRate;
    double amplitude = 0.5;      // must be <= 1
    double frequency = 440.0;    // sine
    double f0 = 0.0;             // chirp start
    double f1 = 0.0;             // chirp end
    std::uint64_t seed = 0;      // noise
};

AudioBuffer make_signal(SignalKind kind, const SignalParams& params);

// Voiced, vowel-like test utterance: glottal-style harmonic series with a
// gliding pitch, three formant resonances, an amplitude envelope and a short
// fricative burst, over a white noise floor 60 dB below the 0.5 peak.
// Deterministic in `seed`.
AudioBuffer make_speechlike(double duration, std::uint64_t seed, int sample_rate = kSampleRate);

} // namespace fregan
