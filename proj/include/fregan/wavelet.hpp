#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace fregan {

// One Haar (Daubechies1) analysis step:
//   low[n]  = (x[2n] + x[2n+1]) / sqrt(2)
//   high[n] = (x[2n] - x[2n+1]) / sqrt(2)
// Odd-length inputs are right-padded with one zero; original_length lets the
// inverse drop that sample again.
struct WaveletPair {
    std::vector<double> low;
    std::vector<double> high;
    std::size_t original_length = 0;
};

WaveletPair dwt_haar(std::span<const double> x);
std::vector<double> idwt_haar(const WaveletPair& p);

// levels[m] holds 2^m sub-bands in recursive low-first order
// (L, H -> LL, LH, HL, HH -> ...). The input is zero-padded to a multiple of
// 2^m first, so every level holds padded_length samples in total.
struct WaveletPyramid {
    std::vector<std::vector<std::vector<double>>> levels;
    std::size_t original_length = 0;
    std::size_t padded_length = 0;

    std::size_t sample_count(std::size_t level) const;
};

WaveletPyramid dwt_multilevel(std::span<const double> x, int levels);

// output[n] = mean(x[n*factor .. (n+1)*factor)), length floor(len / factor).
std::vector<double> avg_pool_downsample(std::span<const double> x, int factor);

double energy(std::span<const double> x);

// Side-by-side comparison of a downsampled up-chirp: 2x average pooling
// against one Haar split.
struct ChirpSegment {
    double t_begin = 0.0;
    double t_end = 0.0;
    double input_hz = 0.0;       // chirp instantaneous frequency at segment centre
    double input_energy = 0.0;
    double ap_energy = 0.0;      // raw sum of squares of the pooled signal
    double dwt_low_energy = 0.0;
    double dwt_high_energy = 0.0;
    double ap_peak_hz = 0.0;     // dominant frequency of the pooled segment
    bool above_half_band = false;
};

struct ChirpReport {
    double duration = 0.0;
    double f0 = 0.0;
    double f1 = 0.0;
    int sample_rate = 0;
    double half_band_hz = 0.0;            // sample_rate / 4, the new Nyquist after 2x
    std::optional<double> crossing_time;  // when the chirp passes half_band_hz

    double input_energy = 0.0;
    double ap_energy = 0.0;
    double dwt_low_energy = 0.0;
    double dwt_high_energy = 0.0;
    // Power ratios (output mean square over input mean square); undefined on silence.
    std::optional<double> ap_retained;
    std::optional<double> dwt_retained;

    std::vector<ChirpSegment> segments;
    std::vector<double> input;
    std::vector<double> ap;
    std::vector<double> dwt_low;
    std::vector<double> dwt_high;
};

ChirpReport chirp_demo(double duration, double f0, double f1, int sample_rate, int segments = 8);

} // namespace fregan
