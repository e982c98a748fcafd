#pragma once

#include "fregan/autograd.hpp"
#include "fregan/spectral.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fregan {

struct GeneratorConfig {
    int mel_channels = kMelBands;
    int pre_kernel = 7;
    std::vector<int> upsample_rates{8, 4, 2, 2, 2};
    std::vector<int> upsample_kernels{16, 8, 4, 4, 4};
    std::vector<int> mrf_kernel_sizes{3, 7, 11};
    // One ladder of (dilation, dilation) conv pairs, shared by every kernel size.
    std::vector<std::vector<int>> mrf_dilations{{1, 1}, {3, 1}, {5, 1}, {7, 1}};
    int base_channels = 512;
    int top_k = 4;
    int post_kernel = 7;
    bool use_rcg = true;
    bool use_nn_upsampler = true;
    bool use_mel_condition = true;
    double leaky_slope = 0.1;
    double init_std = 0.01;

    static GeneratorConfig v1();
    static GeneratorConfig v2();
    // Desk-scale widths for smoke training and benchmarks.
    static GeneratorConfig micro_v1();
    static GeneratorConfig micro_v2();

    // Throws ConfigError naming the first broken invariant.
    void validate() const;
    int blocks() const { return static_cast<int>(upsample_rates.size()); }
    // Output channels of block i; block -1 is the pre-convolution.
    int channels(int block) const;
    int hop() const;
    // Samples per mel frame at the output of block i.
    int resolution(int block) const;
    bool is_branch_block(int block) const;
};

// Expected parameter names and shapes for `cfg`.
ParamSet make_generator_params(const GeneratorConfig& cfg);
ParamSet init_generator(const GeneratorConfig& cfg, std::uint64_t seed);
// ConfigError naming the first missing, unexpected, or mis-shaped parameter.
void check_generator_params(const GeneratorConfig& cfg, const ParamSet& params);

struct GeneratorVars {
    Var final;                  // tanh of the summed waveform, [N,1,256T,1]
    std::vector<Var> branches;  // raw per-resolution waveforms, lowest rate first
    std::vector<Var> projected; // each branch carried to full rate by the skip upsamplers
};

// Differentiable forward pass. mel: [N, mel_channels, T, 1].
GeneratorVars generator_forward(ParamBinder& p, const GeneratorConfig& cfg, Var mel);

struct MultiResolutionOutput {
    AudioBuffer final;
    std::vector<std::vector<double>> branches;
    std::vector<std::vector<double>> projected;
};

MultiResolutionOutput generate(const MelSpectrogram& mel, const GeneratorConfig& cfg, const ParamSet& params);

// Nearest-neighbour upsampler: repeat each sample `factor` times, then apply
// a 1x1 projection with the given gain (1.0 is the identity projection).
std::vector<double> nn_upsample(const std::vector<double>& x, int factor, double projection_gain = 1.0);

// Multi-receptive-field fusion: mean over kernel sizes of residual stacks.
// Parameters live under `<prefix>.k<j>.<l>.{a,b}`.
void add_mrf_params(ParamSet& params, const std::string& prefix, int channels,
                    const std::vector<int>& kernel_sizes, const std::vector<std::vector<int>>& dilations);
Var mrf_block(ParamBinder& p, const std::string& prefix, Var x, const std::vector<int>& kernel_sizes,
              const std::vector<std::vector<int>>& dilations, double slope);

} // namespace fregan
